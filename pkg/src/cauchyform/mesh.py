"""Oriented simplicial complexes with boundary in one and two dimensions.

A complex is built from its top-dimensional simplices. Every lower simplex is
stored with its vertices in increasing order, which fixes a reference
orientation, and the signed incidence matrices are integer valued so that
``boundary(k-1) @ boundary(k) == 0`` holds exactly. The orientation of the
manifold itself is carried by a sign per top simplex, recording whether the
vertex order given at construction is an even or odd permutation of the sorted
order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (
    DegenerateSimplexError,
    InvalidSpecError,
    InvariantViolation,
    MeshParseError,
)

MESH_FORMAT = "cauchyform-mesh-v1"
FAMILIES = ("interval", "rectangle", "disk", "annulus", "cylinder-strip")


def _permutation_sign(row):
    sign = 1
    row = list(row)
    for i in range(len(row)):
        for j in range(i + 1, len(row)):
            if row[i] > row[j]:
                sign = -sign
    return sign


class SimplicialComplex:
    """Immutable oriented simplicial manifold-with-boundary.

    Parameters
    ----------
    vertices : array_like, shape (V, d)
        Embedding coordinates, ``d >= n``.
    simplices : array_like, shape (F, n + 1)
        Top-dimensional simplices as vertex indices. Their vertex order
        defines the manifold orientation.
    meta : dict, optional
        Free-form description of how the complex was produced. Generators
        record their family and parameters here so that refinement can keep
        curved boundaries on the curve.
    """

    def __init__(self, vertices, simplices, meta=None, validate=True):
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim == 1:
            vertices = vertices[:, None]
        oriented = np.asarray(simplices, dtype=np.int64)
        if oriented.ndim != 2 or oriented.shape[0] == 0:
            raise InvariantViolation("complex needs at least one top simplex")
        n = oriented.shape[1] - 1
        if n not in (1, 2):
            raise InvariantViolation(f"only 1- and 2-dimensional complexes are supported, got {n}")
        if vertices.shape[1] < n:
            raise InvariantViolation(
                f"embedding dimension {vertices.shape[1]} is smaller than complex dimension {n}"
            )
        self.n = n
        self.vertices = vertices
        self.vertices.setflags(write=False)
        self.meta = dict(meta or {})

        for t, row in enumerate(oriented):
            if len(set(row.tolist())) != len(row):
                raise InvariantViolation(f"top simplex {t} repeats a vertex: {row.tolist()}", (n, t))

        self.oriented_top = oriented
        self.oriented_top.setflags(write=False)
        self.orientation = np.array([_permutation_sign(r) for r in oriented], dtype=np.int64)
        top = np.sort(oriented, axis=1)

        self._simplices = [np.arange(len(vertices), dtype=np.int64)[:, None]]
        if n == 2:
            pairs = np.concatenate([top[:, [0, 1]], top[:, [0, 2]], top[:, [1, 2]]])
            edges = np.unique(pairs, axis=0)
            self._simplices.append(edges)
        self._simplices.append(top)
        for s in self._simplices:
            s.setflags(write=False)

        self._index = [None] * (n + 1)
        self._boundary = [None]
        for k in range(1, n + 1):
            self._boundary.append(self._build_boundary(k))

        if validate:
            self._check_distinct_top()
            self._check_manifold()
            self._check_vertices_used()
            self._check_orientation()
            self._check_boundary_closed()
            self._check_connected()

        cof = np.asarray(abs(self._boundary[n]).sum(axis=1)).ravel()
        flags = [None] * (n + 1)
        flags[n - 1] = cof == 1
        flags[n] = np.zeros(len(top), dtype=bool)
        if n == 2:
            bedges = self._simplices[1][flags[1]]
            vflag = np.zeros(len(vertices), dtype=bool)
            vflag[bedges.ravel()] = True
            flags[0] = vflag
        self._boundary_flags = flags
        for f in flags:
            f.setflags(write=False)

    # -- construction helpers -------------------------------------------

    def _lookup(self, k):
        if self._index[k] is None:
            self._index[k] = {tuple(r): i for i, r in enumerate(self._simplices[k].tolist())}
        return self._index[k]

    def _build_boundary(self, k):
        simp = self._simplices[k]
        faces = self._lookup(k - 1)
        rows, cols, vals = [], [], []
        for j, row in enumerate(simp.tolist()):
            for i in range(k + 1):
                face = tuple(row[:i] + row[i + 1 :])
                rows.append(faces[face])
                cols.append(j)
                vals.append(1 if i % 2 == 0 else -1)
        shape = (len(self._simplices[k - 1]), len(simp))
        return sp.csr_matrix(
            (np.array(vals, dtype=np.int64), (rows, cols)), shape=shape, dtype=np.int64
        )

    def _check_distinct_top(self):
        top = self._simplices[self.n]
        _, first, counts = np.unique(top, axis=0, return_index=True, return_counts=True)
        if np.any(counts > 1):
            t = int(first[np.argmax(counts > 1)])
            raise InvariantViolation(f"top simplex {t} appears more than once", (self.n, t))

    def _check_manifold(self):
        bd = self._boundary[self.n]
        counts = np.asarray(abs(bd).sum(axis=1)).ravel()
        bad = np.flatnonzero((counts < 1) | (counts > 2))
        if len(bad):
            f = int(bad[0])
            cof = bd.getrow(f).indices.tolist()
            raise InvariantViolation(
                f"non-manifold: face {self._simplices[self.n - 1][f].tolist()} "
                f"has {int(counts[f])} cofaces (top simplices {cof})",
                (self.n, cof[-1] if cof else None),
            )

    def _check_vertices_used(self):
        used = np.zeros(len(self.vertices), dtype=bool)
        used[self._simplices[self.n].ravel()] = True
        if not used.all():
            v = int(np.flatnonzero(~used)[0])
            raise InvariantViolation(f"vertex {v} belongs to no simplex", (0, v))

    def _check_orientation(self):
        # Propagate an orientation from top simplex 0 across interior faces,
        # then compare with the given one. The smaller disagreeing set is
        # reported as flipped.
        n = self.n
        bd = self._boundary[n].tocsr()
        F = bd.shape[1]
        given = self.orientation
        prop = np.zeros(F, dtype=np.int64)
        bdc = bd.tocsc()
        ntop = bd.shape[1]
        for start in range(ntop):
            if prop[start]:
                continue
            prop[start] = given[start]
            stack = [start]
            while stack:
                t = stack.pop()
                for p in range(bdc.indptr[t], bdc.indptr[t + 1]):
                    f = bdc.indices[p]
                    s_tf = bdc.data[p]
                    cof = bd.indices[bd.indptr[f] : bd.indptr[f + 1]]
                    sv = bd.data[bd.indptr[f] : bd.indptr[f + 1]]
                    for u, s_uf in zip(cof, sv):
                        if u == t:
                            continue
                        want = -prop[t] * s_tf * s_uf
                        if prop[u] == 0:
                            prop[u] = want
                            stack.append(u)
                        elif prop[u] != want:
                            raise InvariantViolation(
                                f"complex is not orientable (conflict at top simplex {int(u)})",
                                (n, int(u)),
                            )
        mismatch = np.flatnonzero(prop != given)
        if len(mismatch) == 0:
            return
        agree = np.flatnonzero(prop == given)
        culprits = mismatch if len(mismatch) <= len(agree) else agree
        t = int(culprits[0])
        raise InvariantViolation(
            f"inconsistent orientation: top simplex {t} "
            f"{self.oriented_top[t].tolist()} is flipped relative to its neighbours",
            (n, t),
        )

    def _check_boundary_closed(self):
        if self.n != 2:
            return
        bd = self._boundary[2]
        counts = np.asarray(abs(bd).sum(axis=1)).ravel()
        bedges = self._simplices[1][counts == 1]
        deg = np.bincount(bedges.ravel(), minlength=len(self.vertices))
        bad = np.flatnonzero((deg != 0) & (deg != 2))
        if len(bad):
            v = int(bad[0])
            raise InvariantViolation(
                f"boundary is not a closed curve at vertex {v} ({int(deg[v])} boundary edges)",
                (0, v),
            )

    def _check_connected(self):
        top = self._simplices[self.n]
        V = len(self.vertices)
        rows = np.repeat(top[:, 0], self.n)
        cols = top[:, 1:].ravel()
        adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(V, V))
        ncomp, labels = connected_components(adj, directed=False)
        if ncomp != 1:
            v = int(np.flatnonzero(labels != labels[0])[0])
            raise InvariantViolation(
                f"complex is not connected ({ncomp} components; vertex {v} is detached)", (0, v)
            )

    # -- combinatorics --------------------------------------------------

    def simplices(self, k):
        """Sorted vertex lists of the k-simplices, shape ``(N_k, k + 1)``."""
        return self._simplices[k]

    def count(self, k):
        if k < 0 or k > self.n:
            return 0
        return len(self._simplices[k])

    @property
    def counts(self):
        return tuple(self.count(k) for k in range(self.n + 1))

    def index_of(self, k, vertex_tuple):
        return self._lookup(k)[tuple(sorted(vertex_tuple))]

    def boundary(self, k):
        """Signed incidence ``∂_k`` mapping k-chains to (k-1)-chains (integer CSR)."""
        if k < 1 or k > self.n:
            raise IndexError(f"boundary operator defined for 1 <= k <= {self.n}")
        return self._boundary[k]

    def is_boundary(self, k):
        """Boolean mask of k-simplices lying in the boundary subcomplex."""
        if k < 0 or k > self.n:
            return np.zeros(0, dtype=bool)
        return self._boundary_flags[k]

    def boundary_indices(self, k):
        return np.flatnonzero(self.is_boundary(k))

    def interior_indices(self, k):
        return np.flatnonzero(~self.is_boundary(k))

    def deep_interior(self, k):
        """Mask of k-simplices whose every top-dimensional coface avoids the boundary.

        Forms supported on these simplices have mass products and coboundaries
        that never reach a boundary simplex, which is the discrete stand-in for
        compact support away from the boundary.
        """
        n = self.n
        touches = np.zeros(self.count(n), dtype=bool)
        bverts = self.is_boundary(0)
        touches |= bverts[self._simplices[n]].any(axis=1)
        if k == n:
            return ~touches
        inc = self.incidence(k, n)
        bad = np.asarray(inc @ touches.astype(np.int64)).ravel() > 0
        return ~bad

    def incidence(self, k, j):
        """Unsigned 0/1 matrix, rows k-simplices, columns j-simplices containing them (k <= j)."""
        if k == j:
            return sp.identity(self.count(k), dtype=np.int64, format="csr")
        m = abs(self._boundary[k + 1])
        for i in range(k + 2, j + 1):
            m = m @ abs(self._boundary[i])
        m = m.tocsr()
        m.data[:] = 1
        return m

    def top_coface(self, k):
        """For each boundary (n-1)-simplex, the unique top simplex containing it (-1 elsewhere)."""
        bd = self._boundary[self.n].tocsr()
        out = np.full(self.count(self.n - 1), -1, dtype=np.int64)
        for f in self.boundary_indices(self.n - 1):
            out[f] = bd.indices[bd.indptr[f]]
        return out

    def euler_characteristic(self):
        return sum((-1) ** k * self.count(k) for k in range(self.n + 1))

    # -- geometry -------------------------------------------------------

    def volumes(self, k):
        """Unsigned k-volumes (1 for vertices)."""
        simp = self._simplices[k]
        if k == 0:
            return np.ones(len(simp))
        p = self.vertices[simp]
        e = p[:, 1:, :] - p[:, :1, :]
        gram = np.einsum("fid,fjd->fij", e, e)
        det = np.linalg.det(gram)
        return np.sqrt(np.clip(det, 0.0, None)) / math.factorial(k)

    def check_nondegenerate(self, k=None, rtol=1e-12):
        ks = range(1, self.n + 1) if k is None else [k]
        for j in ks:
            vol = self.volumes(j)
            scale = max(vol.max(), 1e-300)
            bad = np.flatnonzero(vol <= rtol * scale)
            if len(bad):
                s = int(bad[0])
                raise DegenerateSimplexError(
                    f"{j}-simplex {s} {self._simplices[j][s].tolist()} has zero volume", (j, s)
                )

    def total_volume(self):
        return float(self.volumes(self.n).sum())

    def mesh_size(self):
        return float(self.volumes(1).max())

    def centroids(self, k):
        return self.vertices[self._simplices[k]].mean(axis=1)

    # -- io -------------------------------------------------------------

    def to_dict(self):
        return {
            "format": MESH_FORMAT,
            "dimension": self.n,
            "vertices": self.vertices.tolist(),
            "simplices": self.oriented_top.tolist(),
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    def __repr__(self):
        name = self.meta.get("family", "complex")
        return f"SimplicialComplex({name}, n={self.n}, counts={self.counts})"


# -- generators ------------------------------------------------------------


@dataclass(frozen=True)
class MeshGeneratorSpec:
    """Parameters of a built-in test geometry.

    ``size`` holds the family's lengths or radii:

    ``interval``: ``(L,)``; ``rectangle``: ``(Lx, Ly)``; ``disk``: ``(R,)``;
    ``annulus``: ``(r_inner, r_outer)``; ``cylinder-strip``: ``(L, R)``.
    """

    family: str
    size: tuple = ()
    resolution: int = 4
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.family not in FAMILIES:
            raise InvalidSpecError(f"unknown mesh family {self.family!r}; expected one of {FAMILIES}")
        if not isinstance(self.resolution, (int, np.integer)) or self.resolution < 1:
            raise InvalidSpecError(f"resolution must be an integer >= 1, got {self.resolution!r}")
        size = tuple(float(s) for s in self.size)
        need = {"interval": 1, "rectangle": 2, "disk": 1, "annulus": 2, "cylinder-strip": 2}[self.family]
        if len(size) != need:
            raise InvalidSpecError(f"{self.family} needs {need} size parameter(s), got {len(size)}")
        if any(not np.isfinite(s) or s <= 0 for s in size):
            raise InvalidSpecError(f"sizes must be positive, got {size}")
        if self.family == "annulus" and not size[0] < size[1]:
            raise InvalidSpecError(f"annulus inner radius {size[0]} must be below outer radius {size[1]}")
        return size


DEFAULT_SIZES = {
    "interval": (math.pi,),
    "rectangle": (1.0, 1.0),
    "disk": (1.0,),
    "annulus": (1.0, 2.0),
    "cylinder-strip": (1.0, 1.0),
}


def _ccw(vertices, tris):
    p = vertices[tris]
    cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (
        p[:, 2, 0] - p[:, 0, 0]
    )
    tris = tris.copy()
    flip = cross < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def _zipper(inner, outer, inner_ang, outer_ang):
    """Triangulate the band between two closed rings of vertex ids sorted by angle."""
    tris = []
    m, n = len(inner), len(outer)
    i = j = 0
    two_pi = 2 * math.pi
    ia = np.append(inner_ang, inner_ang[0] + two_pi)
    oa = np.append(outer_ang, outer_ang[0] + two_pi)
    while i < m or j < n:
        if j < n and (i >= m or oa[j + 1] <= ia[i + 1]):
            tris.append((inner[i % m], outer[j % n], outer[(j + 1) % n]))
            j += 1
        else:
            tris.append((inner[i % m], outer[j % n], inner[(i + 1) % m]))
            i += 1
    return tris


def _interval(L, nseg):
    x = np.linspace(0.0, L, nseg + 1)[:, None]
    segs = np.stack([np.arange(nseg), np.arange(1, nseg + 1)], axis=1)
    return x, segs


def _rectangle(Lx, Ly, nx, ny):
    xs = np.linspace(0.0, Lx, nx + 1)
    ys = np.linspace(0.0, Ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)
    vid = lambda i, j: i * (ny + 1) + j
    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris += [(a, b, c), (a, c, d)]
    return verts, _ccw(verts, np.array(tris))


def _disk(R, rings):
    verts = [(0.0, 0.0)]
    ring_ids = [[0]]
    ring_ang = [np.array([0.0])]
    for i in range(1, rings + 1):
        cnt = 6 * i
        ang = 2 * math.pi * np.arange(cnt) / cnt
        ids = list(range(len(verts), len(verts) + cnt))
        r = R * i / rings
        verts += [(r * math.cos(a), r * math.sin(a)) for a in ang]
        ring_ids.append(ids)
        ring_ang.append(ang)
    verts = np.array(verts)
    tris = [(0, ring_ids[1][j], ring_ids[1][(j + 1) % 6]) for j in range(6)]
    for i in range(2, rings + 1):
        tris += _zipper(ring_ids[i - 1], ring_ids[i], ring_ang[i - 1], ring_ang[i])
    return verts, _ccw(verts, np.array(tris))


def _annulus(r0, r1, layers, around):
    verts = []
    ring_ids = []
    ang = 2 * math.pi * np.arange(around) / around
    for i in range(layers + 1):
        r = r0 + (r1 - r0) * i / layers
        shift = (math.pi / around) * (i % 2)
        ids = list(range(len(verts), len(verts) + around))
        verts += [(r * math.cos(a + shift), r * math.sin(a + shift)) for a in ang]
        ring_ids.append(ids)
    verts = np.array(verts)
    tris = []
    for i in range(1, layers + 1):
        a_in = ang + (math.pi / around) * ((i - 1) % 2)
        a_out = ang + (math.pi / around) * (i % 2)
        tris += _zipper(ring_ids[i - 1], ring_ids[i], a_in, a_out)
    return verts, _ccw(verts, np.array(tris))


def _cylinder(L, R, nx, around):
    verts = []
    for i in range(nx + 1):
        x = L * i / nx
        for j in range(around):
            t = 2 * math.pi * j / around
            verts.append((x, R * math.cos(t), R * math.sin(t)))
    verts = np.array(verts)
    vid = lambda i, j: i * around + (j % around)
    tris = []
    for i in range(nx):
        for j in range(around):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris += [(a, b, c), (a, c, d)]
    return verts, np.array(tris)


def generate(spec: MeshGeneratorSpec) -> SimplicialComplex:
    """Build one of the built-in geometries.

    Resolution controls the number of subdivisions: segments of the interval,
    cells per side of the rectangle, rings of the disk, radial layers of the
    annulus (with ``6 * resolution`` vertices per ring) and axial cells of the
    cylinder strip.
    """
    size = spec.validate()
    r = int(spec.resolution)
    fam = spec.family
    meta = {"family": fam, "size": list(size), "resolution": r}
    if fam == "interval":
        v, s = _interval(size[0], r)
    elif fam == "rectangle":
        v, s = _rectangle(size[0], size[1], r, int(spec.extra.get("ny", r)))
    elif fam == "disk":
        v, s = _disk(size[0], r)
    elif fam == "annulus":
        around = int(spec.extra.get("around", max(6, 6 * r)))
        meta["around"] = around
        v, s = _annulus(size[0], size[1], r, around)
    else:
        around = int(spec.extra.get("around", max(6, 6 * r)))
        meta["around"] = around
        v, s = _cylinder(size[0], size[1], r, around)
    return SimplicialComplex(v, s, meta=meta)


def generate_family(family, resolution=4, size=None, **extra):
    size = DEFAULT_SIZES[family] if size is None else tuple(size)
    return generate(MeshGeneratorSpec(family, size, resolution, extra))


# -- refinement ------------------------------------------------------------


def _project(c, verts, new_ids, is_bdry_new):
    fam = c.meta.get("family")
    size = c.meta.get("size")
    if fam == "disk":
        R = size[0]
        for v in new_ids[is_bdry_new]:
            verts[v] *= R / np.linalg.norm(verts[v])
    elif fam == "annulus":
        r0, r1 = size
        for v in new_ids[is_bdry_new]:
            rad = np.linalg.norm(verts[v])
            target = r0 if abs(rad - r0) < abs(rad - r1) else r1
            verts[v] *= target / rad
    elif fam == "cylinder-strip":
        R = size[1]
        for v in new_ids:
            verts[v, 1:] *= R / np.linalg.norm(verts[v, 1:])


def refine(c: SimplicialComplex) -> SimplicialComplex:
    """Uniform subdivision: edge bisection in 1-D, four-way split in 2-D.

    Curved boundaries of generated disks and annuli (and the whole surface of
    a cylinder strip) are respected by projecting new vertices back onto them.
    """
    edges = c.simplices(1)
    V = len(c.vertices)
    mids = 0.5 * (c.vertices[edges[:, 0]] + c.vertices[edges[:, 1]])
    verts = np.concatenate([c.vertices, mids])
    new_ids = V + np.arange(len(edges))
    _project(c, verts, new_ids, c.is_boundary(1))
    lookup = c._lookup(1)
    mid = lambda a, b: V + lookup[(a, b) if a < b else (b, a)]
    out = []
    if c.n == 1:
        for a, b in c.oriented_top.tolist():
            m = mid(a, b)
            out += [(a, m), (m, b)]
    else:
        for a, b, cc in c.oriented_top.tolist():
            ab, bc, ca = mid(a, b), mid(b, cc), mid(cc, a)
            out += [(a, ab, ca), (ab, b, bc), (ca, bc, cc), (ab, bc, ca)]
    out = np.array(out)
    if c.n == 1:
        verts, out = _renumber_chain(verts, out)
    meta = dict(c.meta)
    meta["refinements"] = meta.get("refinements", 0) + 1
    return SimplicialComplex(verts, out, meta=meta)


def _renumber_chain(verts, segs):
    # keep 1-D vertex ids in path order so that refined intervals read left to right
    nxt = {int(a): int(b) for a, b in segs}
    heads = set(nxt) - set(nxt.values())
    v = min(heads) if heads else int(segs[0, 0])
    order = [v]
    while v in nxt and nxt[v] != order[0]:
        v = nxt[v]
        order.append(v)
    perm = np.empty(len(verts), dtype=np.int64)
    perm[order] = np.arange(len(order))
    return verts[order], perm[segs]


def refine_times(c, times):
    for _ in range(int(times)):
        c = refine(c)
    return c


# -- loading ---------------------------------------------------------------


def _read_document(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MeshParseError(f"cannot read mesh file {path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise MeshParseError(f"malformed JSON in {path}: {exc}") from exc
    import yaml

    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise MeshParseError(f"malformed mesh document {path}: {exc}") from exc


def from_dict(doc) -> SimplicialComplex:
    if not isinstance(doc, dict):
        raise MeshParseError("mesh document must be a mapping")
    if doc.get("format") != MESH_FORMAT:
        raise MeshParseError(f"unsupported mesh format {doc.get('format')!r}, expected {MESH_FORMAT!r}")
    for key in ("dimension", "vertices", "simplices"):
        if key not in doc:
            raise MeshParseError(f"mesh document lacks field {key!r}")
    dim = doc["dimension"]
    if dim not in (1, 2):
        raise MeshParseError(f"dimension must be 1 or 2, got {dim!r}")
    try:
        verts = np.array(doc["vertices"], dtype=float)
        simp = np.array(doc["simplices"], dtype=np.int64)
    except (TypeError, ValueError) as exc:
        raise MeshParseError(f"vertices/simplices are not rectangular numeric arrays: {exc}") from exc
    if verts.ndim == 1:
        verts = verts[:, None]
    if verts.ndim != 2 or len(verts) == 0:
        raise MeshParseError("vertices must be a non-empty list of coordinate lists")
    if simp.ndim != 2 or simp.shape[1] != dim + 1:
        raise MeshParseError(f"each simplex must list {dim + 1} vertex indices")
    bad = np.flatnonzero((simp < 0).any(axis=1) | (simp >= len(verts)).any(axis=1))
    if len(bad):
        raise MeshParseError(
            f"simplex {int(bad[0])} {simp[bad[0]].tolist()} references a missing vertex "
            f"(only {len(verts)} vertices)"
        )
    c = SimplicialComplex(verts, simp, meta={"family": "file"})
    flags = doc.get("boundary")
    if flags is not None:
        listed = set(int(v) for v in flags)
        derived = set(c.boundary_indices(0).tolist()) if c.n == 2 else set(c.boundary_indices(0).tolist())
        if listed != derived:
            raise InvariantViolation(
                f"boundary vertices listed in file {sorted(listed)} disagree with "
                f"those derived from incidence {sorted(derived)}"
            )
    return c


def load(path) -> SimplicialComplex:
    """Read a mesh file (JSON or YAML) and validate it."""
    return from_dict(_read_document(path))
