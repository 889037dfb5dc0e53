"""Boundary traces, boundary conditions and constrained Laplacian blocks.

Forms on the boundary are stored as coefficient vectors over the boundary
simplices of the matching degree, in the order of
``SimplicialComplex.boundary_indices``.

Two local operators carry all boundary information:

* ``T_k`` selects the boundary k-simplices of a k-cochain (tangential trace).
* ``B_k`` maps a k-form to a load vector on boundary (k-1)-simplices. It is
  the bilinear pairing of tangential and normal traces,
  ``<t a, n b> = (T_{k-1} a) . (B_k b)``. The normal trace itself is
  ``M_bd^{-1} B_k b`` with ``M_bd`` the mass matrix of the boundary complex.

With these, the strong codifferential
``delta_s = M^{-1} (d^T M - T^T B)`` satisfies the discrete Green formula
``(d a, b) - (a, delta_s b) = <t a, n b>`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .dec import DiscreteForm, barycentric_gradients, derham
from .errors import BoundaryConditionError, DegreeError
from .mesh import SimplicialComplex

DIRICHLET = "dirichlet"
BOX_TANGENTIAL = "box_tangential"
BOX_NORMAL = "box_normal"
ROBIN_TANGENTIAL = "robin_tangential"
ROBIN_NORMAL = "robin_normal"
MAXWELL_TANGENTIAL = "maxwell_tangential"
MAXWELL_NORMAL = "maxwell_normal"

TAGS = (
    DIRICHLET,
    BOX_TANGENTIAL,
    BOX_NORMAL,
    ROBIN_TANGENTIAL,
    ROBIN_NORMAL,
    MAXWELL_TANGENTIAL,
    MAXWELL_NORMAL,
)

_ALIASES = {
    "d": DIRICHLET,
    "D": DIRICHLET,
    "parallel": BOX_TANGENTIAL,
    "tangential": BOX_TANGENTIAL,
    "relative": BOX_TANGENTIAL,
    "perp": BOX_NORMAL,
    "normal": BOX_NORMAL,
    "absolute": BOX_NORMAL,
    "f_parallel": ROBIN_TANGENTIAL,
    "f_perp": ROBIN_NORMAL,
}

# Lorenz-gauge wave operators for the Maxwell conditions use the box condition
# with the same trace.
_WAVE_TAG = {MAXWELL_TANGENTIAL: BOX_TANGENTIAL, MAXWELL_NORMAL: BOX_NORMAL}


@dataclass(frozen=True)
class BCKind:
    """Boundary condition tag plus Robin coefficient.

    ``f`` is a scalar or one value per boundary (n-1)-simplex, and must be
    given exactly for the two Robin tags.
    """

    tag: str
    f: object = None

    def __post_init__(self):
        tag = _ALIASES.get(self.tag, self.tag)
        if tag not in TAGS:
            raise BoundaryConditionError(f"unknown boundary condition {self.tag!r}; expected one of {TAGS}")
        object.__setattr__(self, "tag", tag)
        robin = tag in (ROBIN_TANGENTIAL, ROBIN_NORMAL)
        if robin and self.f is None:
            raise BoundaryConditionError(f"{tag} needs a boundary function f")
        if not robin and self.f is not None:
            raise BoundaryConditionError(f"{tag} takes no boundary function")
        if robin:
            f = np.atleast_1d(np.asarray(self.f, dtype=float))
            if not np.all(np.isfinite(f)):
                raise BoundaryConditionError("Robin coefficient must be finite")
            if tag == ROBIN_TANGENTIAL and np.any(f < 0):
                raise BoundaryConditionError(
                    f"robin_tangential requires f >= 0 everywhere (min f = {f.min():g})"
                )
            if tag == ROBIN_NORMAL and np.any(f > 0):
                raise BoundaryConditionError(
                    f"robin_normal requires f <= 0 everywhere (max f = {f.max():g})"
                )

    @property
    def wave_tag(self):
        return _WAVE_TAG.get(self.tag, self.tag)

    def f_values(self, c: SimplicialComplex):
        nb = len(c.boundary_indices(c.n - 1))
        f = np.atleast_1d(np.asarray(self.f, dtype=float))
        if f.size == 1:
            return np.full(nb, float(f[0]))
        if f.size != nb:
            raise BoundaryConditionError(
                f"Robin coefficient has {f.size} values, boundary has {nb} (n-1)-simplices"
            )
        return f

    def to_dict(self):
        out = {"kind": self.tag}
        if self.f is not None:
            f = np.atleast_1d(np.asarray(self.f, dtype=float))
            out["f"] = float(f[0]) if f.size == 1 else f.tolist()
        return out


def as_bc(bc) -> BCKind:
    if isinstance(bc, BCKind):
        return bc
    if isinstance(bc, str):
        return BCKind(bc)
    if isinstance(bc, dict):
        return BCKind(bc.get("kind"), bc.get("f"))
    raise BoundaryConditionError(f"cannot interpret {bc!r} as a boundary condition")


@dataclass
class BoundaryForm:
    """A j-cochain on the boundary complex, indexed like ``boundary_indices(j)``."""

    complex: SimplicialComplex
    degree: int
    values: np.ndarray

    @property
    def simplices(self):
        return self.complex.boundary_indices(self.degree)


# -- trace operators -----------------------------------------------------------


def boundary_corners(c: SimplicialComplex, angle=np.pi / 3):
    """Boundary vertices (2-D) where the boundary turns by more than ``angle``."""
    if c.n != 2:
        return set()
    edges = c.simplices(1)[c.boundary_indices(1)]
    nbrs = {}
    for a, b in edges.tolist():
        nbrs.setdefault(a, []).append(b)
        nbrs.setdefault(b, []).append(a)
    out = set()
    for v, (a, b) in ((v, nb) for v, nb in nbrs.items() if len(nb) == 2):
        u = c.vertices[v] - c.vertices[a]
        w = c.vertices[b] - c.vertices[v]
        cos = u @ w / (np.linalg.norm(u) * np.linalg.norm(w))
        if np.arccos(np.clip(cos, -1, 1)) > angle:
            out.add(v)
    return out


class TraceOperators:
    """Tangential selections, normal-trace loads and boundary masses for one complex."""

    def __init__(self, c: SimplicialComplex):
        self.c = c
        self.n = c.n
        self._T, self._B, self._Mb, self._Mbf = {}, {}, {}, {}

    def T(self, k):
        """0/1 selection of boundary k-simplices (empty for k < 0 or k >= n)."""
        if k not in self._T:
            c = self.c
            nk = c.count(k)
            if k < 0 or k >= self.n:
                m = sp.csr_matrix((0, nk))
            else:
                idx = c.boundary_indices(k)
                m = sp.csr_matrix((np.ones(len(idx)), (np.arange(len(idx)), idx)), shape=(len(idx), nk))
            self._T[k] = m
        return self._T[k]

    def nb(self, j):
        return 0 if j < 0 or j >= self.n else len(self.c.boundary_indices(j))

    def B(self, k):
        """Normal-trace load: rows boundary (k-1)-simplices, columns k-simplices."""
        if k not in self._B:
            c = self.c
            if k <= 0 or k > self.n:
                m = sp.csr_matrix((self.nb(k - 1), c.count(k) if 0 <= k <= self.n else 0))
            elif k == self.n and self.n == 1:
                m = self._B_interval()
            elif k == self.n:
                m = self._B_top()
            else:
                m = self._B_edges()
            self._B[k] = m.tocsr()
        return self._B[k]

    def _B_top(self):
        c = self.c
        bidx = c.boundary_indices(c.n - 1)
        cof = c.top_coface(c.n - 1)
        bd = c.boundary(c.n).tocsr()
        vol = c.volumes(c.n)
        rows, cols, vals = [], [], []
        for r, f in enumerate(bidx):
            t = cof[f]
            rows.append(r)
            cols.append(t)
            vals.append(bd[f, t] / vol[t])
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(bidx), c.count(c.n)))

    def _B_interval(self):
        # Normal component of a 1-form at an endpoint, extrapolated linearly
        # from the densities of the two nearest edges.
        c = self.c
        bd = c.boundary(1).tocsr()
        h = c.volumes(1)
        edges = c.simplices(1)
        bidx = c.boundary_indices(0)
        rows, cols, vals = [], [], []
        for r, v in enumerate(bidx):
            e0 = bd.indices[bd.indptr[v]]
            s0 = bd[v, e0]
            m = int(edges[e0][0] if edges[e0][1] == v else edges[e0][1])
            nxt = [e for e in bd.indices[bd.indptr[m] : bd.indptr[m + 1]] if e != e0]
            if not nxt:
                rows.append(r), cols.append(e0), vals.append(s0 / h[e0])
                continue
            e1 = nxt[0]
            s1 = bd[m, e1]
            d0 = h[e0] / 2
            d1 = h[e0] + h[e1] / 2
            w = d0 / (d1 - d0)
            rows += [r, r]
            cols += [e0, e1]
            vals += [(1 + w) * s0 / h[e0], -w * s1 / h[e1]]
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(bidx), c.count(1)))

    def _B_edges(self):
        # 2-D, k = 1: b_v = integral over boundary edges of phi_v (nu . omega).
        c = self.c
        grads = barycentric_gradients(c)
        tris = c.simplices(2)
        verts = c.vertices
        bidx = c.boundary_indices(1)
        bvert = c.boundary_indices(0)
        vpos = {int(v): i for i, v in enumerate(bvert)}
        cof = c.top_coface(1)
        edges = c.simplices(1)
        gt = np.array([0.5 - 0.5 / np.sqrt(3), 0.5 + 0.5 / np.sqrt(3)])
        gw = np.array([0.5, 0.5])
        rows, cols, vals = [], [], []
        for e in bidx:
            t = cof[e]
            tv = tris[t].tolist()
            p, q = edges[e].tolist()
            ip, iq = tv.index(p), tv.index(q)
            io = 3 - ip - iq
            vec = verts[q] - verts[p]
            length = np.linalg.norm(vec)
            inward = verts[tv[io]] - verts[p]
            nu = -(inward - vec * (inward @ vec) / (vec @ vec))
            nu /= np.linalg.norm(nu)
            g = grads[t]
            for a, b in ((0, 1), (0, 2), (1, 2)):
                fid = c.index_of(1, (tv[a], tv[b]))
                for vtx, lv in ((p, ip), (q, iq)):
                    acc = 0.0
                    for s, w in zip(gt, gw):
                        lam = np.zeros(3)
                        lam[ip], lam[iq] = 1 - s, s
                        wf = lam[a] * g[b] - lam[b] * g[a]
                        acc += w * lam[lv] * (nu @ wf)
                    rows.append(vpos[vtx])
                    cols.append(fid)
                    vals.append(acc * length)
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(bvert), c.count(1)))

    def boundary_mass(self, j, weights=None):
        """Mass matrix of boundary j-forms, optionally weighted per boundary (n-1)-simplex."""
        key = (j, None if weights is None else tuple(np.round(weights, 15)))
        cache = self._Mb if weights is None else self._Mbf
        if key in cache:
            return cache[key]
        c = self.c
        nb = self.nb(j)
        if nb == 0:
            m = np.zeros((0, 0))
        elif self.n == 1:
            m = np.diag(np.ones(nb) if weights is None else np.asarray(weights, float))
        else:
            bedges = c.simplices(1)[c.boundary_indices(1)]
            lengths = np.linalg.norm(c.vertices[bedges[:, 1]] - c.vertices[bedges[:, 0]], axis=1)
            w = np.ones(len(bedges)) if weights is None else np.asarray(weights, float)
            if j == 1:
                m = np.diag(w / lengths)
            else:
                pos = {int(v): i for i, v in enumerate(c.boundary_indices(0))}
                m = np.zeros((nb, nb))
                for (a, b), L, wf in zip(bedges.tolist(), lengths, w):
                    ia, ib = pos[a], pos[b]
                    m[ia, ia] += wf * L / 3
                    m[ib, ib] += wf * L / 3
                    m[ia, ib] += wf * L / 6
                    m[ib, ia] += wf * L / 6
        cache[key] = m
        return m

    def B_constraint(self, k):
        """``B_k`` as an essential condition: rows at boundary corners removed.

        At a corner the outward normal jumps, and one averaged row there
        over-constrains the normal subcomplex (it leaves a spurious harmonic
        top form on the rectangle).
        """
        key = ("bc", k)
        if key not in self._B:
            B = self.B(k)
            if self.n == 2 and k == 1:
                corners = boundary_corners(self.c)
                keep = [i for i, v in enumerate(self.c.boundary_indices(0)) if int(v) not in corners]
                B = B[keep]
            self._B[key] = B
        return self._B[key]

    def normal_matrix(self, k):
        """Dense ``M_bd^{-1} B_k``: coefficients of the normal trace."""
        B = self.B(k).toarray()
        if B.shape[0] == 0:
            return B
        return np.linalg.solve(self.boundary_mass(k - 1), B)

    def delta_strong(self, k):
        """``M_{k-1}^{-1} (d^T M_k - T_{k-1}^T B_k)`` (dense)."""
        D = derham(self.c)
        if not 1 <= k <= self.n:
            raise DegreeError(f"codifferential needs 1 <= k <= {self.n}, got {k}")
        key = ("ds", k)
        if key not in self._B:
            rhs = (D.d(k - 1).T @ D.mass(k)).toarray() - (self.T(k - 1).T @ self.B(k)).toarray()
            self._B[key] = D.solve_mass(k - 1, rhs)
        return self._B[key]

    def laplacian_strong(self, k):
        D = derham(self.c)
        L = np.zeros((self.c.count(k),) * 2)
        if k > 0:
            L += D.d(k - 1) @ self.delta_strong(k)
        if k < self.n:
            L += self.delta_strong(k + 1) @ D.d(k)
        return L


def traces(c: SimplicialComplex) -> TraceOperators:
    cached = getattr(c, "_traces", None)
    if cached is None:
        cached = TraceOperators(c)
        c._traces = cached
    return cached


def trace_free(c: SimplicialComplex, j: int):
    """Mask of j-simplices whose cochains have zero t, n and nd traces.

    Forms supported on this set are the discrete analogue of forms with
    compact support in the interior.
    """
    tr = traces(c)
    mask = c.deep_interior(j).copy()
    mats = [tr.T(j), tr.B(j)]
    if j < c.n:
        mats.append(tr.B(j + 1) @ derham(c).d(j))
    for m in mats:
        m = sp.csc_matrix(m)
        if m.shape[0]:
            mask &= np.diff(m.indptr) == 0
    return mask


def tangential_trace(omega: DiscreteForm) -> BoundaryForm:
    c = omega.complex
    return BoundaryForm(c, omega.degree, traces(c).T(omega.degree) @ omega.values)


def normal_trace(omega: DiscreteForm) -> BoundaryForm:
    c = omega.complex
    if omega.degree < 1:
        raise DegreeError("normal trace needs a form of degree >= 1")
    return BoundaryForm(c, omega.degree - 1, traces(c).normal_matrix(omega.degree) @ omega.values)


def strong_codifferential(c: SimplicialComplex, k: int):
    return traces(c).delta_strong(k)


def boundary_pairing(c: SimplicialComplex, k: int, a, b):
    """``<t a, n b>`` for a (k-1)-form ``a`` and a k-form ``b`` (coefficient vectors)."""
    tr = traces(c)
    return float((tr.T(k - 1) @ a) @ (tr.B(k) @ b))


def green_defect(alpha: DiscreteForm, beta: DiscreteForm) -> float:
    """``(d alpha, beta) - (alpha, delta beta)`` with the boundary-aware codifferential.

    Equals the boundary pairing of the tangential trace of ``alpha`` with
    the normal trace of ``beta``.
    """
    if alpha.complex is not beta.complex:
        raise DegreeError("forms live on different complexes")
    k = alpha.degree
    if beta.degree != k + 1:
        raise DegreeError(f"green_defect pairs a k-form with a (k+1)-form, got {k} and {beta.degree}")
    c = alpha.complex
    D = derham(c)
    a, b = alpha.values, beta.values
    lhs = (D.d(k) @ a) @ (D.mass(k + 1) @ b)
    rhs = a @ (D.mass(k) @ (traces(c).delta_strong(k + 1) @ b))
    return float(lhs - rhs)


# -- constrained operators -------------------------------------------------------


@dataclass
class DegreeBlock:
    """One degree ``j`` of a constrained operator.

    ``P`` maps reduced coefficients to full j-cochains; ``A`` and ``M`` are
    the reduced stiffness and mass.
    """

    degree: int
    P: np.ndarray
    A: np.ndarray
    M: np.ndarray
    complex_kind: str  # subcomplex the block lives in


@dataclass
class ConstrainedOperator:
    """The block ``(-Laplacian_{k-1}) + (-Laplacian_k)`` with a boundary condition.

    ``A``, ``M`` and ``P`` are the block-diagonal assemblies of the
    per-degree blocks; full vectors are the concatenation of a (k-1)-cochain
    and a k-cochain (missing degrees contribute no entries).
    """

    complex: SimplicialComplex
    k: int
    bc: BCKind
    blocks: list
    A: np.ndarray = field(repr=False)
    M: np.ndarray = field(repr=False)
    P: np.ndarray = field(repr=False)

    @property
    def degrees(self):
        return tuple(b.degree for b in self.blocks)

    @property
    def size(self):
        return self.A.shape[0]

    def full_sizes(self):
        return [self.complex.count(b.degree) for b in self.blocks]

    def full_mass(self):
        D = derham(self.complex)
        return la.block_diag(*[D.mass(b.degree).toarray() for b in self.blocks]) if self.blocks else np.zeros((0, 0))

    def split_full(self, x):
        """Split a full vector into per-degree cochains, keyed by degree."""
        out, i = {}, 0
        for b, n in zip(self.blocks, self.full_sizes()):
            out[b.degree] = x[i : i + n]
            i += n
        return out

    def join_full(self, parts):
        return np.concatenate(
            [np.asarray(parts.get(b.degree, np.zeros(n)), float) for b, n in zip(self.blocks, self.full_sizes())]
        ) if self.blocks else np.zeros(0)

    def norm(self):
        return float(np.linalg.norm(self.A, 2)) if self.size else 0.0

    def generalized_eigenvalues(self):
        return la.eigh(self.A, self.M, eigvals_only=True)

    def positivity(self):
        lam = self.generalized_eigenvalues()
        nA = self.norm()
        lo = float(lam.min()) if len(lam) else 0.0
        return {"min_eigenvalue": lo, "norm": nA, "threshold": -1e-9 * nA, "ok": lo >= -1e-9 * nA}

    def symmetry_error(self):
        nA = max(self.norm(), 1e-300)
        return float(np.abs(self.A - self.A.T).max() / nA) if self.size else 0.0

    def form(self, coeffs):
        return ConstrainedForm(self, np.asarray(coeffs, float))

    def random_form(self, rng):
        return self.form(rng.standard_normal(self.size))


@dataclass
class ConstrainedForm:
    """Reduced coefficients of a block form satisfying the essential constraints of ``op``."""

    op: ConstrainedOperator
    coeffs: np.ndarray

    def full(self):
        return self.op.P @ self.coeffs


class Subcomplex:
    """A subcomplex of the cochain complex closed under ``d``.

    ``kind`` is ``"absolute"`` (all cochains), ``"relative"`` (cochains
    vanishing on boundary simplices, so ``t = 0``) or ``"normal"`` (cochains
    whose local normal and ``nd`` traces vanish). Degree j is spanned by the
    orthonormal columns of ``P(j)``; the codifferential is the mass adjoint
    of ``d`` inside the subcomplex, so the reduced Laplacians intertwine with
    ``d`` and ``delta`` exactly.
    """

    def __init__(self, c: SimplicialComplex, kind: str):
        if kind not in ("absolute", "relative", "normal"):
            raise BoundaryConditionError(f"unknown subcomplex kind {kind!r}")
        self.c, self.kind = c, kind
        self._P, self._d, self._M, self._A, self._delta = {}, {}, {}, {}, {}

    def P(self, j):
        if j not in self._P:
            c = self.c
            if j < 0 or j > c.n:
                p = np.zeros((0, 0))
            elif self.kind == "absolute":
                p = np.eye(c.count(j))
            elif self.kind == "relative":
                idx = c.interior_indices(j)
                p = np.zeros((c.count(j), len(idx)))
                p[idx, np.arange(len(idx))] = 1.0
            else:
                tr = traces(c)
                rows = [tr.B_constraint(j).toarray()]
                if j < c.n:
                    rows.append((tr.B_constraint(j + 1) @ derham(c).d(j)).toarray())
                S = np.vstack(rows)
                p = la.null_space(S) if S.shape[0] else np.eye(c.count(j))
            self._P[j] = p
        return self._P[j]

    def dim(self, j):
        return self.P(j).shape[1]

    def d(self, j):
        """Reduced ``d_j`` from degree-j to degree-(j+1) coordinates."""
        if j not in self._d:
            c = self.c
            if j < 0 or j >= c.n:
                self._d[j] = np.zeros((self.dim(j + 1) if 0 <= j + 1 <= c.n else 0, self.dim(j)))
            else:
                self._d[j] = self.P(j + 1).T @ (derham(c).d(j) @ self.P(j))
        return self._d[j]

    def mass(self, j):
        if j not in self._M:
            P = self.P(j)
            m = P.T @ (derham(self.c).mass(j) @ P)
            self._M[j] = 0.5 * (m + m.T)
        return self._M[j]

    def delta(self, j):
        """Reduced codifferential from degree j to degree j-1."""
        if j not in self._delta:
            self._delta[j] = la.solve(self.mass(j - 1), self.d(j - 1).T @ self.mass(j), assume_a="pos")
        return self._delta[j]

    def stiffness(self, j):
        if j not in self._A:
            A = np.zeros((self.dim(j),) * 2)
            if j < self.c.n:
                dj = self.d(j)
                A += dj.T @ self.mass(j + 1) @ dj
            if j > 0 and self.dim(j - 1):
                Md = self.mass(j) @ self.d(j - 1)
                A += Md @ la.solve(self.mass(j - 1), Md.T, assume_a="pos")
            self._A[j] = 0.5 * (A + A.T)
        return self._A[j]

    def laplacian(self, j):
        return la.solve(self.mass(j), self.stiffness(j), assume_a="pos")


def subcomplex(c: SimplicialComplex, kind: str) -> Subcomplex:
    cache = c.__dict__.setdefault("_subcomplexes", {})
    if kind not in cache:
        cache[kind] = Subcomplex(c, kind)
    return cache[kind]


SUBCOMPLEX_OF = {
    BOX_TANGENTIAL: "relative",
    ROBIN_TANGENTIAL: "relative",
    BOX_NORMAL: "normal",
    ROBIN_NORMAL: "absolute",
    DIRICHLET: "absolute",
}


def _degree_block(c, j, bc: BCKind):
    tr = traces(c)
    tag = bc.wave_tag
    kind = SUBCOMPLEX_OF.get(tag)
    if kind is None:
        raise BoundaryConditionError(f"no Laplacian block for {bc.tag}")
    sc = subcomplex(c, kind)
    if tag == DIRICHLET:
        S = subcomplex(c, "relative").P(j)
        Bj = tr.B(j).toarray() @ S
        Z = la.null_space(Bj) if Bj.shape[0] else np.eye(S.shape[1])
        P = S @ Z
        A = P.T @ derham(c).stiffness(j) @ P
        M = P.T @ (derham(c).mass(j) @ P)
    else:
        P = sc.P(j)
        A = sc.stiffness(j).copy()
        M = sc.mass(j)
        if tag == ROBIN_TANGENTIAL and j > 0:
            N = tr.normal_matrix(j) @ P
            A = A + N.T @ tr.boundary_mass(j - 1, bc.f_values(c)) @ N
        elif tag == ROBIN_NORMAL and j < c.n:
            T = tr.T(j).toarray() @ P
            A = A - T.T @ tr.boundary_mass(j, bc.f_values(c)) @ T
    A = 0.5 * (A + A.T)
    return DegreeBlock(j, P, A, 0.5 * (M + M.T), kind)


def build_constrained(c: SimplicialComplex, k: int, bc) -> ConstrainedOperator:
    """Assemble the constrained block operator on (k-1)-forms and k-forms.

    Degrees outside ``0..n`` are dropped, so ``k = 0`` gives the scalar
    block and ``k = n + 1`` the top-form block. Maxwell conditions build
    the matching box operator (tangential or normal).
    """
    bc = as_bc(bc)
    if not 0 <= k <= c.n + 1:
        raise DegreeError(f"block degree {k} outside 0..{c.n + 1}")
    blocks = [_degree_block(c, j, bc) for j in (k - 1, k) if 0 <= j <= c.n]
    A = la.block_diag(*[b.A for b in blocks])
    M = la.block_diag(*[b.M for b in blocks])
    P = la.block_diag(*[b.P for b in blocks])
    return ConstrainedOperator(c, k, bc, blocks, A, M, P)


def box_green_defect(alpha: ConstrainedForm, beta: ConstrainedForm) -> float:
    """``(S alpha, beta) - (alpha, S beta)`` in the mass inner product."""
    if alpha.op is not beta.op:
        a, b = alpha.op, beta.op
        if a.bc != b.bc:
            raise BoundaryConditionError(
                f"forms satisfy different boundary conditions ({a.bc.tag} vs {b.bc.tag})"
            )
        raise BoundaryConditionError("forms belong to different constrained operators")
    A = alpha.op.A
    return float(beta.coeffs @ (A @ alpha.coeffs) - alpha.coeffs @ (A @ beta.coeffs))


def box_green_relative(alpha: ConstrainedForm, beta: ConstrainedForm) -> float:
    scale = np.linalg.norm(alpha.coeffs) * np.linalg.norm(beta.coeffs) * alpha.op.norm()
    return abs(box_green_defect(alpha, beta)) / max(scale, 1e-300)


# -- boundary triple ---------------------------------------------------------------


def _gamma_terms(c, j, a, b):
    """Right-hand side of the boundary-triple identity for one degree j."""
    tr = traces(c)
    D = derham(c)
    val = 0.0
    if j >= 1:
        da = tr.delta_strong(j) @ a
        db = tr.delta_strong(j) @ b
        val += boundary_pairing(c, j, da, b) - boundary_pairing(c, j, db, a)
    if j < c.n:
        val += -boundary_pairing(c, j + 1, b, D.d(j) @ a) + boundary_pairing(c, j + 1, a, D.d(j) @ b)
    return val


def _lhs(c, j, a, b):
    D = derham(c)
    L = traces(c).laplacian_strong(j)
    M = D.mass(j)
    return float(b @ (M @ (L @ a)) - a @ (M @ (L @ b)))


def triple_sides(c, k, pair_a, pair_b):
    """Both sides of the boundary-triple identity for block pairs keyed by degree."""
    lhs = rhs = 0.0
    for j in (k - 1, k):
        if 0 <= j <= c.n:
            lhs += _lhs(c, j, pair_a[j], pair_b[j])
            rhs += _gamma_terms(c, j, pair_a[j], pair_b[j])
    return lhs, rhs


def _smooth_interval_fields():
    # (value, derivative, second derivative) for 0-forms; 1-forms g dx use the same triple for g
    u = (lambda x: np.sin(x) + 0.3 * x**2, lambda x: np.cos(x) + 0.6 * x, lambda x: -np.sin(x) + 0.6)
    v = (lambda x: np.exp(-0.5 * x) * np.cos(x),
         lambda x: np.exp(-0.5 * x) * (-0.5 * np.cos(x) - np.sin(x)),
         lambda x: np.exp(-0.5 * x) * (-0.75 * np.cos(x) + np.sin(x)))
    g = (lambda x: np.cos(2 * x) + x, lambda x: -2 * np.sin(2 * x) + 1, lambda x: -4 * np.cos(2 * x))
    h = (lambda x: 1.0 / (1.0 + x**2), lambda x: -2 * x / (1 + x**2) ** 2,
         lambda x: (6 * x**2 - 2) / (1 + x**2) ** 3)
    return {0: (u, v), 1: (g, h)}


def _smooth_discrepancy(c, k):
    from .dec import interpolate

    fields = _smooth_interval_fields()
    ends = c.vertices[c.boundary_indices(0), 0]
    left = ends.min()
    lhs = rhs = 0.0
    for j in (k - 1, k):
        if not 0 <= j <= 1:
            continue
        (f0, f1, _), (g0, g1, _) = fields[j]
        if j == 0:
            a = interpolate(c, 0, lambda x: f0(x[:, 0])).values
            b = interpolate(c, 0, lambda x: g0(x[:, 0])).values
        else:
            a = interpolate(c, 1, lambda x: f0(x[:, :1])).values
            b = interpolate(c, 1, lambda x: g0(x[:, :1])).values
        lhs += _lhs(c, j, a, b)
        for x in ends:
            nu = -1.0 if x == left else 1.0
            rhs += nu * (-f1(x) * g0(x) + f0(x) * g1(x))
    return abs(lhs - rhs)


def triple_identity_check(c: SimplicialComplex, k: int, samples: int = 10, seed: int = 0):
    """Compare both sides of the boundary-triple identity on random and smooth pairs.

    Random and interior-supported pairs use discrete traces on both sides
    and must agree to rounding. On an interval the smooth part compares the
    discrete left side with the exact boundary integrals of smooth fields,
    on ``c`` and on its refinement.
    """
    from .mesh import refine

    rng = np.random.default_rng(seed)
    degs = [j for j in (k - 1, k) if 0 <= j <= c.n]
    worst = worst_rel = 0.0
    worst_interior = 0.0
    worst_diag = 0.0
    D = derham(c)
    for _ in range(samples):
        a = {j: rng.standard_normal(c.count(j)) for j in degs}
        b = {j: rng.standard_normal(c.count(j)) for j in degs}
        lhs, rhs = triple_sides(c, k, a, b)
        scale = sum(
            np.sqrt(a[j] @ D.mass(j) @ a[j] * (b[j] @ D.mass(j) @ b[j])) * np.abs(traces(c).laplacian_strong(j)).max()
            for j in degs
        )
        worst = max(worst, abs(lhs - rhs))
        worst_rel = max(worst_rel, abs(lhs - rhs) / max(scale, 1e-300))
        ai = {j: a[j] * trace_free(c, j) for j in degs}
        bi = {j: b[j] * trace_free(c, j) for j in degs}
        l2, r2 = triple_sides(c, k, ai, bi)
        worst_interior = max(worst_interior, abs(l2), abs(r2))
        l3, r3 = triple_sides(c, k, a, a)
        worst_diag = max(worst_diag, abs(l3), abs(r3))
    report = {
        "k": k,
        "samples": samples,
        "max_discrepancy": worst,
        "max_relative_discrepancy": worst_rel,
        "interior_max": worst_interior,
        "diagonal_max": worst_diag,
    }
    if c.n == 1:
        e0 = _smooth_discrepancy(c, k)
        e1 = _smooth_discrepancy(refine(c), k)
        report.update(
            smooth_discrepancy=e0,
            smooth_discrepancy_refined=e1,
            decay_factor=e0 / e1 if e1 > 0 else float("inf"),
        )
    return report
