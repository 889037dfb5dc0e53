"""Discrete de Rham complex on a simplicial slice with Whitney mass matrices.

The exterior derivative is the coboundary (transpose of the signed
incidence), the inner products are the Galerkin mass matrices of the lowest
order Whitney forms, and the codifferential is the mass adjoint of ``d``.
Assembled operators are cached per complex, since complexes are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import DegreeError
from .mesh import SimplicialComplex

GAUSS3_T = np.array([0.5 - np.sqrt(0.15), 0.5, 0.5 + np.sqrt(0.15)])
GAUSS3_W = np.array([5.0, 8.0, 5.0]) / 18.0


@dataclass
class DiscreteForm:
    """A k-cochain on ``complex``; ``values[i]`` is the integral over k-simplex i."""

    complex: SimplicialComplex
    degree: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not 0 <= self.degree <= self.complex.n:
            raise DegreeError(f"degree {self.degree} outside 0..{self.complex.n}")
        if self.values.shape != (self.complex.count(self.degree),):
            raise DegreeError(
                f"a {self.degree}-form needs {self.complex.count(self.degree)} values, "
                f"got shape {self.values.shape}"
            )

    def _same(self, other):
        if other.complex is not self.complex or other.degree != self.degree:
            raise DegreeError("forms live on different complexes or degrees")

    def __add__(self, other):
        self._same(other)
        return DiscreteForm(self.complex, self.degree, self.values + other.values)

    def __sub__(self, other):
        self._same(other)
        return DiscreteForm(self.complex, self.degree, self.values - other.values)

    def __mul__(self, a):
        return DiscreteForm(self.complex, self.degree, a * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def inner(self, other):
        self._same(other)
        return float(self.values @ (mass_matrix(self.complex, self.degree).matrix @ other.values))

    def norm(self):
        return float(np.sqrt(max(self.inner(self), 0.0)))


@dataclass(frozen=True)
class OperatorMatrix:
    """Linear map from ``domain``-forms to ``codomain``-forms.

    ``matrix`` is a scipy sparse matrix for combinatorial operators and a
    dense array for operators involving an inverse mass matrix.
    """

    matrix: object
    domain: int
    codomain: int
    symmetric: bool = False

    @property
    def shape(self):
        return self.matrix.shape

    def dense(self):
        m = self.matrix
        return m.toarray() if sp.issparse(m) else np.asarray(m)

    def __matmul__(self, x):
        if isinstance(x, DiscreteForm):
            if x.degree != self.domain:
                raise DegreeError(f"operator acts on {self.domain}-forms, got a {x.degree}-form")
            return DiscreteForm(x.complex, self.codomain, self.matrix @ x.values)
        return self.matrix @ x

    def save_coo(self, path):
        save_coo(self.matrix, path)


@dataclass(frozen=True)
class MassMatrix:
    matrix: sp.csr_matrix
    degree: int

    @property
    def shape(self):
        return self.matrix.shape

    def dense(self):
        return self.matrix.toarray()

    def save_coo(self, path):
        save_coo(self.matrix, path)


def save_coo(matrix, path):
    """Write ``rows cols nnz`` followed by one ``i j value`` line per stored entry."""
    m = sp.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    lines = [f"{m.shape[0]} {m.shape[1]} {m.nnz}"]
    lines += [f"{m.row[i]} {m.col[i]} {m.data[i]:.17g}" for i in order]
    Path(path).write_text("\n".join(lines) + "\n")


def load_coo(path):
    rows = Path(path).read_text().split("\n")
    nr, nc, nnz = (int(x) for x in rows[0].split())
    data = np.loadtxt(rows[1 : 1 + nnz], ndmin=2) if nnz else np.zeros((0, 3))
    return sp.csr_matrix(
        (data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(nr, nc)
    )


# -- geometry kernels ---------------------------------------------------------


def barycentric_gradients(c: SimplicialComplex):
    """Gradients of the barycentric coordinates on each top simplex, shape (F, n+1, d).

    Row i is the gradient of the hat function of the i-th sorted vertex,
    expressed in ambient coordinates and tangent to the simplex.
    """
    p = c.vertices[c.simplices(c.n)]
    e = p[:, 1:, :] - p[:, :1, :]
    gram = np.einsum("fid,fjd->fij", e, e)
    g = np.linalg.solve(gram, e)
    g0 = -g.sum(axis=1, keepdims=True)
    return np.concatenate([g0, g], axis=1)


def _whitney_edge_mass(c):
    tris = c.simplices(2)
    area = c.volumes(2)
    grads = barycentric_gradients(c)
    D = np.einsum("fid,fjd->fij", grads, grads)
    I = (np.ones((3, 3)) + np.eye(3))[None] * (area / 12.0)[:, None, None]
    local = [(0, 1), (0, 2), (1, 2)]
    m = np.zeros((len(tris), 3, 3))
    for r, (a, b) in enumerate(local):
        for s, (cc, dd) in enumerate(local):
            m[:, r, s] = (
                I[:, a, cc] * D[:, b, dd]
                - I[:, a, dd] * D[:, b, cc]
                - I[:, b, cc] * D[:, a, dd]
                + I[:, b, dd] * D[:, a, cc]
            )
    eid = np.stack([[c.index_of(1, (t[a], t[b])) for (a, b) in local] for t in tris.tolist()])
    return m, eid


def _assemble(local, ids, size):
    F, q, _ = local.shape
    rows = np.repeat(ids, q, axis=1).ravel()
    cols = np.tile(ids, (1, q)).ravel()
    m = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(size, size)).tocsr()
    m.sum_duplicates()
    return m


# -- cached operator bundle ---------------------------------------------------


class DeRham:
    """Cached ``d``, mass and codifferential matrices for one complex."""

    def __init__(self, c: SimplicialComplex):
        self.c = c
        self.n = c.n
        self._d = {}
        self._m = {}
        self._mf = {}
        self._minv = {}
        self._delta = {}

    def _check(self, k, lo=0, hi=None):
        hi = self.n if hi is None else hi
        if not lo <= k <= hi:
            raise DegreeError(f"degree {k} outside {lo}..{hi} on a {self.n}-dimensional complex")

    def d(self, k):
        """Coboundary ``d_k`` as an integer CSR matrix (zero-row matrix for k = n)."""
        self._check(k)
        if k not in self._d:
            if k == self.n:
                self._d[k] = sp.csr_matrix((0, self.c.count(k)), dtype=np.int64)
            else:
                self._d[k] = self.c.boundary(k + 1).T.tocsr()
        return self._d[k]

    def mass(self, k):
        self._check(k)
        if k not in self._m:
            c = self.c
            if k > 0:
                c.check_nondegenerate(k)
            c.check_nondegenerate(c.n)
            if k == 0:
                top = c.simplices(c.n)
                q = c.n + 1
                vol = c.volumes(c.n)
                local = (np.ones((q, q)) + np.eye(q))[None] * (vol / (q * (q + 1)))[:, None, None]
                m = _assemble(local, top, c.count(0))
            elif k == c.n:
                m = sp.diags(1.0 / c.volumes(k)).tocsr()
            else:
                local, eid = _whitney_edge_mass(c)
                m = _assemble(local, eid, c.count(1))
            m = 0.5 * (m + m.T)
            self._m[k] = m.tocsr()
        return self._m[k]

    def mass_factor(self, k):
        if k not in self._mf:
            self._mf[k] = la.cho_factor(self.mass(k).toarray())
        return self._mf[k]

    def solve_mass(self, k, rhs):
        return la.cho_solve(self.mass_factor(k), rhs)

    def mass_inverse(self, k):
        if k not in self._minv:
            self._minv[k] = self.solve_mass(k, np.eye(self.c.count(k)))
        return self._minv[k]

    def delta(self, k):
        """Mass-adjoint codifferential ``M_{k-1}^{-1} d_{k-1}^T M_k`` (dense)."""
        self._check(k, 1)
        if k not in self._delta:
            rhs = (self.d(k - 1).T @ self.mass(k)).toarray()
            self._delta[k] = self.solve_mass(k - 1, rhs)
        return self._delta[k]

    def laplacian(self, k):
        self._check(k)
        L = np.zeros((self.c.count(k),) * 2)
        if k > 0:
            L += self.d(k - 1) @ self.delta(k)
        if k < self.n:
            L += self.delta(k + 1) @ self.d(k)
        return L

    def stiffness(self, k):
        """``M_k L_k`` written symmetrically: ``d^T M d + M d M^{-1} d^T M``."""
        self._check(k)
        A = np.zeros((self.c.count(k),) * 2)
        if k < self.n:
            A += (self.d(k).T @ self.mass(k + 1) @ self.d(k)).toarray()
        if k > 0:
            Md = (self.mass(k) @ self.d(k - 1)).toarray()
            A += Md @ self.solve_mass(k - 1, Md.T)
        return 0.5 * (A + A.T)


def derham(c: SimplicialComplex) -> DeRham:
    cached = getattr(c, "_derham", None)
    if cached is None:
        cached = DeRham(c)
        c._derham = cached
    return cached


# -- public operations --------------------------------------------------------


def exterior_derivative(c: SimplicialComplex, k: int) -> OperatorMatrix:
    if not 0 <= k < c.n:
        raise DegreeError(f"d_k needs 0 <= k < {c.n}, got {k}")
    return OperatorMatrix(derham(c).d(k), k, k + 1)


def mass_matrix(c: SimplicialComplex, k: int) -> MassMatrix:
    return MassMatrix(derham(c).mass(k), k)


def codifferential(c: SimplicialComplex, k: int) -> OperatorMatrix:
    if not 1 <= k <= c.n:
        raise DegreeError(f"codifferential needs 1 <= k <= {c.n}, got {k}")
    return OperatorMatrix(derham(c).delta(k), k, k - 1)


def hodge_laplacian(c: SimplicialComplex, k: int) -> OperatorMatrix:
    return OperatorMatrix(derham(c).laplacian(k), k, k)


def interpolate(c: SimplicialComplex, k: int, sampler) -> DiscreteForm:
    """De Rham map of a smooth form given by ``sampler``.

    ``sampler`` takes an ``(N, d)`` array of points and returns values for
    a 0-form, covector components ``(N, d)`` for a 1-form, and the density
    with respect to the oriented area for a 2-form.
    """
    if not 0 <= k <= c.n:
        raise DegreeError(f"degree {k} outside 0..{c.n}")
    x = c.vertices
    if k == 0:
        vals = np.asarray(sampler(x), dtype=float).reshape(len(x))
    elif k == 1:
        e = c.simplices(1)
        a, b = x[e[:, 0]], x[e[:, 1]]
        vec = b - a
        vals = np.zeros(len(e))
        for t, w in zip(GAUSS3_T, GAUSS3_W):
            cov = np.asarray(sampler(a + t * vec), dtype=float).reshape(len(e), -1)
            vals += w * np.einsum("ed,ed->e", cov, vec)
    else:
        dens = np.asarray(sampler(c.centroids(2)), dtype=float).reshape(-1)
        vals = dens * c.volumes(2) * c.orientation
    return DiscreteForm(c, k, vals)


def whitney_values(c: SimplicialComplex, omega, tri, bary):
    """Evaluate the Whitney 1-form with edge coefficients ``omega`` on triangles.

    ``tri`` lists top-simplex ids and ``bary`` the matching barycentric
    coordinates (rows sum to one, columns in sorted vertex order). Returns
    ambient vectors, shape ``(len(tri), d)``.
    """
    grads = barycentric_gradients(c)[tri]
    verts = c.simplices(2)[tri]
    out = np.zeros((len(tri), c.vertices.shape[1]))
    for a, b in ((0, 1), (0, 2), (1, 2)):
        ids = np.array([c.index_of(1, (v[a], v[b])) for v in verts.tolist()], dtype=np.int64)
        coef = omega[ids][:, None]
        out += coef * (bary[:, a, None] * grads[:, b] - bary[:, b, None] * grads[:, a])
    return out
