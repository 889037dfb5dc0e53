"""Finite-rank observable algebras: generators, pairing matrices and their radical.

Observables are spacetime-coclosed k-forms supported away from the boundary,
each a short sum of ``profile(tau) * vector`` terms. The algebra is fixed by
the antisymmetric matrix ``W_ij = (alpha_i, G alpha_j)`` of causal pairings.

Generators come in two kinds:

* ``exact``: ``b'(tau) * v`` with ``v`` an interior coclosed cochain. This is
  the spacetime codifferential of ``b(tau) dtau ^ v``, so these generate the
  algebra of exact observables.
* ``detector``: ``a(tau) * v_h`` with ``int a != 0`` and ``v_h`` the
  interior coclosed cochain closest to a harmonic field ``h``. Detectors are
  test functionals for the harmonic classes and enter the radical only as
  extra rows, together with the pairings against the static harmonic
  solutions ``h`` and ``tau h``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .dec import derham
from .errors import PreconditionError
from .fields import Layout, Profile, SeparableField, green_space, lorentz_pairing, poly_bump, st_d, calculus
from .maxwell import (
    _BOX,
    _KIND,
    _maxwell_bc,
    _terms,
    GaugePotential,
    interior_coclosed_basis,
    modal_pairing,
    source_coclosed_defect,
    _corrected,
    _profile_moments,
)

RANK_TOL = 1e-8
GAP = 10.0
DEFAULT_MODES = 16


@dataclass
class ObservableGenerator:
    """``sum_r profile_r(tau) * vector_r`` with vectors in the block layout of degree k."""

    terms: list
    label: str
    kind: str = "exact"

    @property
    def support(self):
        return (min(p.support[0] for p, _ in self.terms), max(p.support[1] for p, _ in self.terms))

    def field(self, c, k):
        return SeparableField(Layout(c, k), self.terms)

    def scaled(self, a, label=None):
        return ObservableGenerator([(p, a * v) for p, v in self.terms], label or f"{a}*{self.label}", self.kind)


def spatial_generator(c, k, profile: Profile, vector, label, kind="exact"):
    lay = Layout(c, k)
    full = np.zeros(lay.size)
    full[lay.slice(k)] = np.asarray(vector, float)
    return ObservableGenerator([(profile, full)], label, kind)


def box_quotient_generator(c, k, bc, profile: Profile, vector, label="delta-d-eta"):
    """``delta d eta`` for ``eta = profile(tau) * vector``, a quotient-null observable."""
    calc = calculus(c, _KIND[_maxwell_bc(bc).tag])
    lay = Layout(c, k)
    v = np.zeros(lay.size)
    v[lay.slice(k)] = np.asarray(vector, float)
    D = derham(c)
    vk = np.asarray(vector, float)
    # delta d (b z) = (b delta d z + b'' z) + dtau ^ (-b' delta z)
    terms = [(profile.deriv().deriv(), v)]
    if k < c.n:
        w = np.zeros(lay.size)
        w[lay.slice(k)] = calc.delta(k + 1) @ (D.d(k) @ vk)
        terms.append((profile, w))
    if k >= 1 and lay.slice(k - 1) is not None:
        u = np.zeros(lay.size)
        u[lay.slice(k - 1)] = -(calc.delta(k) @ vk)
        terms.append((profile.deriv(), u))
    return ObservableGenerator(terms, label, "exact")


def harmonic_fields(c, k, bc):
    """Mass-orthonormal zero modes of degree k for the box operator of a Maxwell condition."""
    bc = _maxwell_bc(bc)
    space = green_space(c, k, _BOX[bc.tag])
    sel = space.zero & (space.decomp.degree_of == k)
    return space.W[space.layout.slice(k)][:, sel]


EXACT_PROFILES = (poly_bump(0.0, 0.5).deriv(), poly_bump(0.3, 0.7).deriv())
DETECTOR_PROFILE = poly_bump(0.0, 0.5)


def build_generators(c, k, bc, budget=None, seed=0, detect_tol=1e-6):
    """Exact generators (two profiles per interior coclosed vector) plus one detector per harmonic class.

    ``budget`` caps the total number of generators; ``None`` uses the whole
    interior coclosed basis.
    """
    bc = _maxwell_bc(bc)
    N = interior_coclosed_basis(c, k)
    H = harmonic_fields(c, k, bc)
    M = derham(c).mass(k)
    detectors = []
    for j in range(H.shape[1]):
        v = N @ (N.T @ (M @ H[:, j]))
        strength = abs(v @ (M @ H[:, j]))
        if strength > detect_tol * max(np.linalg.norm(v), 1e-300):
            detectors.append(spatial_generator(c, k, DETECTOR_PROFILE, v / np.linalg.norm(v), f"detector:{j}", "detector"))
    need = len(detectors) + len(EXACT_PROFILES)
    if budget is not None and budget < need:
        raise PreconditionError(f"generator budget {budget} too small: need at least {need}")
    if N.shape[1] == 0:
        raise PreconditionError("mesh has no interior coclosed cochains; refine it")
    rng = np.random.default_rng(seed)
    count = N.shape[1]
    if budget is not None:
        count = min(count, (budget - len(detectors)) // len(EXACT_PROFILES))
    Q, _ = np.linalg.qr(rng.standard_normal((N.shape[1], count)))
    vecs = N @ Q
    gens = []
    for i in range(count):
        for p_i, prof in enumerate(EXACT_PROFILES):
            gens.append(spatial_generator(c, k, prof, vecs[:, i], f"exact:{i}:{p_i}"))
    return gens + detectors


def generator_defects(c, k, bc, gens):
    """Coclosedness defect and boundary-adjacent mass of each generator."""
    from .boundary import trace_free

    lay = Layout(c, k)
    out = []
    for g in gens:
        off = 0.0
        for j in lay.degrees:
            mask = ~trace_free(c, j)
            for _, v in g.terms:
                off = max(off, float(np.abs(v[lay.slice(j)][mask]).max(initial=0.0)))
        out.append({"label": g.label, "delta": source_coclosed_defect(c, k, bc, g), "boundary": off})
    return out


@dataclass
class PairingMatrix:
    W: np.ndarray
    labels: list
    kinds: list
    bc: str
    modes: int | None
    candidates: np.ndarray = field(default=None, repr=False)
    candidate_labels: list = field(default_factory=list)

    @property
    def antisymmetry(self):
        nW = np.abs(self.W).max(initial=0.0)
        return float(np.abs(self.W + self.W.T).max(initial=0.0) / max(nW, 1e-300))

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("label," + ",".join(self.labels) + "\n")
            for lab, row in zip(self.labels, self.W):
                fh.write(lab + "," + ",".join(f"{x:.17g}" for x in row) + "\n")


def _mode_subset(space, k, modes):
    if modes is None:
        return None
    idx = np.flatnonzero(space.decomp.degree_of == k)
    return idx[: int(modes)]


def pairing_matrix(c, k, bc, gens, modes=DEFAULT_MODES) -> PairingMatrix:
    """Causal pairings among generators, restricted to the lowest ``modes`` degree-k modes.

    Detector rows and the pairings with the static harmonic solutions ``h``
    and ``tau h`` are stored as ``candidates``.
    """
    bc = _maxwell_bc(bc)
    space = green_space(c, k, _BOX[bc.tag])
    sel = _mode_subset(space, k, modes)
    W = modal_pairing(space, gens, gens, sel)
    H = harmonic_fields(c, k, bc)
    lay = Layout(c, k)
    M = lay.lorentz_mass()
    rows, labels = [], []
    for j in range(H.shape[1]):
        h = np.zeros(lay.size)
        h[lay.slice(k)] = H[:, j]
        flat, lin = [], []
        for g in gens:
            terms = g.terms
            _, _, A, m = _profile_moments([p for p, _ in terms], np.zeros(0))
            hv = np.array([v @ (M @ h) for _, v in terms])
            flat.append(float(A @ hv))
            lin.append(float(m @ hv))
        rows += [flat, lin]
        labels += [f"static:{j}", f"linear:{j}"]
    C = np.array(rows).reshape(len(rows), len(gens))
    return PairingMatrix(W, [g.label for g in gens], [g.kind for g in gens], bc.tag, modes, C, labels)


def _rank(s, thresh):
    r = int((s > thresh).sum())
    upper = s[r - 1] if r > 0 else np.inf
    lower = s[r] if r < len(s) else 0.0
    gap = upper / lower if lower > 0 else np.inf
    return r, float(gap)


@dataclass
class RadicalReport:
    rank: int
    rank_extended: int
    dimension: int
    basis: np.ndarray
    null_generators: list
    gap: float
    gap_extended: float
    threshold: float
    decided: bool
    betti: int | None = None
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "rank": self.rank,
            "rank_extended": self.rank_extended,
            "dimension": self.dimension,
            "null_generators": list(self.null_generators),
            "gap": self.gap,
            "gap_extended": self.gap_extended,
            "threshold": self.threshold,
            "decided": self.decided,
            "betti": self.betti,
            "warnings": list(self.warnings),
        }


def radical(P: PairingMatrix, tol=RANK_TOL, gap=GAP) -> RadicalReport:
    """Central directions among the algebra generators.

    With ``W`` the exact-generator block and ``C`` the candidate rows
    (detector pairings and static harmonic pairings), the radical is
    ``ker W`` modulo ``ker [W; C]``: directions pairing to zero with every
    generator yet detected by a candidate. Generators whose whole column is
    below threshold are quotient-null and are listed separately.
    """
    kinds = np.array(P.kinds)
    ex = np.flatnonzero(kinds != "detector")
    det = np.flatnonzero(kinds == "detector")
    W = P.W[np.ix_(ex, ex)]
    rows = [P.W[np.ix_(det, ex)]]
    if P.candidates is not None and P.candidates.size:
        rows.append(P.candidates[:, ex])
    C = np.vstack(rows) if rows else np.zeros((0, len(ex)))
    WC = np.vstack([W, C])
    s_w = la.svdvals(W) if W.size else np.zeros(0)
    s_wc = la.svdvals(WC) if WC.size else np.zeros(0)
    scale = max(s_wc.max(initial=0.0), s_w.max(initial=0.0))
    thresh = tol * scale
    r, g1 = _rank(s_w, thresh)
    r2, g2 = _rank(s_wc, thresh)
    col = np.abs(WC).max(axis=0) if WC.size else np.zeros(len(ex))
    null = [P.labels[ex[i]] for i in np.flatnonzero(col <= thresh)]
    warnings = []
    decided = True
    for name, gval in (("W", g1), ("[W; C]", g2)):
        if gval < gap:
            decided = False
            warnings.append(f"rank indecision for {name}: singular-value gap {gval:.3g} < {gap}")
    basis = np.zeros((len(P.labels), 0))
    if r2 > r:
        _, _, Vt = la.svd(W) if W.size else (None, None, np.eye(len(ex)))
        K = Vt[r:].T
        U, s, Vt2 = la.svd(C @ K, full_matrices=False)
        take = int((s > thresh).sum())
        B = K @ Vt2[:take].T
        basis = np.zeros((len(P.labels), B.shape[1]))
        basis[ex] = B
    return RadicalReport(r, r2, r2 - r, basis, null, g1, g2, float(thresh), decided, None, warnings)


def optimality_check(c, k, bc, gens, solutions, modes=None, tol=RANK_TOL, window_pad=0.0):
    """Separating and non-redundancy diagnostics of the generator family against solutions.

    ``solutions`` are on-shell gauge potentials. A solution pairing to zero
    with every generator must be gauge-trivial (``dA = 0`` and no harmonic
    detection); a generator pairing to zero with every solution in the
    spanning family (the images ``G alpha_j`` and the static harmonic
    solutions) must be quotient-null.
    """
    bc = _maxwell_bc(bc)
    lay = Layout(c, k)
    calc = calculus(c, _KIND[bc.tag])
    Sgen = np.zeros((len(gens), len(solutions)))
    for j, A in enumerate(solutions):
        F = _corrected(A)
        for i, g in enumerate(gens):
            lo, hi = g.support
            Sgen[i, j] = lorentz_pairing(g.field(c, k), F, lo - window_pad, hi + window_pad)
    scale = max(np.abs(Sgen).max(initial=0.0), 1e-300)
    report = {"separating": [], "redundant": [], "pairings": Sgen.tolist()}
    probe = np.linspace(-1.0, 2.0, 7)
    for j, A in enumerate(solutions):
        if np.abs(Sgen[:, j]).max(initial=0.0) <= tol * scale:
            dA = st_d(_corrected(A), calc)(probe)
            Mx = Layout(c, k + 1).mass()
            mag = float(np.sqrt(max(((dA @ Mx) * dA).sum(axis=1).max(initial=0.0), 0.0)))
            ref = float(np.sqrt(max(((A.field(probe) @ lay.mass()) * A.field(probe)).sum(axis=1).max(initial=0.0), 1e-300)))
            trivial = mag <= 1e-6 * max(ref, 1e-300)
            report["separating"].append({"solution": j, "gauge_trivial": trivial, "dA": mag})
    P = pairing_matrix(c, k, bc, gens, modes)
    full = np.vstack([P.W, P.candidates]) if P.candidates.size else P.W
    colscale = max(np.abs(full).max(initial=0.0), 1e-300)
    for i, g in enumerate(gens):
        if np.abs(Sgen[i]).max(initial=0.0) <= tol * scale:
            null = np.abs(full[:, i]).max(initial=0.0) <= tol * colscale
            report["redundant"].append({"generator": g.label, "quotient_null": bool(null)})
    rank = int(np.linalg.matrix_rank(Sgen, tol * scale)) if Sgen.size else 0
    report["solution_rank"] = rank
    report["violations"] = [x for x in report["separating"] if not x["gauge_trivial"]] + [
        x for x in report["redundant"] if not x["quotient_null"]
    ]
    return report


def commutator_check(P: PairingMatrix, pairs=None):
    """Degree-2 truncation of the CCR quotient: ``[a_i, a_j] = i W_ij`` from the relation itself.

    The product ``a_i a_j`` is represented modulo the ideal by its symmetric
    part plus ``i W_ij / 2``; the commutator therefore equals ``i W_ij`` and
    the returned maximum deviation is a pure arithmetic smoke test.
    """
    n = len(P.labels)
    pairs = pairs or [(i, j) for i in range(min(n, 8)) for j in range(min(n, 8))]
    dev = 0.0
    for i, j in pairs:
        prod_ij = 0.5j * P.W[i, j]
        prod_ji = 0.5j * P.W[j, i]
        dev = max(dev, abs((prod_ij - prod_ji) - 1j * P.W[i, j]))
    return dev
