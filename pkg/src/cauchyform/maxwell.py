"""Gauge potentials, Lorenz gauge fixing and the presymplectic form.

A gauge potential is a spacetime k-form field (see ``fields``) together with a
Maxwell boundary condition. ``maxwell_tangential`` potentials live in the
relative complex (``tA = 0``); ``maxwell_normal`` potentials are brought into
the normal complex (``nA = 0``, ``ndA = 0``) by a boundary gauge step, after
which every operator is the mass adjoint inside that complex.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import (
    BOX_NORMAL,
    BOX_TANGENTIAL,
    MAXWELL_NORMAL,
    MAXWELL_TANGENTIAL,
    as_bc,
    traces,
)
from .dec import derham
from .errors import BoundaryConditionError, DegreeError, PreconditionError
from .fields import (
    DerivedField,
    Field,
    GreenField,
    Layout,
    Profile,
    SeparableField,
    ZeroField,
    calculus,
    causal_green,
    green_space,
    lorentz_pairing,
    panel_nodes,
    smoothstep_profile,
    st_d,
    st_delta,
    st_delta_d,
)
from .propagator import ADVANCED, RETARDED, SpacetimeForm

ONSHELL_TOL = 1e-5

_KIND = {MAXWELL_TANGENTIAL: "relative", MAXWELL_NORMAL: "normal"}
_BOX = {MAXWELL_TANGENTIAL: BOX_TANGENTIAL, MAXWELL_NORMAL: BOX_NORMAL}


def _maxwell_bc(bc):
    bc = as_bc(bc)
    if bc.tag not in _KIND:
        raise BoundaryConditionError(
            f"gauge potentials need maxwell_tangential or maxwell_normal, got {bc.tag}"
        )
    return bc


@dataclass
class GaugePotential:
    """Spacetime k-form potential with a declared Maxwell condition.

    ``lorenz_window`` is a time interval outside which ``delta A`` vanishes;
    gauge fixing needs it to keep its Green sources compact.
    """

    field: Field
    bc: object
    lorenz_window: tuple | None = None

    def __post_init__(self):
        self.bc = _maxwell_bc(self.bc)
        c = self.field.layout.c
        if not 0 < self.k <= c.n:
            raise DegreeError(f"gauge potentials need 0 < k <= {c.n}, got {self.k}")

    @property
    def k(self):
        return self.field.layout.k

    @property
    def complex(self):
        return self.field.layout.c

    @property
    def kind(self):
        return _KIND[self.bc.tag]

    def __add__(self, other):
        return GaugePotential(self.field + other.field, self.bc, _hull(self.lorenz_window, other.lorenz_window))

    def plus_gauge(self, chi: "GaugeTransformation"):
        return GaugePotential(
            self.field + st_d(chi.field, calculus(self.complex, "absolute")),
            self.bc,
            self.lorenz_window,
        )


@dataclass
class GaugeTransformation:
    """A spacetime (k-1)-form ``chi``; ``compatible`` records ``t chi = 0`` where required."""

    field: Field
    bc: object
    compatible: bool = True


def _hull(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return (min(a[0], b[0]), max(a[1], b[1]))


class SampledField(Field):
    """Cubic-spline interpolant of a sampled block form (for grid input)."""

    def __init__(self, form: SpacetimeForm):
        from scipy.interpolate import CubicSpline

        if form.grid.steps < 3:
            raise PreconditionError(f"time grid too coarse for second differences: {form.grid.steps} samples")
        self.layout = Layout(form.complex, form.k)
        if form.values.shape[1] != self.layout.size:
            raise DegreeError("sampled values do not match the block layout")
        self.spline = CubicSpline(form.grid.samples, form.values, axis=0)
        # quadrature panels split at the knots, where the third derivative jumps
        self.breaks = tuple(form.grid.samples.tolist())

    def jet(self, t, order=0):
        t = np.atleast_1d(np.asarray(t, float))
        return np.stack([self.spline(t, nu=r) if r <= 3 else np.zeros((len(t), self.layout.size)) for r in range(order + 1)])


def potential_from_samples(form: SpacetimeForm, bc, lorenz_window=None) -> GaugePotential:
    return GaugePotential(SampledField(form), bc, lorenz_window)


# -- residuals -------------------------------------------------------------------------


@dataclass
class OnShellReport:
    maxwell: float
    boundary: dict
    lorenz: float
    wave: float
    scale: float
    absolute: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "maxwell": self.maxwell,
            "boundary": dict(self.boundary),
            "lorenz": self.lorenz,
            "wave": self.wave,
            "scale": self.scale,
            "absolute": dict(self.absolute),
        }


def _sup_mass(values, M):
    if values.shape[-1] == 0:
        return 0.0
    q = ((values @ M) * values).sum(axis=1)
    return float(np.sqrt(max(q.max(initial=0.0), 0.0)))


def _sup_boundary(c, k, values, layout):
    """Sup over samples of boundary norms of ``T`` (tangential) per component."""
    tr = traces(c)
    out = 0.0
    for j in layout.degrees:
        T = tr.T(j)
        if T.shape[0] == 0:
            continue
        x = values[:, layout.slice(j)] @ T.T.toarray()
        out = max(out, float(np.sqrt(np.max(((x @ tr.boundary_mass(j)) * x).sum(axis=1)))))
    return out


def _sup_normal(c, values, layout):
    """Sup over samples of the normal-trace loads of every component."""
    tr = traces(c)
    out = 0.0
    for j in layout.degrees:
        B = tr.B_constraint(j)
        if B.shape[0] == 0:
            continue
        x = values[:, layout.slice(j)] @ B.T.toarray()
        out = max(out, float(np.abs(x).max(initial=0.0)))
    return out


def potential_scale(A: GaugePotential, taus):
    M = A.field.layout.mass()
    jets = A.field.jet(taus, 2)
    return max(_sup_mass(jets[r], M) for r in range(3))


def maxwell_residual(A: GaugePotential, taus) -> OnShellReport:
    """Maxwell, boundary, Lorenz and wave residuals sampled at ``taus``.

    Norms are sup-in-time mass norms; relative values divide by the sup of
    the mass norms of A and its first two time derivatives.
    """
    taus = np.atleast_1d(np.asarray(taus, float))
    c = A.complex
    calc = calculus(c, A.kind)
    lay = A.field.layout
    scale = potential_scale(A, taus)
    lay_m = Layout(c, A.k - 1)
    maxw = _sup_mass(st_delta_d(A.field, calc)(taus), lay.mass())
    lor = _sup_mass(st_delta(A.field, calc)(taus), lay_m.mass())
    box = st_d(st_delta(A.field, calc), calc) + st_delta_d(A.field, calc)
    wave = _sup_mass(box(taus), lay.mass())
    dA = st_d(A.field, calc)(taus)
    vals = A.field(taus)
    if A.bc.tag == MAXWELL_TANGENTIAL:
        bnd = {"tA": _sup_boundary(c, A.k, vals, lay)}
    else:
        bnd = {"nA": _sup_normal(c, vals, lay), "ndA": _sup_normal(c, dA, Layout(c, A.k + 1))}
    s = max(scale, 1e-300)
    return OnShellReport(
        maxwell=maxw / s,
        boundary={key: v / s for key, v in bnd.items()},
        lorenz=lor / s,
        wave=wave / s,
        scale=scale,
        absolute={"maxwell": maxw, "lorenz": lor, "wave": wave, **bnd},
    )


# -- gauge fixing --------------------------------------------------------------------------


def _split_profiles(window, split):
    tau0, tau1 = split if split is not None else window
    if not tau1 > tau0:
        raise PreconditionError(f"temporal split needs tau0 < tau1, got {(tau0, tau1)}")
    eta = smoothstep_profile(tau0, tau1)
    return eta, 1.0 - eta, (min(window[0], tau0), max(window[1], tau1))


def _check_window(A: GaugePotential, calc, probe=6):
    if A.lorenz_window is None:
        raise PreconditionError("gauge fixing needs the potential's lorenz_window (support of delta A)")
    lo, hi = A.lorenz_window
    span = max(hi - lo, 1.0)
    outside = np.concatenate([lo - span * np.linspace(0.05, 1.0, probe), hi + span * np.linspace(0.05, 1.0, probe)])
    inside = np.linspace(lo, hi, 2 * probe)
    lay = Layout(A.complex, A.k - 1)
    out = _sup_mass(st_delta(A.field, calc)(outside), lay.mass())
    ref = max(_sup_mass(st_delta(A.field, calc)(inside), lay.mass()), potential_scale(A, inside))
    if out > 1e-8 * max(ref, 1e-300):
        raise PreconditionError(f"delta A does not vanish outside lorenz_window {A.lorenz_window}: {out:.3e}")


def _green_fix(A_field: Field, bc, kind, window, split):
    """``chi = -(G+ delta A+ + G- delta A-)`` in the given complex."""
    c = A_field.layout.c
    k = A_field.layout.k
    calc = calculus(c, kind)
    eta, eta_m, support = _split_profiles(window, split)
    space = green_space(c, k - 1, _BOX[bc.tag])
    src_p = st_delta(A_field.times(eta), calc)
    src_m = st_delta(A_field.times(eta_m), calc)
    gp = GreenField(space, RETARDED, src_p, support)
    gm = GreenField(space, ADVANCED, src_m, support)
    return -(gp + gm)


def lorenz_fix_tangential(A: GaugePotential, split=None):
    """Return ``(A', chi)`` with ``A' = A + d chi``, ``t chi = 0`` and ``delta A' = 0``."""
    if A.bc.tag != MAXWELL_TANGENTIAL:
        raise BoundaryConditionError(f"lorenz_fix_tangential needs maxwell_tangential, got {A.bc.tag}")
    c = A.complex
    probe = np.linspace(*(A.lorenz_window or (0.0, 1.0)), 7)
    tA = _sup_boundary(c, A.k, A.field(probe), A.field.layout)
    if tA > 1e-10 * max(potential_scale(A, probe), 1e-300):
        raise PreconditionError(f"potential violates tA = 0 (sup {tA:.3e})")
    calc = calculus(c, "relative")
    _check_window(A, calc)
    chi = _green_fix(A.field, A.bc, "relative", A.lorenz_window, split)
    Ap = GaugePotential(A.field + st_d(chi, calc), A.bc, A.lorenz_window)
    return Ap, GaugeTransformation(chi, A.bc, True)


def trace_correction(A: GaugePotential) -> Field:
    """Minimum-norm ``chi0`` with ``n(A + d chi0) = 0`` at every time.

    Solves ``B_k d chi0_1 = -B_k A_1`` and then
    ``B_{k-1} d chi0_0 = B_{k-1}(A_0 + chi0_1')`` by least squares.
    """
    c, k = A.complex, A.k
    tr = traces(c)
    D = derham(c)
    lin, lout = A.field.layout, Layout(c, k - 1)

    def lsq(j):
        if j < 1 or j > c.n:
            return None
        B = tr.B_constraint(j).toarray()
        if B.shape[0] == 0:
            return None
        return np.linalg.pinv(B @ D.d(j - 1).toarray()) @ B

    Rk, Rkm = lsq(k), lsq(k - 1)

    def rule(f, order, T):
        # f holds the jets of A up to order + 1
        out = np.zeros((order + 1, T, lout.size))
        s1, s0 = lin.slice(k), lin.slice(k - 1)
        o1, o0 = lout.slice(k - 1), lout.slice(k - 2)
        if Rk is not None and o1 is not None:
            for r in range(order + 1):
                out[r, :, o1] = -f[r][:, s1] @ Rk.T
        if Rkm is not None and o0 is not None:
            for r in range(order + 1):
                a0 = f[r][:, s0]
                a1p = f[r + 1][:, s1] @ Rk.T if Rk is not None else 0.0
                out[r, :, o0] = (a0 - a1p) @ Rkm.T
        return out

    return _OrderShift(A.field, lout, rule)


class _OrderShift(DerivedField):
    pass


def lorenz_fix_normal(A: GaugePotential, split=None):
    """Return ``(A', chi)``: boundary step to ``nA~ = 0``, then Green step in the normal complex."""
    if A.bc.tag != MAXWELL_NORMAL:
        raise BoundaryConditionError(f"lorenz_fix_normal needs maxwell_normal, got {A.bc.tag}")
    c = A.complex
    chi0 = trace_correction(A)
    At = A.field + st_d(chi0, calculus(c, "absolute"))
    At_pot = GaugePotential(At, A.bc, A.lorenz_window)
    calc = calculus(c, "normal")
    _check_window(At_pot, calc)
    chi1 = _green_fix(At, A.bc, "normal", A.lorenz_window, split)
    Ap = GaugePotential(At + st_d(chi1, calc), A.bc, A.lorenz_window)
    return Ap, GaugeTransformation(chi0 + chi1, A.bc, True)


def lorenz_fix(A: GaugePotential, split=None):
    if A.bc.tag == MAXWELL_TANGENTIAL:
        return lorenz_fix_tangential(A, split)
    return lorenz_fix_normal(A, split)


# -- presymplectic form ---------------------------------------------------------------------


def _corrected(A: GaugePotential) -> Field:
    if A.bc.tag == MAXWELL_NORMAL:
        return A.field + st_d(trace_correction(A), calculus(A.complex, "absolute"))
    return A.field


def sigma(A1: GaugePotential, A2: GaugePotential, split=(0.0, 1.0), check=True):
    """``<< delta d (eta A1), A2 >>`` with ``eta`` a C^1 step over ``split``.

    Both potentials must be on-shell; for ``maxwell_normal`` they are first
    trace-corrected into the normal complex.
    """
    if A1.bc.tag != A2.bc.tag:
        raise BoundaryConditionError(f"sigma needs equal conditions, got {A1.bc.tag} and {A2.bc.tag}")
    if A1.field.layout != A2.field.layout:
        raise DegreeError("sigma needs potentials of the same degree on the same complex")
    tau0, tau1 = split
    calc = calculus(A1.complex, A1.kind)
    F1, F2 = _corrected(A1), _corrected(A2)
    if check:
        probe = np.linspace(tau0, tau1, 9)
        for name, F in (("first", F1), ("second", F2)):
            rep = maxwell_residual(GaugePotential(F, A1.bc), probe)
            if rep.maxwell > ONSHELL_TOL:
                raise PreconditionError(f"{name} potential is off-shell (relative residual {rep.maxwell:.3e})")
    eta = smoothstep_profile(tau0, tau1)
    src = st_delta_d(F1.times(eta), calc)
    return lorentz_pairing(src, F2, tau0, tau1)


# -- generators and the causal pairing -----------------------------------------------------


def coclosed_potential(c, k, bc, profile: Profile, vector) -> GaugePotential:
    """``A = G alpha`` for ``alpha = profile(tau) * (0, vector)`` with the Maxwell condition's box propagator."""
    bc = _maxwell_bc(bc)
    space = green_space(c, k, _BOX[bc.tag])
    alpha = source_field(c, k, profile, vector)
    lo, hi = profile.support
    return GaugePotential(causal_green(space, alpha, (lo, hi)), bc, None)


def source_field(c, k, profile: Profile, vector) -> SeparableField:
    """The spacetime k-form ``profile(tau) * vector`` with no ``dtau`` component."""
    lay = Layout(c, k)
    full = np.zeros(lay.size)
    full[lay.slice(k)] = np.asarray(vector, float)
    return SeparableField(lay, [(profile, full)])


def pure_gauge(c, k, bc, profile: Profile, vector) -> GaugePotential:
    """``A = d chi`` for ``chi = profile(tau) * vector`` (a spatial (k-1)-cochain)."""
    bc = _maxwell_bc(bc)
    lay = Layout(c, k - 1)
    full = np.zeros(lay.size)
    full[lay.slice(k - 1)] = np.asarray(vector, float)
    chi = SeparableField(lay, [(profile, full)])
    return GaugePotential(st_d(chi, calculus(c, "absolute")), bc, profile.support)


def pairing_gtilde(c, k, bc, alpha, beta, check=True):
    """``(alpha, G beta)`` for separable sources ``(profile, vector)`` given as pairs.

    Closed form per mode, so no time grid is involved.
    """
    bc = _maxwell_bc(bc)
    space = green_space(c, k, _BOX[bc.tag])
    if check:
        for name, src in (("alpha", alpha), ("beta", beta)):
            err = source_coclosed_defect(c, k, bc, src)
            if err > 1e-9:
                raise PreconditionError(f"{name} is not coclosed (relative defect {err:.3e})")
    return float(modal_pairing(space, [alpha], [beta])[0, 0])


def source_coclosed_defect(c, k, bc, src):
    """Relative spacetime ``|delta alpha|`` of a separable source, sampled on its support."""
    lay = Layout(c, k)
    terms = _terms(src, lay)
    field = SeparableField(lay, terms)
    lo = min(p.support[0] for p, _ in terms)
    hi = max(p.support[1] for p, _ in terms)
    taus = np.linspace(lo, hi, 33)
    calc = calculus(c, _KIND[_maxwell_bc(bc).tag])
    d = st_delta(field, calc)(taus)
    num = _sup_mass(d, Layout(c, k - 1).mass())
    den = max(_sup_mass(field.jet(taus, 1)[0], lay.mass()), _sup_mass(field.jet(taus, 1)[1], lay.mass()), 1e-300)
    return num / den


def coclosed_defect(c, k, bc, v):
    """Relative ``|delta v|`` in the complex of the condition."""
    calc = calculus(c, _KIND[_maxwell_bc(bc).tag])
    v = np.asarray(v, float)
    dv = calc.delta(k) @ v
    D = derham(c)
    nv = np.sqrt(max(v @ (D.mass(k) @ v), 1e-300))
    return float(np.sqrt(max(dv @ (D.mass(k - 1) @ dv), 0.0)) / nv)


def _profile_moments(profiles, w):
    """Rows: per profile ``S, C`` (sin/cos moments), ``A = int a``, ``m = int t a``."""
    S = np.zeros((len(profiles), len(w)))
    C = np.zeros_like(S)
    A = np.zeros(len(profiles))
    m = np.zeros(len(profiles))
    wmax = float(w.max(initial=0.0))
    for i, p in enumerate(profiles):
        lo, hi = p.support
        nodes, weights = panel_nodes(lo, hi, list(p.breaks), wmax)
        a = p(nodes) * weights
        S[i] = np.sin(np.outer(w, nodes)) @ a
        C[i] = np.cos(np.outer(w, nodes)) @ a
        A[i] = a.sum()
        m[i] = (nodes * a).sum()
    return S, C, A, m


def _terms(item, lay):
    """Normalize a source to a list of ``(profile, full block vector)`` terms."""
    terms = getattr(item, "terms", None)
    if terms is not None:
        return [(p, np.asarray(v, float)) for p, v in terms]
    p, v = item
    v = np.asarray(v, float)
    if v.shape == (lay.size,):
        return [(p, v)]
    full = np.zeros(lay.size)
    full[lay.slice(lay.k)] = v
    return [(p, full)]


def modal_pairing(space, left, right, modes=None):
    """Matrix of ``<<alpha_i, G beta_j>>`` for separable sources, in closed form per mode.

    Sources are ``(profile, vector)`` pairs (a spatial k-vector or a full
    block vector) or objects with a ``terms`` list. ``modes`` optionally
    restricts the propagator to a subset of modes.
    """
    lay = space.layout
    GL = lay.lorentz_mass()

    def expand(items):
        profs, vecs, owner = [], [], []
        for i, it in enumerate(items):
            for p, v in _terms(it, lay):
                profs.append(p)
                vecs.append(v)
                owner.append(i)
        V = np.array(vecs).reshape(len(vecs), lay.size)
        agg = np.zeros((len(items), len(vecs)))
        agg[owner, np.arange(len(vecs))] = 1.0
        return profs, V, agg

    pl, Vl, Al = expand(left)
    pr, Vr, Ar = expand(right)
    X = (Vl @ GL) @ space.W
    Y = space.modal(Vr)
    w, zero = space.ws, space.zero
    if modes is not None:
        X, Y, w, zero = X[:, modes], Y[:, modes], w[modes], zero[modes]
    Sa, Ca, Aa, ma = _profile_moments(pl, w)
    Sb, Cb, Ab, mb = _profile_moments(pr, w)
    nz = ~zero
    Wn = ((X * Sa)[:, nz] / w[nz]) @ (Y * Cb)[:, nz].T - ((X * Ca)[:, nz] / w[nz]) @ (Y * Sb)[:, nz].T
    Xz, Yz = X[:, zero], Y[:, zero]
    Wz = (Xz * ma[:, None]) @ (Yz * Ab[:, None]).T - (Xz * Aa[:, None]) @ (Yz * mb[:, None]).T
    return Al @ (Wn + Wz) @ Ar.T


def interior_coclosed_basis(c, k):
    """Orthonormal basis of interior k-cochains ``v`` with ``d^T M v = 0``.

    Supports are restricted to trace-free simplices whose mass neighbours are
    also trace-free, so ``M v`` lies in every boundary subcomplex and ``v`` is
    coclosed for the absolute, relative and normal codifferentials alike.
    """
    import scipy.linalg as la

    from .boundary import trace_free

    D = derham(c)
    S = trace_free(c, k)
    M = D.mass(k).tocsc()
    keep = []
    for j in np.flatnonzero(S):
        rows = M.indices[M.indptr[j] : M.indptr[j + 1]]
        if S[rows].all():
            keep.append(j)
    keep = np.asarray(keep, int)
    if len(keep) == 0:
        return np.zeros((c.count(k), 0))
    if k == 0:
        N = np.eye(len(keep))
    else:
        G = (D.d(k - 1).T @ D.mass(k)).toarray()[:, keep]
        N = la.null_space(G)
    out = np.zeros((c.count(k), N.shape[1]))
    out[keep] = N
    return out
