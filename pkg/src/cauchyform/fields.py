"""Time-dependent block forms evaluated exactly in time.

A spacetime k-form is carried as ``omega = omega_1 + dtau ^ omega_0`` with
``omega_1(tau)`` a spatial k-cochain and ``omega_0(tau)`` a spatial
(k-1)-cochain, both in full cochain coordinates. Fields are lazy: ``jet``
returns the value and the first few tau-derivatives at arbitrary times, so
wave and Maxwell operators need no time differencing. Scalar time profiles
are piecewise polynomials, and Green operators are applied mode by mode with
Gauss-Legendre quadrature split at every profile breakpoint.

Sign conventions, with ``d`` and ``delta`` the spatial operators of a chosen
subcomplex:

    (d omega)_1 = d omega_1            (d omega)_0 = omega_1' - d omega_0
    (delta omega)_1 = delta omega_1 + omega_0'
    (delta omega)_0 = -delta omega_0

so that ``d delta + delta d = d^2/dtau^2 + L`` on each component. The pairing
is ``<<x, y>> = int (x_1, y_1) - (x_0, y_0) dtau``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from numpy.polynomial import Polynomial

from .boundary import build_constrained, subcomplex
from .dec import derham
from .errors import DegreeError, PreconditionError
from .propagator import ADVANCED, CAUSAL, RETARDED, eigendecompose

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


# -- scalar profiles -----------------------------------------------------------------


class Profile:
    """Piecewise polynomial in tau.

    Piece ``i`` covers ``[breaks[i-1], breaks[i])`` (unbounded at the ends)
    and is stored in the local variable ``x = tau - origin[i]`` to keep
    coefficients well scaled.
    """

    def __init__(self, breaks, pieces):
        self.breaks = np.asarray(breaks, float)
        if len(pieces) != len(self.breaks) + 1:
            raise ValueError("need one more piece than breakpoints")
        self.pieces = [p if isinstance(p, Polynomial) else Polynomial(p) for p in pieces]

    def origin(self, i):
        if len(self.breaks) == 0:
            return 0.0
        return self.breaks[max(i - 1, 0)]

    @classmethod
    def constant(cls, v):
        return cls([], [Polynomial([float(v)])])

    def jet(self, t, order=0):
        t = np.atleast_1d(np.asarray(t, float))
        idx = np.searchsorted(self.breaks, t, side="right")
        out = np.zeros((order + 1, len(t)))
        for i, p in enumerate(self.pieces):
            sel = idx == i
            if not sel.any():
                continue
            x = t[sel] - self.origin(i)
            q = p
            for r in range(order + 1):
                out[r, sel] = q(x)
                q = q.deriv()
        return out

    def __call__(self, t):
        return self.jet(t, 0)[0]

    @property
    def support(self):
        nz = [i for i, p in enumerate(self.pieces) if np.any(p.coef != 0)]
        if not nz:
            return (0.0, 0.0)
        lo = -np.inf if nz[0] == 0 else self.breaks[nz[0] - 1]
        hi = np.inf if nz[-1] == len(self.pieces) - 1 else self.breaks[nz[-1]]
        return (lo, hi)

    def _piece_at(self, tau, origin):
        i = int(np.searchsorted(self.breaks, tau, side="right"))
        shift = origin - self.origin(i)
        return self.pieces[i](Polynomial([shift, 1.0]))

    def _combine(self, other, op):
        breaks = np.union1d(self.breaks, other.breaks)
        pieces = []
        for i in range(len(breaks) + 1):
            if len(breaks) == 0:
                mid, org = 0.0, 0.0
            elif i == 0:
                mid, org = breaks[0] - 1.0, breaks[0]
            elif i == len(breaks):
                mid, org = breaks[-1] + 1.0, breaks[-1]
            else:
                mid, org = 0.5 * (breaks[i - 1] + breaks[i]), breaks[i - 1]
            pieces.append(op(self._piece_at(mid, org), other._piece_at(mid, org)))
        return Profile(breaks, pieces)

    def __mul__(self, other):
        if isinstance(other, Profile):
            return self._combine(other, lambda a, b: a * b)
        return Profile(self.breaks, [p * float(other) for p in self.pieces])

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, Profile):
            other = Profile.constant(other)
        return self._combine(other, lambda a, b: a + b)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other if isinstance(other, Profile) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def shifted(self, dt):
        return Profile(self.breaks + dt, self.pieces)

    def deriv(self):
        return Profile(self.breaks, [p.deriv() for p in self.pieces])


def poly_bump(center, width, power=6, amplitude=1.0):
    """``amplitude * (1 - s^2)^power`` with ``s = (tau - center) / width`` on ``|s| < 1``."""
    base = Polynomial([1.0, 0.0, -1.0 / width**2])
    # in the local variable x = tau - (center - width): s = (x - width) / width
    inner = base(Polynomial([-width, 1.0]))
    core = amplitude * inner**power
    zero = Polynomial([0.0])
    return Profile([center - width, center + width], [zero, core, zero])


def smoothstep_profile(tau0, tau1):
    """C^1 step: 0 before tau0, ``3 s^2 - 2 s^3`` between, 1 after tau1."""
    L = tau1 - tau0
    s = Polynomial([0.0, 1.0 / L])
    mid = 3 * s**2 - 2 * s**3
    return Profile([tau0, tau1], [Polynomial([0.0]), mid, Polynomial([1.0])])


def profile_moments(profile, lam):
    """``S = int sin(w t) a``, ``C = int cos(w t) a`` (and t-moments for zero modes)."""
    lo, hi = profile.support
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise PreconditionError("moments need a compactly supported profile")
    w = np.sqrt(np.asarray(lam, float))
    nodes, weights = panel_nodes(lo, hi, list(profile.breaks), w.max(initial=0.0))
    a = profile(nodes) * weights
    S = np.sin(np.outer(w, nodes)) @ a
    C = np.cos(np.outer(w, nodes)) @ a
    m0 = a.sum()
    m1 = (nodes * a).sum()
    return S, C, m0, m1


def panel_nodes(lo, hi, breaks, wmax, max_len=0.5):
    """Gauss-Legendre nodes on ``[lo, hi]`` split at ``breaks`` and at length ``min(max_len, 3/wmax)``."""
    if hi <= lo:
        return np.zeros(0), np.zeros(0)
    cuts = sorted({lo, hi, *[b for b in breaks if lo < b < hi]})
    h = max_len if wmax <= 0 else min(max_len, 3.0 / wmax)
    xs, ws = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        m = max(1, int(np.ceil((b - a) / h)))
        edges = np.linspace(a, b, m + 1)
        for u, v in zip(edges[:-1], edges[1:]):
            xs.append(0.5 * (v - u) * GL_NODES + 0.5 * (u + v))
            ws.append(0.5 * (v - u) * GL_WEIGHTS)
    return np.concatenate(xs), np.concatenate(ws)


# -- block layout and spatial calculus ------------------------------------------------


@dataclass(frozen=True)
class Layout:
    """Full-coordinate layout of a spacetime k-form: cochains of degrees (k-1, k)."""

    c: object
    k: int

    @property
    def degrees(self):
        return tuple(j for j in (self.k - 1, self.k) if 0 <= j <= self.c.n)

    @property
    def size(self):
        return sum(self.c.count(j) for j in self.degrees)

    def slice(self, j):
        off = 0
        for d in self.degrees:
            n = self.c.count(d)
            if d == j:
                return slice(off, off + n)
            off += n
        return None

    def mass(self):
        return _layout_mass(self, False)

    def lorentz_mass(self):
        """Block mass with the sign of the Lorentzian pairing: minus on the dtau component."""
        return _layout_mass(self, True)


def _layout_mass(lay, lorentz):
    cache = lay.c.__dict__.setdefault("_layout_mass", {})
    key = (lay.k, lorentz)
    if key not in cache:
        D = derham(lay.c)
        sign = {j: (-1.0 if lorentz and j == lay.k - 1 else 1.0) for j in lay.degrees}
        mats = [sign[j] * D.mass(j).toarray() for j in lay.degrees]
        cache[key] = la.block_diag(*mats) if mats else np.zeros((0, 0))
    return cache[key]


class SpatialCalculus:
    """Full-coordinate ``d`` and ``delta`` of a subcomplex (absolute, relative or normal)."""

    def __init__(self, c, kind):
        self.c, self.kind = c, kind
        self.sc = subcomplex(c, kind)
        self._delta = {}

    def d(self, j):
        return derham(self.c).d(j)

    def delta(self, j):
        if j not in self._delta:
            if self.kind == "absolute":
                self._delta[j] = derham(self.c).delta(j)
            else:
                sc = self.sc
                self._delta[j] = sc.P(j - 1) @ sc.delta(j) @ sc.P(j).T
        return self._delta[j]

    def projector(self, j):
        P = self.sc.P(j)
        return P @ P.T


def calculus(c, kind):
    cache = c.__dict__.setdefault("_calculus", {})
    if kind not in cache:
        cache[kind] = SpatialCalculus(c, kind)
    return cache[kind]


# -- fields ---------------------------------------------------------------------------


class Field:
    """Lazy block form on a ``Layout``; ``jet(t, order)`` has shape (order+1, len(t), size)."""

    layout: Layout
    breaks: tuple = ()

    def jet(self, t, order=0):
        raise NotImplementedError

    def __call__(self, t):
        return self.jet(t, 0)[0]

    def __add__(self, other):
        return SumField([self, other])

    def __sub__(self, other):
        return SumField([self, ScaledField(other, -1.0)])

    def __mul__(self, a):
        return ScaledField(self, float(a))

    __rmul__ = __mul__

    def __neg__(self):
        return ScaledField(self, -1.0)

    def times(self, profile):
        return ProfileField(profile, self)

    def component(self, t, j, order=0):
        sl = self.layout.slice(j)
        return self.jet(t, order)[:, :, sl]


def _check_same(fields):
    lay = fields[0].layout
    for f in fields[1:]:
        if f.layout != lay:
            raise DegreeError("fields live on different layouts")
    return lay


class ZeroField(Field):
    def __init__(self, layout):
        self.layout = layout
        self.breaks = ()

    def jet(self, t, order=0):
        t = np.atleast_1d(t)
        return np.zeros((order + 1, len(t), self.layout.size))


class SeparableField(Field):
    """``sum_r profile_r(tau) * vector_r``."""

    def __init__(self, layout, terms):
        self.layout = layout
        self.terms = [(p, np.asarray(v, float)) for p, v in terms]
        for _, v in self.terms:
            if v.shape != (layout.size,):
                raise DegreeError(f"vector of shape {v.shape} does not fit layout of size {layout.size}")
        self.breaks = tuple(sorted({b for p, _ in self.terms for b in p.breaks}))

    def jet(self, t, order=0):
        t = np.atleast_1d(np.asarray(t, float))
        out = np.zeros((order + 1, len(t), self.layout.size))
        for p, v in self.terms:
            out += p.jet(t, order)[:, :, None] * v[None, None, :]
        return out


class SumField(Field):
    def __init__(self, fields):
        self.layout = _check_same(fields)
        self.fields = fields
        self.breaks = tuple(sorted({b for f in fields for b in f.breaks}))

    def jet(self, t, order=0):
        return sum(f.jet(t, order) for f in self.fields)


class ScaledField(Field):
    def __init__(self, field, a):
        self.layout, self.field, self.a = field.layout, field, a
        self.breaks = field.breaks

    def jet(self, t, order=0):
        return self.a * self.field.jet(t, order)


class ProfileField(Field):
    """``profile(tau) * field`` with Leibniz rule for derivatives."""

    def __init__(self, profile, field):
        self.layout, self.profile, self.field = field.layout, profile, field
        self.breaks = tuple(sorted(set(field.breaks) | set(profile.breaks)))

    def jet(self, t, order=0):
        from math import comb

        p = self.profile.jet(t, order)
        f = self.field.jet(t, order)
        out = np.zeros_like(f)
        for r in range(order + 1):
            for i in range(r + 1):
                out[r] += comb(r, i) * p[i][:, None] * f[r - i]
        return out


class LinearField(Field):
    """A time-independent spatial map ``matrix`` applied to a field, landing in ``layout``."""

    def __init__(self, matrix, field, layout):
        self.matrix, self.field, self.layout = matrix, field, layout
        self.breaks = field.breaks

    def jet(self, t, order=0):
        f = self.field.jet(t, order)
        return np.einsum("ij,rtj->rti", _dense(self.matrix), f)


def _dense(m):
    return m.toarray() if hasattr(m, "toarray") else np.asarray(m)


class DerivedField(Field):
    """Field whose jet of order r is computed from the input jet of order r + 1."""

    def __init__(self, field, layout, rule):
        self.field, self.layout, self.rule = field, layout, rule
        self.breaks = field.breaks

    def jet(self, t, order=0):
        t = np.atleast_1d(np.asarray(t, float))
        f = self.field.jet(t, order + 1)
        return self.rule(f, order, len(t))


def st_d(field: Field, calc: SpatialCalculus) -> Field:
    """Spacetime exterior derivative of a k-form field (layout k to layout k+1)."""
    lin, lout = field.layout, Layout(field.layout.c, field.layout.k + 1)
    k = lin.k
    dk = _dense(calc.d(k)) if 0 <= k < lin.c.n else None
    dkm = _dense(calc.d(k - 1)) if 1 <= k <= lin.c.n else None

    def rule(f, order, T):
        out = np.zeros((order + 1, T, lout.size))
        s_in1, s_in0 = lin.slice(k), lin.slice(k - 1)
        s_out0, s_out1 = lout.slice(k), lout.slice(k + 1)
        for r in range(order + 1):
            if s_out0 is not None:
                if s_in1 is not None:
                    out[r, :, s_out0] += f[r + 1][:, s_in1]
                if s_in0 is not None and dkm is not None:
                    out[r, :, s_out0] -= f[r][:, s_in0] @ dkm.T
            if s_out1 is not None and s_in1 is not None:
                out[r, :, s_out1] += f[r][:, s_in1] @ dk.T
        return out

    return DerivedField(field, lout, rule)


def st_delta(field: Field, calc: SpatialCalculus) -> Field:
    """Spacetime codifferential of a k-form field (layout k to layout k-1)."""
    lin, lout = field.layout, Layout(field.layout.c, field.layout.k - 1)
    k = lin.k
    n = lin.c.n
    dl_k = calc.delta(k) if 1 <= k <= n else None
    dl_km = calc.delta(k - 1) if 1 <= k - 1 <= n else None

    def rule(f, order, T):
        out = np.zeros((order + 1, T, lout.size))
        s_in1, s_in0 = lin.slice(k), lin.slice(k - 1)
        s_out1, s_out0 = lout.slice(k - 1), lout.slice(k - 2)
        for r in range(order + 1):
            if s_out1 is not None:
                if s_in1 is not None and dl_k is not None:
                    out[r, :, s_out1] += f[r][:, s_in1] @ dl_k.T
                if s_in0 is not None:
                    out[r, :, s_out1] += f[r + 1][:, s_in0]
            if s_out0 is not None and s_in0 is not None and dl_km is not None:
                out[r, :, s_out0] -= f[r][:, s_in0] @ dl_km.T
        return out

    return DerivedField(field, lout, rule)


def st_box(field: Field, calc: SpatialCalculus) -> Field:
    """``d delta + delta d`` assembled from the two first-order operators."""
    return st_d(st_delta(field, calc), calc) + st_delta(st_d(field, calc), calc)


def st_delta_d(field: Field, calc: SpatialCalculus) -> Field:
    return st_delta(st_d(field, calc), calc)


# -- Green operators on fields ---------------------------------------------------------


class GreenSpace:
    """Spectral data of the constrained block for a boundary condition, in full coordinates."""

    def __init__(self, c, k, bc):
        self.op = build_constrained(c, k, bc)
        self.decomp = eigendecompose(self.op)
        self.layout = Layout(c, k)
        if self.layout.degrees != self.op.degrees:
            raise DegreeError("layout and constrained operator disagree on degrees")
        self.lam = self.decomp.eigenvalues
        self.w = np.sqrt(self.lam)
        self.zero = self.w == 0
        self.ws = np.where(self.zero, 1.0, self.w)
        self.W = self.op.P @ self.decomp.vectors  # modes -> full
        self.L = self.decomp.vectors.T @ self.op.P.T @ self.layout.mass()  # full -> modes
        self.wmax = float(self.w.max(initial=0.0))

    def modal(self, values):
        """Modal coefficients of full block vectors (last axis)."""
        return values @ self.L.T

    def full(self, modal):
        return modal @ self.W.T


def green_space(c, k, bc):
    from .boundary import as_bc

    bc = as_bc(bc)
    cache = c.__dict__.setdefault("_green_spaces", {})
    key = (k, bc.tag, None if bc.f is None else str(bc.f))
    if key not in cache:
        cache[key] = GreenSpace(c, k, bc)
    return cache[key]


class OnShellField(Field):
    """``sum_m W_m (p_m cos(w_m tau) + q_m sin(w_m tau))``, zero modes ``p_m + q_m tau``."""

    def __init__(self, space: GreenSpace, p, q):
        self.space, self.layout = space, space.layout
        self.p, self.q = np.asarray(p, float), np.asarray(q, float)
        self.breaks = ()

    def modal_jet(self, t, order=0):
        sp_ = self.space
        t = np.atleast_1d(np.asarray(t, float))
        wt = np.outer(t, sp_.ws)
        C, S = np.cos(wt), np.sin(wt)
        out = np.zeros((order + 1, len(t), len(self.p)))
        val = C * self.p + S * self.q
        der = (-S * self.p + C * self.q) * sp_.ws
        z = sp_.zero
        for r in range(order + 1):
            if r % 2 == 0:
                m = val * (-(sp_.ws**2)) ** (r // 2)
            else:
                m = der * (-(sp_.ws**2)) ** (r // 2)
            m[:, z] = 0.0
            out[r] = m
        out[0][:, z] = self.p[z] + np.outer(t, self.q[z])
        if order >= 1:
            out[1][:, z] = self.q[z]
        return out

    def jet(self, t, order=0):
        return self.space.full(self.modal_jet(t, order))


class GreenField(Field):
    """Retarded or advanced Green operator applied to a source supported in ``support``."""

    def __init__(self, space: GreenSpace, orientation, source: Field, support):
        if source.layout != space.layout:
            raise DegreeError("source and Green operator live on different layouts")
        if orientation not in (RETARDED, ADVANCED):
            raise PreconditionError("use causal_green for the causal propagator")
        a, b = float(support[0]), float(support[1])
        if not (np.isfinite(a) and np.isfinite(b) and b > a):
            raise PreconditionError(f"Green operator needs a compact source window, got {support}")
        self.space, self.orientation, self.source = space, orientation, source
        self.layout = space.layout
        self.a, self.b = a, b
        self.breaks = tuple(sorted(set(source.breaks) | {a, b}))
        self._setup()
        self._cache = {}

    def _setup(self):
        sp_ = self.space
        nodes, weights = panel_nodes(self.a, self.b, list(self.source.breaks), sp_.wmax)
        # nodes come in panels of 12; recover each panel's endpoints
        P = nodes.reshape(-1, len(GL_NODES))
        W = weights.reshape(-1, len(GL_NODES))
        half = W.sum(axis=1) / 2.0
        mid = P.mean(axis=1)
        self.lo, self.hi = mid - half, mid + half
        F = sp_.modal(self.source.jet(nodes, 0)[0]) * weights[:, None]
        F = F.reshape(P.shape[0], P.shape[1], -1)
        wt = P[:, :, None] * sp_.ws[None, None, :]
        ic = (np.cos(wt) * F).sum(axis=1)
        is_ = (np.sin(wt) * F).sum(axis=1)
        i0 = F.sum(axis=1)
        i1 = (P[:, :, None] * F).sum(axis=1)
        zero_row = np.zeros((1, F.shape[2]))
        self.cum = [np.concatenate([zero_row, np.cumsum(x, axis=0)]) for x in (ic, is_, i0, i1)]

    def _integrals(self, t):
        """Running integrals from ``a`` to ``t`` for each t (shape (T, modes) each)."""
        sp_ = self.space
        t = np.clip(t, self.a, self.b)
        idx = np.clip(np.searchsorted(self.hi, t, side="left"), 0, len(self.hi) - 1)
        base = [c[idx] for c in self.cum]
        lo = self.lo[idx]
        # partial panel [lo, t]
        half = 0.5 * (t - lo)
        nodes = half[:, None] * GL_NODES[None, :] + (lo + half)[:, None]
        wts = half[:, None] * GL_WEIGHTS[None, :]
        flat = nodes.ravel()
        F = sp_.modal(self.source.jet(flat, 0)[0]).reshape(len(t), len(GL_NODES), -1) * wts[:, :, None]
        wt = nodes[:, :, None] * sp_.ws[None, None, :]
        parts = [
            (np.cos(wt) * F).sum(axis=1),
            (np.sin(wt) * F).sum(axis=1),
            F.sum(axis=1),
            (nodes[:, :, None] * F).sum(axis=1),
        ]
        return [b + p for b, p in zip(base, parts)]

    def modal_jet(self, t, order=0):
        key = (np.asarray(t, float).tobytes(), order)
        if key in self._cache:
            return self._cache[key]
        sp_ = self.space
        t = np.atleast_1d(np.asarray(t, float))
        Ic, Is, I0, I1 = self._integrals(t)
        if self.orientation == ADVANCED:
            tot = [c[-1] for c in self.cum]
            Ic, Is, I0, I1 = (x[None, :] - y for x, y in zip(tot, (Ic, Is, I0, I1)))
        wt = np.outer(t, sp_.ws)
        C, S = np.cos(wt), np.sin(wt)
        z = sp_.zero
        if self.orientation == RETARDED:
            u = (S * Ic - C * Is) / sp_.ws
            du = C * Ic + S * Is
            u[:, z] = (t[:, None] * I0 - I1)[:, z]
            du[:, z] = I0[:, z]
        else:
            u = (C * Is - S * Ic) / sp_.ws
            du = -(C * Ic + S * Is)
            u[:, z] = (I1 - t[:, None] * I0)[:, z]
            du[:, z] = -I0[:, z]
        out = np.zeros((order + 1, len(t), len(sp_.lam)))
        out[0] = u
        if order >= 1:
            out[1] = du
        if order >= 2:
            inside = (t >= self.a) & (t <= self.b)
            src = np.zeros((order - 1, len(t), len(sp_.lam)))
            if inside.any():
                src[:, inside] = sp_.modal(self.source.jet(t[inside], order - 2))
            for r in range(2, order + 1):
                out[r] = src[r - 2] - sp_.lam * out[r - 2]
        self._cache[key] = out
        return out

    def jet(self, t, order=0):
        return self.space.full(self.modal_jet(t, order))


def causal_green(space: GreenSpace, source: Field, support) -> OnShellField:
    """``G = G+ - G-`` of a compactly supported source, as an exact on-shell field."""
    a, b = float(support[0]), float(support[1])
    nodes, weights = panel_nodes(a, b, list(source.breaks), space.wmax)
    F = space.modal(source.jet(nodes, 0)[0]) * weights[:, None]
    wt = np.outer(nodes, space.ws)
    Ic = (np.cos(wt) * F).sum(axis=0)
    Is = (np.sin(wt) * F).sum(axis=0)
    p = -Is / space.ws
    q = Ic / space.ws
    z = space.zero
    p[z] = -(nodes[:, None] * F).sum(axis=0)[z]
    q[z] = F.sum(axis=0)[z]
    return OnShellField(space, p, q)


def separable_causal(space: GreenSpace, profile: Profile, vector) -> OnShellField:
    """Causal Green operator of ``profile(tau) * vector`` in closed form per mode."""
    S, C, m0, m1 = profile_moments(profile, space.lam)
    c = space.modal(np.asarray(vector, float))
    p = -c * S / space.ws
    q = c * C / space.ws
    z = space.zero
    p[z] = -(c * m1)[z]
    q[z] = (c * m0)[z]
    return OnShellField(space, p, q)


def lorentz_pairing(x: Field, y: Field, lo, hi, wmax=None):
    """``<<x, y>>`` integrated over ``[lo, hi]`` with Gauss panels at all breakpoints."""
    if x.layout != y.layout:
        raise DegreeError("pairing needs fields on the same layout")
    if wmax is None:
        wmax = max(getattr(getattr(f, "space", None), "wmax", 0.0) for f in (x, y))
        wmax = max(wmax, _field_wmax(x), _field_wmax(y))
    nodes, weights = panel_nodes(lo, hi, list(set(x.breaks) | set(y.breaks)), wmax)
    G = x.layout.lorentz_mass()
    xv = x.jet(nodes, 0)[0]
    yv = y.jet(nodes, 0)[0]
    return float(weights @ ((xv @ G) * yv).sum(axis=1))


def _field_wmax(f):
    best = getattr(getattr(f, "space", None), "wmax", 0.0)
    for attr in ("field", "source"):
        sub = getattr(f, attr, None)
        if sub is not None:
            best = max(best, _field_wmax(sub))
    for sub in getattr(f, "fields", []):
        best = max(best, _field_wmax(sub))
    return best


def sup_norm(field: Field, taus, order=0, mass=None):
    """Max over ``taus`` of the mass norm of the ``order``-th tau-derivative."""
    M = field.layout.mass() if mass is None else mass
    v = field.jet(taus, order)[order]
    vals = ((v @ M) * v).sum(axis=1)
    return float(np.sqrt(max(vals.max(initial=0.0), 0.0)))
