"""Spectral Green operators for the wave operator ``d^2/dtau^2 + S`` on a constrained block.

A ``SpectralDecomp`` holds the mass-orthonormal eigenpairs of a
``ConstrainedOperator``. The causal kernel is

    K(t) = sum_j phi_j(t) e_j e_j^T M,   phi_j(t) = sin(w_j t) / w_j,

with ``phi_j(t) = t`` on zero modes. Retarded and advanced operators are
``theta(t) K(t)`` and ``-theta(-t) K(t)``. Sources sampled on a uniform time
grid are integrated with the trapezoid rule, using the angle-addition form
of ``sin(w (t - s))`` so each mode costs two cumulative sums.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la

from .boundary import ConstrainedOperator, as_bc, build_constrained, subcomplex, trace_free
from .dec import OperatorMatrix, derham
from .errors import CauchyformError, DegreeError, PreconditionError

RETARDED, ADVANCED, CAUSAL = "retarded", "advanced", "causal"
ORIENTATIONS = (RETARDED, ADVANCED, CAUSAL)
CLIP = 1e-9


class SolverError(CauchyformError, RuntimeError):
    """The eigensolver failed or returned pairs violating the decomposition invariants."""


@dataclass
class SpectralDecomp:
    """Eigenpairs ``A e = lam M e`` of a constrained operator, ``E^T M E = I``.

    ``degree_of`` records which block degree each mode belongs to; modes
    never mix degrees because each block is decomposed on its own.
    """

    op: ConstrainedOperator
    eigenvalues: np.ndarray
    vectors: np.ndarray
    degree_of: np.ndarray
    zero_count: int
    raw_eigenvalues: np.ndarray = field(repr=False)
    near_clip: list = field(default_factory=list)

    @property
    def count(self):
        return len(self.eigenvalues)

    @property
    def frequencies(self):
        return np.sqrt(self.eigenvalues)

    def residual(self):
        A, M, E = self.op.A, self.op.M, self.vectors
        r = A @ E - (M @ E) * self.raw_eigenvalues
        return float(np.abs(r).max() / max(self.op.norm(), 1e-300)) if E.size else 0.0

    def orthonormality(self):
        E = self.vectors
        return float(np.abs(E.T @ self.op.M @ E - np.eye(E.shape[1])).max()) if E.size else 0.0

    def modal_load(self, loads):
        """Project reduced load vectors (rows) onto modes."""
        return loads @ self.vectors


def eigendecompose(op: ConstrainedOperator, count=None) -> SpectralDecomp:
    """Full generalized eigendecomposition of ``op``, keeping the lowest ``count`` modes."""
    nA = op.norm()
    lams, vecs, degs = [], [], []
    offset = 0
    for b in op.blocks:
        n = b.A.shape[0]
        if n:
            try:
                lam, E = la.eigh(b.A, b.M)
            except la.LinAlgError as exc:
                raise SolverError(f"generalized eigensolver failed on degree {b.degree}: {exc}") from exc
            full = np.zeros((op.size, n))
            full[offset : offset + n] = E
            lams.append(lam)
            vecs.append(full)
            degs.append(np.full(n, b.degree))
        offset += n
    if not lams:
        return SpectralDecomp(op, np.zeros(0), np.zeros((op.size, 0)), np.zeros(0, int), 0, np.zeros(0))
    lam = np.concatenate(lams)
    E = np.concatenate(vecs, axis=1)
    deg = np.concatenate(degs)
    order = np.argsort(lam, kind="stable")
    lam, E, deg = lam[order], E[:, order], deg[order]
    if count is not None and count != "all":
        lam, E, deg = lam[: int(count)], E[:, : int(count)], deg[: int(count)]
    thresh = CLIP * nA
    zero = np.abs(lam) <= thresh
    near = [float(x) for x in lam[(np.abs(lam) > thresh) & (np.abs(lam) <= 10 * thresh)]]
    clipped = np.where(zero, 0.0, lam)
    if np.any(clipped < 0):
        raise SolverError(f"negative eigenvalue {clipped.min():.3e} beyond clip threshold {thresh:.3e}")
    return SpectralDecomp(op, clipped, E, deg, int(zero.sum()), lam, near)


def phi(lam, t):
    """``sin(sqrt(lam) t) / sqrt(lam)``, equal to ``t`` on zero modes."""
    lam = np.asarray(lam, float)
    t = np.asarray(t, float)
    w = np.sqrt(lam)
    safe = np.where(w > 0, w, 1.0)
    return np.where(w > 0, np.sin(safe * t) / safe, t)


def phi_dot(lam, t):
    w = np.sqrt(np.asarray(lam, float))
    return np.cos(w * np.asarray(t, float))


# -- time grid and sampled spacetime forms ------------------------------------------


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    dt: float
    steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise PreconditionError(f"time step must be positive, got {self.dt}")
        if self.steps < 2:
            raise PreconditionError(f"a time grid needs at least 2 steps, got {self.steps}")

    @classmethod
    def span(cls, t0, t1, steps):
        return cls(float(t0), (float(t1) - float(t0)) / steps, int(steps))

    @property
    def samples(self):
        return self.t0 + self.dt * np.arange(self.steps + 1)

    @property
    def size(self):
        return self.steps + 1

    def weights(self):
        w = np.full(self.size, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w

    def to_dict(self):
        return {"t0": self.t0, "dt": self.dt, "steps": self.steps}


@dataclass
class SpacetimeForm:
    """Samples of a block form ``(omega_0(tau), omega_1(tau))`` in full cochain coordinates.

    ``values[i]`` concatenates the (k-1)-cochain and the k-cochain at
    ``grid.samples[i]``; degrees outside ``0..n`` are absent.
    """

    complex: object
    k: int
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        size = sum(self.complex.count(j) for j in self.degrees)
        if self.values.shape != (self.grid.size, size):
            raise DegreeError(
                f"spacetime form needs shape {(self.grid.size, size)}, got {self.values.shape}"
            )

    @property
    def degrees(self):
        return tuple(j for j in (self.k - 1, self.k) if 0 <= j <= self.complex.n)

    def component(self, j):
        off = 0
        for d in self.degrees:
            n = self.complex.count(d)
            if d == j:
                return self.values[:, off : off + n]
            off += n
        raise DegreeError(f"degree {j} not in block {self.degrees}")

    @classmethod
    def zeros(cls, c, k, grid):
        size = sum(c.count(j) for j in (k - 1, k) if 0 <= j <= c.n)
        return cls(c, k, grid, np.zeros((grid.size, size)))

    @classmethod
    def separable(cls, c, k, grid, profile, vector):
        """``profile(tau) * vector`` sampled on ``grid``."""
        return cls(c, k, grid, np.outer(profile(grid.samples), vector))

    def scaled(self, a):
        return SpacetimeForm(self.complex, self.k, self.grid, self.values * a)

    def norm(self, mass=None):
        """Trapezoid-in-time, mass-in-space L2 norm."""
        if mass is None:
            mass = block_mass(self.complex, self.k)
        w = self.grid.weights()
        return float(np.sqrt(max(np.einsum("t,ti,ti->", w, self.values @ mass, self.values), 0.0)))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["sample", "tau", "degree", "simplex", "value"])
            for i, tau in enumerate(self.grid.samples):
                for j in self.degrees:
                    comp = self.component(j)[i]
                    for s, v in enumerate(comp):
                        wr.writerow([i, f"{tau:.12g}", j, s, f"{v:.17g}"])

    @classmethod
    def from_csv(cls, path, c, k, grid):
        form = cls.zeros(c, k, grid)
        with open(path, newline="") as fh:
            rd = csv.DictReader(fh)
            need = {"sample", "degree", "simplex", "value"}
            if rd.fieldnames is None or not need <= set(rd.fieldnames):
                raise PreconditionError(f"spacetime CSV needs columns {sorted(need)}")
            for row in rd:
                try:
                    i, j, s, v = int(row["sample"]), int(row["degree"]), int(row["simplex"]), float(row["value"])
                except (TypeError, ValueError) as exc:
                    raise PreconditionError(f"bad spacetime CSV row {row}: {exc}") from exc
                if not 0 <= i < grid.size:
                    raise PreconditionError(f"sample index {i} outside the time grid")
                if j not in form.degrees or not 0 <= s < c.count(j):
                    raise PreconditionError(f"entry (degree {j}, simplex {s}) outside the block {form.degrees}")
                form.component(j)[i, s] = v
        return form


def block_mass(c, k):
    D = derham(c)
    mats = [D.mass(j).toarray() for j in (k - 1, k) if 0 <= j <= c.n]
    return la.block_diag(*mats) if mats else np.zeros((0, 0))


# -- Green operators -----------------------------------------------------------------


@dataclass
class GreenOperator:
    decomp: SpectralDecomp
    orientation: str = CAUSAL

    def __post_init__(self):
        if self.orientation not in ORIENTATIONS:
            raise PreconditionError(f"orientation must be one of {ORIENTATIONS}")

    @property
    def op(self):
        return self.decomp.op

    def reduced_kernel(self, dt):
        d = self.decomp
        if self.orientation == RETARDED and dt < 0:
            return np.zeros((d.op.size, d.op.size))
        if self.orientation == ADVANCED and dt > 0:
            return np.zeros((d.op.size, d.op.size))
        sign = -1.0 if self.orientation == ADVANCED else 1.0
        E = d.vectors
        return sign * (E * phi(d.eigenvalues, dt)) @ (E.T @ d.op.M)

    def full_kernel(self, dt):
        """Kernel acting on full cochains through the Galerkin load ``P^T M f``."""
        op = self.op
        return op.P @ self.reduced_kernel(dt) @ la.solve(op.M, op.P.T @ op.full_mass(), assume_a="pos")

    def modal_coefficients(self, full_values):
        """Rows of full block vectors to modal source coefficients ``E^T P^T M f``."""
        op = self.op
        loads = full_values @ (op.full_mass() @ op.P)
        return self.decomp.modal_load(loads)

    def from_modal(self, modal):
        return modal @ (self.op.P @ self.decomp.vectors).T


def green_operator(decomp, orientation=CAUSAL):
    return GreenOperator(decomp, orientation)


def kernel_sample(G: GreenOperator, dtau: float) -> OperatorMatrix:
    """``K(dtau)`` in the reduced coordinates of ``G``'s constrained operator."""
    return OperatorMatrix(G.reduced_kernel(float(dtau)), G.op.k, G.op.k)


def _duhamel_modal(lam, tau, coeff, weights, orientation):
    """Trapezoid Duhamel sums per mode; ``coeff`` has shape (Nt, modes)."""
    w = np.sqrt(lam)
    zero = w == 0
    ws = np.where(zero, 1.0, w)
    S = np.sin(np.outer(tau, ws))
    C = np.cos(np.outer(tau, ws))
    wc = coeff * weights[:, None]
    out = np.zeros_like(coeff)
    if orientation in (RETARDED, CAUSAL):
        a = np.cumsum(wc * C, axis=0)
        b = np.cumsum(wc * S, axis=0)
        ret = (S * a - C * b) / ws
        z0 = np.cumsum(wc, axis=0)
        z1 = np.cumsum(wc * tau[:, None], axis=0)
        ret[:, zero] = (tau[:, None] * z0 - z1)[:, zero]
        out += ret
    if orientation in (ADVANCED, CAUSAL):
        a = np.cumsum((wc * C)[::-1], axis=0)[::-1]
        b = np.cumsum((wc * S)[::-1], axis=0)[::-1]
        adv = -(S * a - C * b) / ws
        z0 = np.cumsum(wc[::-1], axis=0)[::-1]
        z1 = np.cumsum((wc * tau[:, None])[::-1], axis=0)[::-1]
        adv[:, zero] = -(tau[:, None] * z0 - z1)[:, zero]
        out = out + adv if orientation == ADVANCED else out - adv
    return out


def _duhamel_weights(grid, orientation):
    # The running integrals end where phi vanishes, so the plain trapezoid
    # weights of the whole grid serve every orientation. Using the same
    # weights as the spacetime pairing makes the adjoint relation exact.
    return grid.weights()


def apply_green(G: GreenOperator, source: SpacetimeForm, tol=1e-12) -> SpacetimeForm:
    """Per-mode Duhamel integral of ``source`` on its own grid."""
    op = G.op
    if source.complex is not op.complex or source.k != op.k:
        raise PreconditionError("source lives on a different complex or block degree than the operator")
    vals = source.values
    scale = np.abs(vals).max() if vals.size else 0.0
    if G.orientation == RETARDED and np.abs(vals[0]).max() > tol * max(scale, 1e-300) and scale > 0:
        raise PreconditionError("retarded propagation needs a source vanishing at the first time sample")
    if G.orientation == ADVANCED and np.abs(vals[-1]).max() > tol * max(scale, 1e-300) and scale > 0:
        raise PreconditionError("advanced propagation needs a source vanishing at the last time sample")
    coeff = G.modal_coefficients(vals)
    modal = _duhamel_modal(G.decomp.eigenvalues, source.grid.samples, coeff,
                           _duhamel_weights(source.grid, G.orientation), G.orientation)
    return SpacetimeForm(source.complex, source.k, source.grid, G.from_modal(modal))


def box_residual(G: GreenOperator, source: SpacetimeForm, solution: SpacetimeForm):
    """Relative L2 error of ``u'' + S u - f`` with second central differences in time.

    Evaluated on interior samples, in the reduced Galerkin sense
    ``M u'' + A u = P^T M f``.
    """
    op = G.op
    Minv_load = la.solve(op.M, (source.values @ op.full_mass() @ op.P).T, assume_a="pos").T
    u = la.lstsq(op.P, solution.values.T)[0].T
    dt = solution.grid.dt
    udd = (u[2:] - 2 * u[1:-1] + u[:-2]) / dt**2
    Su = la.solve(op.M, (u[1:-1] @ op.A).T, assume_a="pos").T
    r = udd + Su - Minv_load[1:-1]
    def nrm(x):
        return np.sqrt(((x @ op.M) * x).sum())
    return float(nrm(r) / max(nrm(Minv_load[1:-1]), 1e-300))


# -- checks -------------------------------------------------------------------------


def smoothstep(tau, tau0, tau1):
    s = np.clip((np.asarray(tau, float) - tau0) / (tau1 - tau0), 0.0, 1.0)
    return s * s * (3 - 2 * s)


def temporal_split(form: SpacetimeForm, tau0: float, tau1: float):
    """Split ``form = plus + minus`` with a C^1 cutoff rising from 0 at tau0 to 1 at tau1.

    ``plus`` vanishes before ``tau0`` and ``minus`` after ``tau1``. Spatial
    traces of each sample are scaled, so every boundary condition survives.
    """
    if not tau1 > tau0:
        raise PreconditionError("temporal split needs tau0 < tau1")
    eta = smoothstep(form.grid.samples, tau0, tau1)[:, None]
    plus = SpacetimeForm(form.complex, form.k, form.grid, eta * form.values)
    minus = SpacetimeForm(form.complex, form.k, form.grid, (1 - eta) * form.values)
    return plus, minus


def kernel_initial_conditions(G: GreenOperator, step=1e-4):
    """``K(0)`` and the central-difference slope of ``K`` at 0 against the identity."""
    K0 = G.reduced_kernel(0.0)
    causal = GreenOperator(G.decomp, CAUSAL)
    slope = (causal.reduced_kernel(step) - causal.reduced_kernel(-step)) / (2 * step)
    n = G.op.size
    return {
        "k0_max_abs": float(np.abs(K0).max()) if n else 0.0,
        "slope_error": float(np.abs(slope - np.eye(n)).max()) if n else 0.0,
        "step": step,
        "lambda_max": float(G.decomp.eigenvalues.max()) if n else 0.0,
    }


def antisymmetry_check(Gp: GreenOperator, Gm: GreenOperator, grid: TimeGrid, trials=50, seed=0, support=None):
    """``(alpha, G+ beta) - (G- alpha, beta)`` for random compactly time-supported sources.

    Sources are random spatial vectors times random smooth bumps whose support
    lies inside ``support`` (default: the middle half of the grid).
    """
    if Gp.decomp is not Gm.decomp:
        raise PreconditionError("both Green operators must come from the same decomposition")
    if Gp.orientation != RETARDED or Gm.orientation != ADVANCED:
        raise PreconditionError("expected a retarded and an advanced operator")
    op = Gp.op
    c = op.complex
    rng = np.random.default_rng(seed)
    tau = grid.samples
    lo, hi = support or (tau[0] + 0.25 * (tau[-1] - tau[0]), tau[0] + 0.75 * (tau[-1] - tau[0]))
    Mfull = op.full_mass()
    w = grid.weights()

    def rand_source():
        vals = np.zeros((grid.size, Mfull.shape[0]))
        for _ in range(3):
            cen = rng.uniform(lo, hi)
            wid = rng.uniform(0.05, 0.25) * (hi - lo)
            prof = bump(tau, cen, wid)
            vals += np.outer(prof, op.P @ rng.standard_normal(op.size))
        return SpacetimeForm(c, op.k, grid, vals)

    def pair(x, y):
        return float(w @ ((x.values @ Mfull) * y.values).sum(axis=1))

    worst = 0.0
    diag = 0.0
    Gc = GreenOperator(Gp.decomp, CAUSAL)
    for _ in range(trials):
        a, b = rand_source(), rand_source()
        lhs = pair(a, apply_green(Gp, b))
        rhs = pair(apply_green(Gm, a), b)
        scale = max(abs(lhs), abs(rhs), a.norm(Mfull) * apply_green(Gp, b).norm(Mfull), 1e-300)
        worst = max(worst, abs(lhs - rhs) / scale)
        diag = max(diag, abs(pair(a, apply_green(Gc, a))) / max(a.norm(Mfull) * apply_green(Gc, a).norm(Mfull), 1e-300))
    return {"trials": trials, "max_relative_error": worst, "causal_diagonal_max": diag}


def bump(t, center, width):
    """C-infinity bump ``exp(1 - 1/(1 - s^2))`` on ``|t - center| < width``, peak 1."""
    s = (np.asarray(t, float) - center) / width
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def image_sum_solution(g, L, x, t, samples=20001):
    """Solution of ``u_tt = u_xx`` on ``[0, L]`` with Dirichlet ends, ``u(0) = 0``, ``u_t(0) = g``.

    Uses the odd 2L-periodic extension of ``g`` in d'Alembert's formula,
    ``u(x, t) = (G(x + t) - G(x - t)) / 2`` with ``G`` an antiderivative.
    """
    y = np.linspace(-2 * L, 2 * L, 2 * samples - 1)
    def ext(z):
        z = np.mod(z + L, 2 * L) - L
        return np.sign(z) * g(np.abs(z))
    gy = ext(y)
    Gy = np.concatenate([[0.0], np.cumsum(0.5 * (gy[1:] + gy[:-1]) * np.diff(y))])
    def anti(z):
        z = np.asarray(z, float)
        # G is 2L-periodic because the odd extension has zero mean
        zz = np.mod(z + 2 * L, 4 * L) - 2 * L
        return np.interp(zz, y, Gy)
    return 0.5 * (anti(x + t) - anti(x - t))


def causality_check(G: GreenOperator, data, center, radius, times, speed=1.0, margin=None):
    """Fraction of mass of ``u(t) = K(t) data`` outside the numerical light cone.

    ``data`` is a full block vector supported in the coordinate ball of
    ``radius`` about ``center``; distances are measured from simplex
    centroids. The cone radius is ``radius + speed * t + margin`` with
    ``margin`` defaulting to three mesh sizes.
    """
    op = G.op
    c = op.complex
    margin = 3 * c.mesh_size() if margin is None else margin
    center = np.atleast_1d(np.asarray(center, float))
    Mfull = op.full_mass()
    dist = np.concatenate([np.linalg.norm(c.centroids(j) - center, axis=1) for j in op.degrees])
    Gc = GreenOperator(G.decomp, CAUSAL)
    rows = []
    for t in times:
        u = Gc.full_kernel(t) @ data
        out = dist > radius + speed * abs(t) + margin
        total = u @ Mfull @ u
        outside = u[out] @ Mfull[np.ix_(out, out)] @ u[out]
        frac = float(outside / total) if total > 0 else 0.0
        rows.append({"t": float(t), "leakage": frac})
    return {"margin": margin, "samples": rows, "max_leakage": max(r["leakage"] for r in rows)}


def commutation_check(c, bc, k, times=(0.3, 0.7, 1.3), seed=0):
    """Check ``delta K_k = K_{k-1} delta`` (tangential family) or ``d K_k = K_{k+1} d`` (normal family).

    Kernels are evaluated at the sampled times on trace-free (interior)
    test forms, where the identity holds to rounding, and on forms with a
    nonzero boundary trace, where the defect is only reported.
    """
    bc = as_bc(bc)
    kind = subcomplex(c, "relative" if bc.wave_tag in ("box_tangential", "robin_tangential") else "normal")
    tangential = kind.kind == "relative"
    if tangential and not 1 <= k <= c.n:
        raise DegreeError(f"delta-version needs 1 <= k <= {c.n}")
    if not tangential and not 0 <= k < c.n:
        raise DegreeError(f"d-version needs 0 <= k < {c.n}")
    j_src, j_dst = k, (k - 1 if tangential else k + 1)
    ops = {j: build_constrained(c, j, bc) for j in (j_src, j_dst)}
    # scalar blocks: use the single-degree block for each degree
    decs = {}
    for j in (j_src, j_dst):
        blk = [b for b in ops[j].blocks if b.degree == j][0]
        lam, E = la.eigh(blk.A, blk.M)
        lam = np.where(np.abs(lam) <= CLIP * max(np.linalg.norm(blk.A, 2), 1e-300), 0.0, lam)
        decs[j] = (blk, lam, E)
    D = derham(c)
    rng = np.random.default_rng(seed)

    def kernel_full(j, t, x):
        blk, lam, E = decs[j]
        load = blk.P.T @ (D.mass(j) @ x)
        return blk.P @ (E @ (phi(lam, t) * (E.T @ load)))

    def apply_op(x):
        if tangential:
            sc = kind
            return sc.P(j_dst) @ (sc.delta(j_src) @ (sc.P(j_src).T @ x))
        return D.d(j_src) @ x

    mask = trace_free(c, j_src)
    interior_res = 0.0
    for _ in range(3):
        x = rng.standard_normal(c.count(j_src)) * mask
        for t in times:
            lhs = apply_op(kernel_full(j_src, t, x))
            rhs = kernel_full(j_dst, t, apply_op(x))
            scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs), 1e-300)
            interior_res = max(interior_res, float(np.linalg.norm(lhs - rhs) / scale))
    # a form with nonzero boundary trace, pushed through the Galerkin load
    y = rng.standard_normal(c.count(j_src))
    defect = 0.0
    for t in times:
        if tangential:
            # y has a nonzero tangential trace, so it lies outside the relative complex
            lhs = D.delta(j_src) @ kernel_full(j_src, t, y)
            rhs = kernel_full(j_dst, t, D.delta(j_src) @ y)
        else:
            lhs = D.d(j_src) @ kernel_full(j_src, t, y)
            rhs = kernel_full(j_dst, t, D.d(j_src) @ y)
        defect = max(defect, float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(lhs), 1e-300)))
    return {
        "version": "delta" if tangential else "d",
        "bc": bc.tag,
        "k": k,
        "interior_residual": interior_res,
        "boundary_defect": defect,
        "times": list(times),
    }


def write_manifest(path, G: GreenOperator, grid: TimeGrid, extra=None):
    doc = {
        "grid": grid.to_dict(),
        "bc": G.op.bc.to_dict(),
        "degrees": list(G.op.degrees),
        "modes": G.decomp.count,
        "zero_modes": G.decomp.zero_count,
        "orientation": G.orientation,
    }
    doc.update(extra or {})
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
