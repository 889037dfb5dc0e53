"""Configuration-driven runner: ``cauchyform <command> --config run.yaml``.

Each run writes ``report.json`` (schema ``cauchyform-report-v1``) and any CSV
data into a fresh numbered directory ``<out>/<experiment>/<command>-NNN``.
Existing run directories are never touched.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for
configuration, schema or precondition errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .boundary import (
    BOX_NORMAL,
    BOX_TANGENTIAL,
    DIRICHLET,
    MAXWELL_NORMAL,
    MAXWELL_TANGENTIAL,
    as_bc,
    box_green_relative,
    build_constrained,
    triple_identity_check,
)
from .cohomology import betti_absolute, betti_relative, cohomology_report
from .errors import CauchyformError, ConfigError, PreconditionError
from .fields import poly_bump
from .mesh import FAMILIES, generate_family, load, refine_times
from .propagator import (
    ADVANCED,
    CAUSAL,
    ORIENTATIONS,
    RETARDED,
    GreenOperator,
    SpacetimeForm,
    TimeGrid,
    antisymmetry_check,
    apply_green,
    box_residual,
    commutation_check,
    eigendecompose,
    kernel_initial_conditions,
    write_manifest,
)

SCHEMA = "cauchyform-report-v1"
POTENTIAL_SCHEMA = "cauchyform-potential-v1"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
COMMANDS = ("mesh", "spectrum", "verify", "propagate", "gaugefix", "cohomology", "symplectic", "radical")

TOLERANCES = {
    "antisymmetry": 1e-8,
    "commutation": 1e-8,
    "eigen_residual": 1e-8,
    "gauge_fix": 1e-6,
    "gauge_invariance": 1e-7,
    "green_defect": 1e-10,
    "kernel_slope": 1e-6,
    "positivity": 1e-9,
    "radical_gap": 10.0,
    "rank": 1e-8,
    "sigma": 1e-6,
    "sigma_antisymmetry": 1e-7,
    "spectrum_oracle": 1e-10,
    "triple_decay": 1.5,
    "triple_interior": 1e-10,
}

_MAXWELL = (MAXWELL_TANGENTIAL, MAXWELL_NORMAL)
_CONFIG_KEYS = {"experiment", "mesh", "k", "bc", "time", "modes", "seed", "out", "trials", "options"}


# -- configuration ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    experiment: str = "run"
    mesh: dict = field(default_factory=lambda: {"family": "interval", "resolution": 16})
    k: int = 0
    bc: dict = field(default_factory=lambda: {"kind": DIRICHLET})
    time: dict = field(default_factory=lambda: {"t0": 0.0, "t1": 4.0, "steps": 400})
    modes: int | None = 16
    seed: int = 0
    out: str = "runs"
    trials: int = 20
    options: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, doc):
        if doc is None:
            doc = {}
        if not isinstance(doc, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(doc) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        cfg = cls(**{key: doc[key] for key in doc})
        cfg.normalize()
        return cfg

    def normalize(self):
        if not isinstance(self.experiment, str) or not self.experiment or "/" in self.experiment:
            raise ConfigError(f"experiment must be a plain name, got {self.experiment!r}")
        if not isinstance(self.mesh, dict):
            raise ConfigError("mesh must be a mapping with 'family' or 'file'")
        if "file" not in self.mesh:
            fam = self.mesh.get("family")
            if fam not in FAMILIES:
                raise ConfigError(f"mesh family {fam!r} unknown; expected one of {FAMILIES}")
        extra = set(self.mesh) - {"family", "resolution", "size", "refine", "file", "extra"}
        if extra:
            raise ConfigError(f"unknown mesh keys {sorted(extra)}")
        self.k = _as_int(self.k, "k")
        self.seed = _as_int(self.seed, "seed")
        self.trials = _as_int(self.trials, "trials")
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        if self.modes is not None:
            self.modes = _as_int(self.modes, "modes")
        bc = as_bc(self.bc)  # raises for unknown tags and Robin sign violations
        self.bc = bc.to_dict()
        t = dict(self.time or {})
        try:
            self.time = {"t0": float(t.get("t0", 0.0)), "t1": float(t.get("t1", 4.0)), "steps": int(t.get("steps", 400))}
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad time block {t!r}: {exc}") from exc
        if not self.time["t1"] > self.time["t0"] or self.time["steps"] < 2:
            raise ConfigError(f"time block needs t1 > t0 and steps >= 2, got {self.time}")
        if not isinstance(self.options, dict):
            raise ConfigError("options must be a mapping")

    def to_dict(self):
        return asdict(self)

    @property
    def bc_kind(self):
        return as_bc(self.bc)

    def grid(self):
        return TimeGrid.span(self.time["t0"], self.time["t1"], self.time["steps"])


def _as_int(v, name):
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    return int(v)


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig.from_mapping({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)  # JSON is a subset of YAML
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return RunConfig.from_mapping(doc)


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(_clean(cfg.to_dict()), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def build_mesh(cfg: RunConfig):
    m = cfg.mesh
    if "file" in m:
        c = load(m["file"])
    else:
        c = generate_family(m["family"], int(m.get("resolution", 4)), m.get("size"), **dict(m.get("extra", {})))
    c = refine_times(c, int(m.get("refine", 0)))
    if not 0 <= cfg.k <= c.n + 1:
        raise ConfigError(f"degree k = {cfg.k} outside 0..{c.n + 1} for a {c.n}-dimensional mesh")
    return c


# -- reports ---------------------------------------------------------------------------------


def _clean(x):
    """JSON-safe copy: numpy scalars unwrapped, floats rounded to 12 significant digits."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.12g}")
    return x


class Report:
    def __init__(self, command, cfg: RunConfig):
        self.command, self.cfg = command, cfg
        self.checks = {}
        self.results = {}
        self.files = []

    def check(self, name, value, tol, passed, **detail):
        self.checks[name] = {"status": "pass" if passed else "fail", "value": value, "tolerance": tol, **detail}
        return passed

    def skip(self, name, reason):
        self.checks[name] = {"status": "skip", "reason": reason}

    @property
    def failed(self):
        return sorted(n for n, c in self.checks.items() if c["status"] == "fail")

    def to_dict(self):
        return _clean({
            "schema": SCHEMA,
            "command": self.command,
            "experiment": self.cfg.experiment,
            "config": self.cfg.to_dict(),
            "config_hash": config_hash(self.cfg),
            "seed": self.cfg.seed,
            "tolerances": TOLERANCES,
            "checks": self.checks,
            "results": self.results,
            "files": sorted(self.files),
            "status": "fail" if self.failed else "pass",
        })

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def run_directory(root, experiment, command):
    base = Path(root) / experiment
    base.mkdir(parents=True, exist_ok=True)
    n = 1
    while True:
        d = base / f"{command}-{n:03d}"
        try:
            d.mkdir()
            return d
        except FileExistsError:
            n += 1


# -- potential files -------------------------------------------------------------------------


def save_potential(path, form: SpacetimeForm, bc, lorenz_window=None):
    doc = {
        "schema": POTENTIAL_SCHEMA,
        "bc": as_bc(bc).tag,
        "k": form.k,
        "grid": form.grid.to_dict(),
        "lorenz_window": None if lorenz_window is None else [float(lorenz_window[0]), float(lorenz_window[1])],
        "values": form.values.tolist(),
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_potential(path, c, required_bc, k):
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read potential file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != POTENTIAL_SCHEMA:
        raise ConfigError(f"potential file must declare schema {POTENTIAL_SCHEMA!r}")
    declared = as_bc(doc.get("bc", "")).tag if doc.get("bc") else None
    required = as_bc(required_bc).tag
    if declared != required:
        raise ConfigError(f"potential file declares bc {declared!r} but the run requires {required!r}")
    if doc.get("k") != k:
        raise ConfigError(f"potential file has degree {doc.get('k')!r}, run expects k = {k}")
    g = doc.get("grid") or {}
    try:
        grid = TimeGrid(float(g["t0"]), float(g["dt"]), int(g["steps"]))
        form = SpacetimeForm(c, k, grid, np.asarray(doc["values"], float))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed potential file {path}: {exc}") from exc
    win = doc.get("lorenz_window")
    return form, (tuple(win) if win is not None else None)


# -- check helpers ---------------------------------------------------------------------------


def _check_complex(rep: Report, c):
    worst = 0
    for k in range(1, c.n):
        worst = max(worst, int(abs(c.boundary(k) @ c.boundary(k + 1)).sum()))
    rep.check("dd_zero", worst, 0, worst == 0)


def _check_operator(rep: Report, op, rng, trials):
    worst = max(box_green_relative(op.random_form(rng), op.random_form(rng)) for _ in range(trials)) if op.size else 0.0
    rep.check("green_defect", worst, TOLERANCES["green_defect"], worst <= TOLERANCES["green_defect"], pairs=trials)
    pos = op.positivity()
    rep.check("positivity", pos["min_eigenvalue"], pos["threshold"], pos["ok"], norm=pos["norm"])


def _check_triple(rep: Report, c, k, seed):
    tri = triple_identity_check(c, k, samples=5, seed=seed)
    tol = TOLERANCES["triple_interior"]
    ok = tri["interior_max"] <= tol and tri["max_relative_discrepancy"] <= tol
    rep.check("triple_identity", max(tri["interior_max"], tri["max_relative_discrepancy"]), tol, ok)
    if "decay_factor" in tri:
        rep.check("triple_decay", tri["decay_factor"], TOLERANCES["triple_decay"],
                  tri["decay_factor"] >= TOLERANCES["triple_decay"],
                  coarse=tri["smooth_discrepancy"], refined=tri["smooth_discrepancy_refined"])


def _check_kernel(rep: Report, dec):
    G = GreenOperator(dec, RETARDED)
    lam = float(dec.eigenvalues.max(initial=0.0))
    step = min(1e-4, 1e-3 / math.sqrt(lam)) if lam > 0 else 1e-4
    ic = kernel_initial_conditions(G, step)
    rep.check("kernel_k0", ic["k0_max_abs"], 0.0, ic["k0_max_abs"] == 0.0)
    rep.check("kernel_slope", ic["slope_error"], TOLERANCES["kernel_slope"],
              ic["slope_error"] <= TOLERANCES["kernel_slope"], step=step)


def _check_antisymmetry(rep: Report, dec, grid, trials, seed):
    res = antisymmetry_check(GreenOperator(dec, RETARDED), GreenOperator(dec, ADVANCED), grid, trials, seed)
    tol = TOLERANCES["antisymmetry"]
    rep.check("propagator_adjoint", res["max_relative_error"], tol, res["max_relative_error"] <= tol, trials=trials)
    rep.check("causal_antisymmetry", res["causal_diagonal_max"], tol, res["causal_diagonal_max"] <= tol)


def _check_commutation(rep: Report, c, bc, k, seed):
    tag = bc.wave_tag
    if tag == BOX_TANGENTIAL and 1 <= k <= c.n:
        pass
    elif tag == BOX_NORMAL and 0 <= k < c.n:
        pass
    else:
        rep.skip("commutation", f"no commutation identity for {bc.tag} at k = {k}")
        return
    res = commutation_check(c, tag, k, seed=seed)
    tol = TOLERANCES["commutation"]
    rep.check("commutation", res["interior_residual"], tol, res["interior_residual"] <= tol,
              version=res["version"], boundary_defect=res["boundary_defect"])


def _check_cohomology(rep: Report, c):
    r = cohomology_report(c)
    rep.results["cohomology"] = r.to_dict()
    rep.check("betti_euler", sum((-1) ** k * b for k, b in enumerate(r.absolute)), r.euler,
              sum((-1) ** k * b for k, b in enumerate(r.absolute)) == r.euler)
    rep.check("lefschetz_duality", r.relative, r.absolute[::-1], r.lefschetz["ok"])
    rep.check("exact_sequence", r.exact_sequence["alternating_sum"], 0, r.exact_sequence["ok"])
    rep.check("harmonic_normal", r.harmonic["normal"], r.absolute, r.harmonic["normal"] == r.absolute)
    rep.check("harmonic_tangential", r.harmonic["tangential"], r.relative, r.harmonic["tangential"] == r.relative)
    return r


def uniform_interval(c):
    if c.n != 1:
        return False
    h = c.volumes(1)
    return bool(np.ptp(h) <= 1e-12 * h.max())


def dirichlet_oracle(c, count=5):
    """Consistent-mass Toeplitz eigenvalues of the Dirichlet scalar Laplacian on a uniform interval.

    Returns ``(consistent, lumped, continuum)``: the exact eigenvalues of the
    discretization ``6 (1 - cos t) / (h^2 (2 + cos t))``, the finite-difference
    values ``4 sin^2(t / 2) / h^2`` and ``(j pi / L)^2``, with ``t = j pi / N``.
    """
    N = c.count(1)
    L = float(c.volumes(1).sum())
    h = L / N
    j = np.arange(1, count + 1)
    t = j * np.pi / N
    consistent = 6 * (1 - np.cos(t)) / (h**2 * (2 + np.cos(t)))
    lumped = 4 * np.sin(t / 2) ** 2 / h**2
    return consistent, lumped, (j * np.pi / L) ** 2


def _check_spectrum_oracle(rep: Report, c, dec):
    vals = dec.eigenvalues[dec.degree_of == 0][:5]
    cons, lumped, cont = dirichlet_oracle(c, len(vals))
    err = float(np.max(np.abs(vals - cons) / cons))
    rep.check("spectrum_oracle", err, TOLERANCES["spectrum_oracle"], err <= TOLERANCES["spectrum_oracle"])
    rep.results["spectrum_table"] = [
        {"j": j + 1, "eigenvalue": vals[j], "toeplitz": cons[j], "finite_difference": lumped[j], "continuum": cont[j],
         "relative_to_continuum": vals[j] / cont[j] - 1}
        for j in range(len(vals))
    ]


# -- Maxwell checks --------------------------------------------------------------------------


def sigma_trials(c, k, bc, pairs, seed):
    """Presymplectic identities on random interior coclosed sources.

    Errors are relative to the largest ``|(alpha, G beta)|`` in the batch.
    """
    from .maxwell import coclosed_potential, interior_coclosed_basis, pairing_gtilde, pure_gauge, sigma

    B = interior_coclosed_basis(c, k)
    if B.shape[1] == 0:
        raise PreconditionError("mesh has no interior coclosed cochains at this degree; refine it")
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(pairs):
        va, vb = B @ rng.standard_normal(B.shape[1]), B @ rng.standard_normal(B.shape[1])
        pa = poly_bump(rng.uniform(-0.3, 0.3), rng.uniform(0.3, 0.6))
        pb = poly_bump(rng.uniform(-0.3, 0.3), rng.uniform(0.3, 0.6))
        A1, A2 = coclosed_potential(c, k, bc, pa, va), coclosed_potential(c, k, bc, pb, vb)
        g = pairing_gtilde(c, k, bc, (pa, va), (pb, vb))
        split = (1.2, 2.2)
        s12, s21 = sigma(A1, A2, split), sigma(A2, A1, split)
        s_alt = sigma(A1, A2, (-2.2, -1.2))
        w = rng.standard_normal(c.count(k - 1))
        if bc == MAXWELL_TANGENTIAL:
            w[c.boundary_indices(k - 1)] = 0.0
        gauge = pure_gauge(c, k, bc, poly_bump(1.7, 0.5), w)
        s_gauge = sigma(A1 + gauge, A2, split)
        rows.append({"gtilde": g, "sigma": s12, "sigma_swapped": s21, "sigma_other_split": s_alt, "sigma_gauged": s_gauge})
    scale = max(max(abs(r["gtilde"]) for r in rows), 1e-300)
    return rows, {
        "sigma": max(abs(r["sigma"] - r["gtilde"]) for r in rows) / scale,
        "split": max(abs(r["sigma_other_split"] - r["sigma"]) for r in rows) / scale,
        "antisymmetry": max(abs(r["sigma"] + r["sigma_swapped"]) for r in rows) / scale,
        "gauge_invariance": max(abs(r["sigma_gauged"] - r["sigma"]) for r in rows) / scale,
        "scale": scale,
    }


def _check_sigma(rep: Report, c, k, bc, pairs, seed):
    rows, err = sigma_trials(c, k, bc, pairs, seed)
    rep.results["sigma"] = {"pairs": rows, "scale": err["scale"]}
    rep.check("sigma_vs_pairing", err["sigma"], TOLERANCES["sigma"], err["sigma"] <= TOLERANCES["sigma"], pairs=pairs)
    rep.check("sigma_split_independence", err["split"], TOLERANCES["sigma"], err["split"] <= TOLERANCES["sigma"])
    tol = TOLERANCES["sigma_antisymmetry"]
    rep.check("sigma_antisymmetry", err["antisymmetry"], tol, err["antisymmetry"] <= tol)
    tol = TOLERANCES["gauge_invariance"]
    rep.check("sigma_gauge_invariance", err["gauge_invariance"], tol, err["gauge_invariance"] <= tol)
    return rows


def gauge_fix_trial(c, k, bc, seed):
    """Fix a gauge-shifted on-shell potential; residuals after fixing, and ``|chi|`` for a Lorenz input."""
    from .fields import sup_norm
    from .maxwell import coclosed_potential, interior_coclosed_basis, lorenz_fix, maxwell_residual, potential_scale, pure_gauge

    B = interior_coclosed_basis(c, k)
    if B.shape[1] == 0:
        raise PreconditionError("mesh has no interior coclosed cochains at this degree; refine it")
    rng = np.random.default_rng(seed)
    A0 = coclosed_potential(c, k, bc, poly_bump(0.0, 0.5), B @ rng.standard_normal(B.shape[1]))
    w = rng.standard_normal(c.count(k - 1))
    if bc == MAXWELL_TANGENTIAL:
        w[c.boundary_indices(k - 1)] = 0.0
    A = A0 + pure_gauge(c, k, bc, poly_bump(1.0, 0.6), w)
    taus = np.linspace(-1.0, 3.0, 17)
    before = maxwell_residual(A, taus)
    Ap, _ = lorenz_fix(A)
    after = maxwell_residual(Ap, taus)
    # a Lorenz input is left (almost) alone
    A0w = type(A0)(A0.field, A0.bc, (-0.5, 0.5))
    _, chi0 = lorenz_fix(A0w)
    chi_rel = sup_norm(chi0.field, taus) / max(potential_scale(A0w, taus), 1e-300)
    return before, after, chi_rel


def _check_gauge_fix(rep: Report, c, k, bc, seed):
    before, after, chi_rel = gauge_fix_trial(c, k, bc, seed)
    tol = TOLERANCES["gauge_fix"]
    rep.results["gauge_fix"] = {"before": before.to_dict(), "after": after.to_dict(), "lorenz_input_chi": chi_rel}
    rep.check("gauge_fix_lorenz", after.lorenz, tol, after.lorenz <= tol)
    worst = max(after.boundary.values())
    rep.check("gauge_fix_boundary", worst, tol, worst <= tol)
    rep.check("gauge_fix_identity_on_lorenz", chi_rel, tol, chi_rel <= tol)


def _check_radical(rep: Report, out, c, k, bc, modes, seed):
    from .algebra import build_generators, commutator_check, pairing_matrix, radical

    gens = build_generators(c, k, bc, seed=seed)
    P = pairing_matrix(c, k, bc, gens, modes)
    R = radical(P, TOLERANCES["rank"], TOLERANCES["radical_gap"])
    if out is not None:
        P.to_csv(out / "pairing.csv")
        rep.files.append("pairing.csv")
    if bc == MAXWELL_NORMAL:
        R.betti = betti_absolute(c, k)
        match = R.dimension == R.betti
    else:
        R.betti = betti_relative(c, k)
        match = R.dimension <= R.betti
    rep.results["radical"] = R.to_dict()
    rep.results["generators"] = len(gens)
    rep.check("pairing_antisymmetry", P.antisymmetry, TOLERANCES["sigma_antisymmetry"],
              P.antisymmetry <= TOLERANCES["sigma_antisymmetry"])
    rep.check("radical_gap", min(R.gap, R.gap_extended), TOLERANCES["radical_gap"], R.decided)
    rep.check("radical_vs_betti", R.dimension, R.betti, match,
              rule="equal" if bc == MAXWELL_NORMAL else "at most")
    dev = commutator_check(P)
    rep.check("commutator_relation", dev, 1e-12, dev <= 1e-12 * max(np.abs(P.W).max(initial=0.0), 1.0))
    return R


# -- commands --------------------------------------------------------------------------------


def cmd_mesh(cfg, out, args):
    rep = Report("mesh", cfg)
    c = build_mesh(cfg)
    c.check_nondegenerate()
    _check_complex(rep, c)
    c.save(out / "mesh.json")
    rep.files.append("mesh.json")
    rep.results.update({
        "dimension": c.n,
        "counts": list(c.counts),
        "boundary_counts": [len(c.boundary_indices(j)) for j in range(c.n)],
        "euler": c.euler_characteristic(),
        "mesh_size": c.mesh_size(),
        "volume": c.total_volume(),
    })
    return rep


def cmd_spectrum(cfg, out, args):
    rep = Report("spectrum", cfg)
    c = build_mesh(cfg)
    op = build_constrained(c, cfg.k, cfg.bc_kind)
    dec = eigendecompose(op)
    with open(out / "spectrum.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "degree", "eigenvalue"])
        for i, (lam, deg) in enumerate(zip(dec.eigenvalues, dec.degree_of)):
            wr.writerow([i, int(deg), f"{lam:.17g}"])
    rep.files.append("spectrum.csv")
    n = cfg.modes or 10
    rep.results.update({
        "size": op.size,
        "zero_modes": dec.zero_count,
        "lowest": dec.eigenvalues[:n],
        "near_clip": dec.near_clip,
    })
    tol = TOLERANCES["eigen_residual"]
    rep.check("eigen_residual", dec.residual(), tol, dec.residual() <= tol)
    rep.check("orthonormality", dec.orthonormality(), tol, dec.orthonormality() <= tol)
    pos = op.positivity()
    rep.check("positivity", pos["min_eigenvalue"], pos["threshold"], pos["ok"])
    if cfg.bc_kind.tag == DIRICHLET and cfg.k in (0, 1) and uniform_interval(c):
        _check_spectrum_oracle(rep, c, dec)
    return rep


def cmd_verify(cfg, out, args):
    rep = Report("verify", cfg)
    c = build_mesh(cfg)
    bc, k = cfg.bc_kind, cfg.k
    rng = np.random.default_rng(cfg.seed)
    _check_complex(rep, c)
    op = build_constrained(c, k, bc)
    _check_operator(rep, op, rng, cfg.trials)
    _check_triple(rep, c, k, cfg.seed)
    dec = eigendecompose(op)
    _check_kernel(rep, dec)
    _check_antisymmetry(rep, dec, cfg.grid(), min(cfg.trials, 10), cfg.seed)
    _check_commutation(rep, c, bc, k, cfg.seed)
    _check_cohomology(rep, c)
    if bc.tag == DIRICHLET and k in (0, 1) and uniform_interval(c):
        _check_spectrum_oracle(rep, c, dec)
    if bc.tag in _MAXWELL:
        if not 0 < k <= c.n:
            raise ConfigError(f"Maxwell conditions need 0 < k <= {c.n}, got {k}")
        pairs = int(cfg.options.get("sigma_pairs", 3))
        _check_sigma(rep, c, k, bc.tag, pairs, cfg.seed)
        _check_gauge_fix(rep, c, k, bc.tag, cfg.seed)
        _check_radical(rep, out, c, k, bc.tag, cfg.modes, cfg.seed)
    return rep


def cmd_propagate(cfg, out, args):
    rep = Report("propagate", cfg)
    c = build_mesh(cfg)
    op = build_constrained(c, cfg.k, cfg.bc_kind)
    dec = eigendecompose(op)
    grid = cfg.grid()
    if args.source:
        source = SpacetimeForm.from_csv(args.source, c, cfg.k, grid)
    else:
        source = SpacetimeForm.zeros(c, cfg.k, grid)
    wanted = cfg.options.get("orientations", list(ORIENTATIONS))
    bad = [o for o in wanted if o not in ORIENTATIONS]
    if bad:
        raise ConfigError(f"unknown orientations {bad}; expected a subset of {ORIENTATIONS}")
    residuals = {}
    for orient in wanted:
        G = GreenOperator(dec, orient)
        sol = apply_green(G, source)
        name = f"{orient}.csv"
        sol.to_csv(out / name)
        rep.files.append(name)
        norm = sol.norm()
        residuals[orient] = {"norm": norm, "finite": bool(np.isfinite(sol.values).all())}
        if orient != CAUSAL:
            residuals[orient]["box_residual"] = box_residual(G, source, sol)
        rep.check(f"{orient}_finite", residuals[orient]["finite"], True, residuals[orient]["finite"])
    write_manifest(out / "manifest.json", GreenOperator(dec, CAUSAL), grid,
                   {"residuals": _clean(residuals), "source_norm": source.norm(), "orientations": list(wanted)})
    rep.files.append("manifest.json")
    rep.results.update({"residuals": residuals, "source_norm": source.norm()})
    return rep


def cmd_gaugefix(cfg, out, args):
    from .fields import sup_norm
    from .maxwell import lorenz_fix, maxwell_residual, potential_from_samples, potential_scale

    rep = Report("gaugefix", cfg)
    bc = cfg.bc_kind
    if bc.tag not in _MAXWELL:
        raise ConfigError(f"gaugefix needs a Maxwell condition, config has {bc.tag}")
    if not args.potential:
        raise ConfigError("gaugefix needs --potential <file>")
    c = build_mesh(cfg)
    form, window = load_potential(args.potential, c, bc, cfg.k)
    grid = form.grid
    if window is None:
        window = (grid.samples[0], grid.samples[-1])
    A = potential_from_samples(form, bc, window)
    taus = grid.samples[:: max(1, grid.steps // 40)]
    before = maxwell_residual(A, taus)
    Ap, chi = lorenz_fix(A)
    after = maxwell_residual(Ap, taus)
    chi_rel = sup_norm(chi.field, taus) / max(potential_scale(A, taus), 1e-300)
    fixed = SpacetimeForm(c, cfg.k, grid, Ap.field(grid.samples))
    save_potential(out / "fixed_potential.json", fixed, bc, window)
    rep.files.append("fixed_potential.json")
    rep.results.update({"before": before.to_dict(), "after": after.to_dict(), "chi_relative": chi_rel})
    tol = TOLERANCES["gauge_fix"]
    rep.check("lorenz_residual", after.lorenz, tol, after.lorenz <= tol)
    worst = max(after.boundary.values())
    rep.check("boundary_residual", worst, tol, worst <= tol)
    return rep


def cmd_cohomology(cfg, out, args):
    rep = Report("cohomology", cfg)
    c = build_mesh(cfg)
    r = _check_cohomology(rep, c)
    with open(out / "betti.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["degree", "absolute", "relative", "harmonic_normal", "harmonic_tangential"])
        for k in range(c.n + 1):
            wr.writerow([k, r.absolute[k], r.relative[k], r.harmonic["normal"][k], r.harmonic["tangential"][k]])
    rep.files.append("betti.csv")
    return rep


def cmd_symplectic(cfg, out, args):
    rep = Report("symplectic", cfg)
    bc = cfg.bc_kind
    if bc.tag not in _MAXWELL:
        raise ConfigError(f"symplectic needs a Maxwell condition, config has {bc.tag}")
    c = build_mesh(cfg)
    rows = _check_sigma(rep, c, cfg.k, bc.tag, cfg.trials, cfg.seed)
    with open(out / "sigma.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        keys = sorted(rows[0])
        wr.writerow(["pair"] + keys)
        for i, r in enumerate(rows):
            wr.writerow([i] + [f"{r[key]:.17g}" for key in keys])
    rep.files.append("sigma.csv")
    return rep


def cmd_radical(cfg, out, args):
    rep = Report("radical", cfg)
    bc = cfg.bc_kind
    if bc.tag not in _MAXWELL:
        raise ConfigError(f"radical needs a Maxwell condition, config has {bc.tag}")
    c = build_mesh(cfg)
    _check_radical(rep, out, c, cfg.k, bc.tag, cfg.modes, cfg.seed)
    return rep


_HANDLERS = {
    "mesh": cmd_mesh,
    "spectrum": cmd_spectrum,
    "verify": cmd_verify,
    "propagate": cmd_propagate,
    "gaugefix": cmd_gaugefix,
    "cohomology": cmd_cohomology,
    "symplectic": cmd_symplectic,
    "radical": cmd_radical,
}


def parser():
    p = argparse.ArgumentParser(prog="cauchyform", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML or JSON run configuration")
        s.add_argument("--out", help="output root (overrides the config)")
        s.add_argument("--seed", type=int, help="random seed (overrides the config)")
        s.add_argument("--refine", type=int, help="uniform refinements applied to the mesh")
        if name == "propagate":
            s.add_argument("--source", help="source CSV (sample, tau, degree, simplex, value)")
        if name == "gaugefix":
            s.add_argument("--potential", help="potential file (cauchyform-potential-v1 JSON)")
    return p


def run(argv=None, stdout=None):
    """Parse ``argv``, run the command and return ``(exit_code, run_dir or None)``."""
    stdout = stdout or sys.stdout
    args = parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.refine is not None:
            if args.refine < 0:
                raise ConfigError("--refine must be non-negative")
            cfg.mesh = {**cfg.mesh, "refine": args.refine}
        if args.out is not None:
            cfg.out = args.out
    except CauchyformError as exc:
        print(f"cauchyform {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG, None
    out = run_directory(cfg.out, cfg.experiment, args.command)
    try:
        rep = _HANDLERS[args.command](cfg, out, args)
    except CauchyformError as exc:
        print(f"cauchyform {args.command}: error: {exc}", file=sys.stderr)
        for f in out.iterdir():
            f.unlink()
        out.rmdir()
        return EXIT_CONFIG, None
    (out / "report.json").write_text(rep.dumps())
    status = "FAIL " + ", ".join(rep.failed) if rep.failed else "PASS"
    print(f"{args.command}: {status} ({out / 'report.json'})", file=stdout)
    return (EXIT_FAIL if rep.failed else EXIT_OK), out


def main(argv=None):
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
