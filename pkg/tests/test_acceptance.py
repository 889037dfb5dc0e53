"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Runtime bounds are part of each criterion and are checked alongside the
numerical tolerance. Run directly with ``python3 tests/test_acceptance.py``
or through pytest; the collected lines are also shown in the terminal summary.
"""

import json
import math
import sys
import time

import numpy as np
import pytest
import yaml

from cauchyform.algebra import build_generators, pairing_matrix, radical
from cauchyform.boundary import box_green_relative, build_constrained, triple_identity_check
from cauchyform.cli import gauge_fix_trial, run, sigma_trials
from cauchyform.cohomology import betti_table, cohomology_report
from cauchyform.mesh import FAMILIES, generate_family
from cauchyform.propagator import (
    ADVANCED,
    CAUSAL,
    RETARDED,
    GreenOperator,
    TimeGrid,
    antisymmetry_check,
    bump,
    causality_check,
    commutation_check,
    eigendecompose,
    image_sum_solution,
    kernel_initial_conditions,
)

RESULTS = {}

BCS = (
    ("D", "dirichlet"),
    ("tangential", "box_tangential"),
    ("normal", "box_normal"),
    ("robin tangential f=2", {"kind": "robin_tangential", "f": 2.0}),
    ("robin normal f=-2", {"kind": "robin_normal", "f": -2.0}),
)
LEVELS = {
    "interval": (8, 16, 32),
    "rectangle": (2, 3, 4),
    "disk": (2, 3, 4),
    "annulus": (2, 3, 4),
    "cylinder-strip": (2, 3, 4),
}


def record(n, title, ok, detail, elapsed=None, bound=None):
    timed = bound is None or elapsed <= bound
    status = "PASS" if ok and timed else "FAIL"
    when = "" if elapsed is None else f" [{elapsed:.2f}s" + ("" if bound is None else f" < {bound:g}s") + "]"
    line = f"{status} criterion {n}: {title}: {detail}{when}"
    RESULTS[n] = line
    print(line)
    assert ok, line
    assert timed, f"{line} (runtime bound exceeded)"


def _geometries():
    return {"interval": generate_family("interval", 16), "annulus": generate_family("annulus", 3)}


def test_criterion_01_combinatorial_exactness():
    t0 = time.perf_counter()
    worst_b = worst_d = 0
    for fam in FAMILIES:
        for level in LEVELS[fam]:
            c = generate_family(fam, level)
            for k in range(1, c.n):
                worst_b = max(worst_b, int(abs(c.boundary(k) @ c.boundary(k + 1)).sum()))
                dk = c.boundary(k).T.tocsr()
                dk1 = c.boundary(k + 1).T.tocsr()
                worst_d = max(worst_d, int(abs(dk1 @ dk).sum()))
    dt = time.perf_counter() - t0
    record(1, "dd = 0 and boundary^2 = 0 in integers, 5 families x 3 levels",
           worst_b == 0 and worst_d == 0, f"max |dd| = {worst_d}, max |boundary^2| = {worst_b}", dt, 1.0)


def test_criterion_02_formal_self_adjointness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst, per = 0.0, {}
    for gname, c in _geometries().items():
        for name, bc in BCS:
            for k in range(c.n + 1):
                op = build_constrained(c, k, bc)
                if op.size == 0:
                    continue
                err = max(box_green_relative(op.random_form(rng), op.random_form(rng)) for _ in range(100))
                per[f"{gname}/{name}/k={k}"] = err
                worst = max(worst, err)
    dt = time.perf_counter() - t0
    record(2, "Green defect of the box operator, 100 constrained pairs per bc",
           worst <= 1e-10, f"max relative defect {worst:.2e} over {len(per)} (geometry, bc, degree) cases (tol 1e-10)", dt, 10.0)


def test_criterion_03_positivity():
    t0 = time.perf_counter()
    worst, failures = np.inf, []
    for gname, c in _geometries().items():
        for name, bc in BCS:
            for k in range(c.n + 1):
                pos = build_constrained(c, k, bc).positivity()
                ratio = pos["min_eigenvalue"] / max(pos["norm"], 1e-300)
                worst = min(worst, ratio)
                if not pos["ok"]:
                    failures.append(f"{gname}/{name}/k={k}")
    dt = time.perf_counter() - t0
    record(3, "smallest generalized eigenvalue >= -1e-9 |A|, five bcs, interval and annulus",
           not failures, f"min lambda / |A| = {worst:.3e}; failures {failures or 'none'}", dt, 30.0)


def test_criterion_04_spectrum_oracle():
    t0 = time.perf_counter()
    N = 64
    c = generate_family("interval", N)
    L = float(c.volumes(1).sum())
    dec = eigendecompose(build_constrained(c, 0, "dirichlet"))
    vals = dec.eigenvalues[dec.degree_of == 0][:5]
    h = L / N
    j = np.arange(1, 6)
    oracle = 4 / h**2 * np.sin(j * h / 2) ** 2
    match = float(np.max(np.abs(vals - oracle) / oracle))
    conv = float(np.max(np.abs(vals / j**2 - 1)))
    dt = time.perf_counter() - t0
    ok = abs(L - math.pi) < 1e-14 and match <= 1e-10 and conv <= 5e-3
    record(4, "interval [0, pi], 64 segments, Dirichlet: first 5 eigenvalues vs (4/h^2) sin^2(jh/2) and j^2",
           ok, f"max relative mismatch to (4/h^2) sin^2(jh/2) = {match:.3e} (tol 1e-10); "
               f"max |lambda_j / j^2 - 1| = {conv:.4%} (tol 0.5%)", dt, 5.0)


def test_criterion_05_kernel_initial_conditions():
    t0 = time.perf_counter()
    k0, slope = 0.0, 0.0
    for c in _geometries().values():
        for _, bc in BCS:
            for k in range(c.n + 1):
                dec = eigendecompose(build_constrained(c, k, bc))
                lam = float(dec.eigenvalues.max(initial=0.0))
                step = min(1e-4, 1e-3 / math.sqrt(lam)) if lam > 0 else 1e-4
                ic = kernel_initial_conditions(GreenOperator(dec, RETARDED), step)
                k0 = max(k0, ic["k0_max_abs"])
                slope = max(slope, ic["slope_error"])
    dt = time.perf_counter() - t0
    record(5, "K(0) = 0 exactly and differenced slope equals the mass identity",
           k0 == 0.0 and slope <= 1e-6, f"max |K(0)| = {k0:g}; max slope error {slope:.2e} (tol 1e-6)", dt, 5.0)


def test_criterion_06_propagator_adjoint():
    t0 = time.perf_counter()
    grid = TimeGrid.span(0.0, 4.0, 200)
    worst = 0.0
    cases = [("interval", generate_family("interval", 32), 0, "dirichlet"),
             ("annulus", generate_family("annulus", 3), 1, "box_tangential"),
             ("annulus", generate_family("annulus", 3), 1, "box_normal")]
    for _, c, k, bc in cases:
        dec = eigendecompose(build_constrained(c, k, bc))
        res = antisymmetry_check(GreenOperator(dec, RETARDED), GreenOperator(dec, ADVANCED), grid, trials=50, seed=6)
        worst = max(worst, res["max_relative_error"])
    dt = time.perf_counter() - t0
    record(6, "(alpha, G+ beta) = (G- alpha, beta), 50 source pairs",
           worst <= 1e-8, f"max relative error {worst:.2e} over {len(cases)} operators (tol 1e-8)", dt, 20.0)


def _causality(resolution):
    L, w = math.pi, 0.4
    c = generate_family("interval", resolution)
    op = build_constrained(c, 0, "dirichlet")
    G = GreenOperator(eigendecompose(op), CAUSAL)
    x = c.vertices[:, 0]
    g = lambda y: bump(y, L / 2, w)  # noqa: E731
    M = op.full_mass()
    times = [0.2, 0.5, 0.8, 1.1]  # first reflection at L/2 - w ~ 1.17
    err = 0.0
    for t in times:
        u = G.full_kernel(t) @ g(x)
        ex = image_sum_solution(g, L, x, t)
        err = max(err, float(np.sqrt((u - ex) @ M @ (u - ex) / (ex @ M @ ex))))
    leak = causality_check(G, g(x), [L / 2], w, times)["max_leakage"]
    return err, leak


def test_criterion_07_causality():
    t0 = time.perf_counter()
    err, leak = _causality(64)
    err2, leak2 = _causality(128)
    dt = time.perf_counter() - t0
    ok = err <= 0.01 and leak <= 0.02 and leak2 < leak
    record(7, "centred bump on [0, pi] vs image sum; light-cone leakage",
           ok, f"L2 error {err:.3%} (tol 1%); leakage {leak:.2e} at h = pi/64 (tol 2%) -> {leak2:.2e} at pi/128", dt, 60.0)


def test_criterion_08_commutation():
    t0 = time.perf_counter()
    c = generate_family("annulus", 3)
    cases = [("box_tangential", 1), ("box_tangential", 2), ("box_normal", 0), ("box_normal", 1)]
    worst = max(commutation_check(c, bc, k)["interior_residual"] for bc, k in cases)
    dt = time.perf_counter() - t0
    record(8, "delta K = K delta (tangential) and d K = K d (normal) on interior forms, annulus",
           worst <= 1e-8, f"max residual {worst:.2e} for (bc, k) in {cases} (tol 1e-8)", dt, 30.0)


def test_criterion_09_lorenz_gauge_fixing():
    t0 = time.perf_counter()
    c = generate_family("annulus", 5)
    lor, bnd, parts = 0.0, 0.0, []
    for bc in ("maxwell_tangential", "maxwell_normal"):
        before, after, _ = gauge_fix_trial(c, 1, bc, seed=9)
        lor = max(lor, after.lorenz)
        bnd = max(bnd, max(after.boundary.values()))
        parts.append(f"{bc}: {before.lorenz:.1e} -> {after.lorenz:.1e}")
    dt = time.perf_counter() - t0
    record(9, "gauge-shifted on-shell potentials brought to Lorenz gauge, both bcs",
           lor <= 1e-6 and bnd <= 1e-6, f"{'; '.join(parts)}; boundary residual {bnd:.1e} (tol 1e-6)", dt, 60.0)


def test_criterion_10_presymplectic_identities():
    t0 = time.perf_counter()
    c = generate_family("annulus", 5)
    s = a = g = 0.0
    for bc in ("maxwell_tangential", "maxwell_normal"):
        _, err = sigma_trials(c, 1, bc, pairs=20, seed=10)
        s = max(s, err["sigma"], err["split"])
        a = max(a, err["antisymmetry"])
        g = max(g, err["gauge_invariance"])
    dt = time.perf_counter() - t0
    record(10, "sigma(G alpha, G beta) = (alpha, G beta), 20 pairs per bc",
           s <= 1e-6 and a <= 1e-7 and g <= 1e-7,
           f"pairing {s:.1e} (tol 1e-6); antisymmetry {a:.1e}, gauge invariance {g:.1e} (tol 1e-7)", dt, 60.0)


def test_criterion_11_topology():
    t0 = time.perf_counter()
    expected = {
        "disk": ([1, 0, 0], [0, 0, 1]),
        "annulus": ([1, 1, 0], [0, 1, 1]),
        "interval": ([1, 0], [0, 1]),
    }
    bad = []
    for fam, (ab, rel) in expected.items():
        c = generate_family(fam, 16 if fam == "interval" else 3)
        rep = cohomology_report(c)
        if betti_table(c, "absolute") != ab or betti_table(c, "relative") != rel:
            bad.append(f"{fam} betti")
        if not rep.lefschetz["ok"]:
            bad.append(f"{fam} lefschetz")
        if rep.harmonic["normal"] != ab or rep.harmonic["tangential"] != rel:
            bad.append(f"{fam} harmonic {rep.harmonic}")
    dt = time.perf_counter() - t0
    record(11, "Betti tables, Lefschetz duality and harmonic kernel dimensions",
           not bad, f"mismatches: {bad or 'none'}", dt, 10.0)


def test_criterion_12_center_detection():
    t0 = time.perf_counter()
    dims, gaps = {}, []
    for fam, level in (("disk", 5), ("annulus", 5)):
        c = generate_family(fam, level)
        gens = build_generators(c, 1, "maxwell_normal", seed=0)
        R = radical(pairing_matrix(c, 1, "maxwell_normal", gens, modes=16))
        dims[fam] = R.dimension
        gaps += [R.gap, R.gap_extended]
    dt = time.perf_counter() - t0
    gap = min(gaps)
    record(12, "radical of the k = 1 normal pairing matrix: disk 0, annulus 1",
           dims == {"disk": 0, "annulus": 1} and gap >= 10, f"dimensions {dims}; smallest singular-value gap {gap:.2e} (>= 10)", dt, 120.0)


def test_criterion_13_boundary_triple():
    t0 = time.perf_counter()
    interior, decay = 0.0, []
    for fam, level in (("interval", 16), ("disk", 3), ("annulus", 3)):
        c = generate_family(fam, level)
        for k in range(c.n + 1):
            tri = triple_identity_check(c, k, samples=10, seed=13)
            interior = max(interior, tri["interior_max"], tri["max_relative_discrepancy"])
            if "decay_factor" in tri:
                decay.append(tri["decay_factor"])
    dt = time.perf_counter() - t0
    record(13, "boundary-triple identity: exact on discrete pairs, smooth defect decays",
           interior <= 1e-10 and decay and min(decay) >= 1.5,
           f"max discrete discrepancy {interior:.1e} (tol 1e-10); decay factors {[round(float(d), 2) for d in decay]} (>= 1.5)", dt, 30.0)


def test_criterion_14_determinism(tmp_path):
    t0 = time.perf_counter()
    configs = {
        "interval": {"mesh": {"family": "interval", "resolution": 64}, "k": 0, "bc": {"kind": "dirichlet"}},
        "disk": {"mesh": {"family": "disk", "resolution": 4}, "k": 1, "bc": {"kind": "maxwell_normal"}},
    }
    same = []
    for name, doc in configs.items():
        path = tmp_path / f"{name}.yaml"
        path.write_text(yaml.safe_dump({"experiment": name, "out": str(tmp_path / "runs"), "seed": 14, **doc}))
        (_, a), (_, b) = run(["verify", "--config", str(path)]), run(["verify", "--config", str(path)])
        ra, rb = (a / "report.json").read_bytes(), (b / "report.json").read_bytes()
        same.append(ra == rb and json.loads(ra)["seed"] == 14)
    dt = time.perf_counter() - t0
    record(14, "two verify runs with the same seed give byte-identical reports",
           all(same), f"identical: {dict(zip(configs, same))}", dt)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
