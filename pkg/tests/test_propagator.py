import numpy as np
import pytest

from cauchyform.boundary import build_constrained
from cauchyform.errors import DegreeError, PreconditionError
from cauchyform.mesh import generate_family
from cauchyform.propagator import (
    ADVANCED,
    CAUSAL,
    RETARDED,
    GreenOperator,
    SpacetimeForm,
    TimeGrid,
    antisymmetry_check,
    apply_green,
    box_residual,
    bump,
    causality_check,
    commutation_check,
    eigendecompose,
    image_sum_solution,
    kernel_initial_conditions,
    kernel_sample,
    phi,
    temporal_split,
)


@pytest.fixture(scope="module")
def interval_dec():
    c = generate_family("interval", 32)
    return eigendecompose(build_constrained(c, 0, "dirichlet"))


def test_decomposition_is_mass_orthonormal(interval_dec):
    assert interval_dec.orthonormality() < 1e-10
    assert interval_dec.residual() < 1e-10
    assert interval_dec.zero_count == 0


def test_kernel_on_an_eigenvector_is_sine_over_frequency(interval_dec):
    G = GreenOperator(interval_dec, CAUSAL)
    e = interval_dec.vectors[:, 2]
    lam = interval_dec.eigenvalues[2]
    for t in (0.1, 0.7, -0.4):
        assert np.allclose(G.reduced_kernel(t) @ e, np.sin(np.sqrt(lam) * t) / np.sqrt(lam) * e, atol=1e-12)


def test_zero_mode_kernel_is_linear():
    c = generate_family("annulus", 2)
    dec = eigendecompose(build_constrained(c, 0, "box_normal"))
    assert dec.zero_count == 1
    assert phi(0.0, 1.7) == pytest.approx(1.7)
    G = GreenOperator(dec, CAUSAL)
    z = dec.vectors[:, 0]
    assert np.allclose(G.reduced_kernel(2.5) @ z, 2.5 * z)


def test_retarded_and_advanced_support(interval_dec):
    ret, adv = GreenOperator(interval_dec, RETARDED), GreenOperator(interval_dec, ADVANCED)
    assert not ret.reduced_kernel(-0.3).any()
    assert not adv.reduced_kernel(0.3).any()
    assert np.allclose(ret.reduced_kernel(0.3) - adv.reduced_kernel(0.3), GreenOperator(interval_dec, CAUSAL).reduced_kernel(0.3))


def test_kernel_initial_conditions(interval_dec):
    ic = kernel_initial_conditions(GreenOperator(interval_dec, RETARDED), step=1e-5)
    assert ic["k0_max_abs"] == 0.0
    assert ic["slope_error"] < 1e-6
    assert kernel_sample(GreenOperator(interval_dec), 0.0).matrix.max() == 0


def test_adjoint_relation_between_retarded_and_advanced(interval_dec):
    grid = TimeGrid.span(0.0, 4.0, 200)
    res = antisymmetry_check(GreenOperator(interval_dec, RETARDED), GreenOperator(interval_dec, ADVANCED), grid, trials=10)
    assert res["max_relative_error"] < 1e-8
    assert res["causal_diagonal_max"] < 1e-8


def test_retarded_solution_solves_the_wave_equation(interval_dec):
    c = interval_dec.op.complex
    grid = TimeGrid.span(0.0, 3.0, 1200)
    x = c.vertices[:, 0]
    src = SpacetimeForm.separable(c, 0, grid, lambda t: bump(t, 1.0, 0.6), np.sin(2 * x))
    G = GreenOperator(interval_dec, RETARDED)
    sol = apply_green(G, src)
    assert box_residual(G, src, sol) < 1e-3
    # exact mode solution for the spatial eigenfunction sin 2x away from the source
    assert np.abs(sol.values[0]).max() == 0


def test_causal_propagation_matches_image_sum():
    L, w = np.pi, 0.4
    c = generate_family("interval", 128)
    op = build_constrained(c, 0, "dirichlet")
    G = GreenOperator(eigendecompose(op), CAUSAL)
    x = c.vertices[:, 0]
    g = lambda y: bump(y, L / 2, w)
    M = op.full_mass()
    for t in (0.3, 0.9, 1.6, 2.5):  # the last two are past the first reflection
        u = G.full_kernel(t) @ g(x)
        ex = image_sum_solution(g, L, x, t)
        assert np.sqrt((u - ex) @ M @ (u - ex) / (ex @ M @ ex)) < 0.01
    rep = causality_check(G, g(x), [L / 2], w, [0.2, 0.6, 1.0])
    assert rep["max_leakage"] < 1e-4


def test_preconditions():
    c = generate_family("interval", 8)
    dec = eigendecompose(build_constrained(c, 0, "dirichlet"))
    grid = TimeGrid.span(0.0, 1.0, 10)
    live = SpacetimeForm.separable(c, 0, grid, lambda t: np.ones_like(t), np.ones(9))
    with pytest.raises(PreconditionError, match="retarded"):
        apply_green(GreenOperator(dec, RETARDED), live)
    with pytest.raises(PreconditionError, match="advanced"):
        apply_green(GreenOperator(dec, ADVANCED), live)
    with pytest.raises(PreconditionError):
        GreenOperator(dec, "sideways")
    with pytest.raises(PreconditionError):
        TimeGrid(0.0, -1.0, 4)
    with pytest.raises(DegreeError):
        SpacetimeForm(c, 0, grid, np.zeros((3, 3)))


def test_zero_source_gives_zero_solution(interval_dec):
    c = interval_dec.op.complex
    grid = TimeGrid.span(0.0, 1.0, 20)
    for o in (RETARDED, ADVANCED, CAUSAL):
        sol = apply_green(GreenOperator(interval_dec, o), SpacetimeForm.zeros(c, 0, grid))
        assert not sol.values.any()


def test_temporal_split_sums_back():
    c = generate_family("interval", 4)
    grid = TimeGrid.span(0.0, 2.0, 40)
    f = SpacetimeForm.separable(c, 0, grid, np.cos, np.arange(5.0))
    plus, minus = temporal_split(f, 0.5, 1.5)
    assert np.allclose(plus.values + minus.values, f.values)
    assert not plus.values[grid.samples < 0.5].any()
    assert not minus.values[grid.samples > 1.5].any()
    with pytest.raises(PreconditionError):
        temporal_split(f, 1.0, 1.0)


def test_csv_round_trip(tmp_path):
    c = generate_family("disk", 2)
    grid = TimeGrid.span(0.0, 1.0, 5)
    rng = np.random.default_rng(0)
    f = SpacetimeForm(c, 1, grid, rng.standard_normal((6, c.count(0) + c.count(1))))
    f.to_csv(tmp_path / "f.csv")
    g = SpacetimeForm.from_csv(tmp_path / "f.csv", c, 1, grid)
    assert np.array_equal(f.values, g.values)


def test_csv_schema_violations(tmp_path):
    c = generate_family("interval", 2)
    grid = TimeGrid.span(0.0, 1.0, 2)
    (tmp_path / "a.csv").write_text("time,value\n0,1\n")
    with pytest.raises(PreconditionError, match="columns"):
        SpacetimeForm.from_csv(tmp_path / "a.csv", c, 0, grid)
    (tmp_path / "b.csv").write_text("sample,tau,degree,simplex,value\n0,0,1,0,1.0\n")
    with pytest.raises(PreconditionError, match="outside the block"):
        SpacetimeForm.from_csv(tmp_path / "b.csv", c, 0, grid)


@pytest.mark.parametrize("bc, k", [("box_tangential", 1), ("box_tangential", 2), ("box_normal", 0), ("box_normal", 1)])
def test_commutation_on_interior_forms(bc, k):
    res = commutation_check(generate_family("annulus", 3), bc, k)
    assert res["interior_residual"] < 1e-8


def test_commutation_degree_range():
    with pytest.raises(DegreeError):
        commutation_check(generate_family("annulus", 2), "box_normal", 2)
