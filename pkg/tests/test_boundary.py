import numpy as np
import pytest

from cauchyform.boundary import (
    BCKind,
    as_bc,
    boundary_corners,
    boundary_pairing,
    box_green_defect,
    box_green_relative,
    build_constrained,
    green_defect,
    normal_trace,
    subcomplex,
    tangential_trace,
    trace_free,
    traces,
    triple_identity_check,
)
from cauchyform.dec import DiscreteForm, derham, interpolate
from cauchyform.errors import BoundaryConditionError, DegreeError
from cauchyform.mesh import generate_family

BCS = [
    BCKind("dirichlet"),
    BCKind("box_tangential"),
    BCKind("box_normal"),
    BCKind("robin_tangential", 2.0),
    BCKind("robin_normal", -2.0),
]


def test_traces_of_smooth_forms_on_interval():
    c = generate_family("interval", 32)
    x = interpolate(c, 0, lambda p: p[:, 0] ** 2)
    assert np.allclose(tangential_trace(x).values, [0.0, np.pi**2])
    dx = interpolate(c, 1, lambda p: np.ones((len(p), 1)))
    # outward normal component of dx is -1 at the left end and +1 at the right
    assert np.allclose(normal_trace(dx).values, [-1.0, 1.0])


def test_normal_trace_of_radial_field_on_disk():
    errs = []
    for r in (2, 4):
        c = generate_family("disk", r)
        w = interpolate(c, 1, lambda p: p)  # radial field, nu . x = 1 on the unit circle
        errs.append(np.abs(normal_trace(w).values - 1.0).max())
    assert errs[1] < errs[0] < 0.5


def test_rotation_field_has_small_normal_trace():
    c = generate_family("disk", 4)
    w = interpolate(c, 1, lambda p: np.stack([-p[:, 1], p[:, 0]], 1))
    assert np.abs(normal_trace(w).values).max() < 0.05


@pytest.mark.parametrize("family", ["interval", "disk", "annulus"])
def test_green_formula_equals_boundary_pairing(family):
    c = generate_family(family, 3)
    rng = np.random.default_rng(1)
    for k in range(c.n):
        a = DiscreteForm(c, k, rng.standard_normal(c.count(k)))
        b = DiscreteForm(c, k + 1, rng.standard_normal(c.count(k + 1)))
        lhs = green_defect(a, b)
        rhs = boundary_pairing(c, k + 1, a.values, b.values)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


def test_bc_parsing_and_robin_signs():
    assert as_bc("perp").tag == "box_normal"
    assert as_bc({"kind": "f_parallel", "f": 1.0}).tag == "robin_tangential"
    with pytest.raises(BoundaryConditionError, match="f <= 0"):
        BCKind("robin_normal", 1.0)
    with pytest.raises(BoundaryConditionError, match="f >= 0"):
        BCKind("robin_tangential", -0.5)
    with pytest.raises(BoundaryConditionError):
        BCKind("robin_normal")
    with pytest.raises(BoundaryConditionError):
        BCKind("dirichlet", 1.0)
    with pytest.raises(BoundaryConditionError):
        BCKind("neumannish")


def test_robin_coefficient_length_is_checked():
    c = generate_family("disk", 2)
    with pytest.raises(BoundaryConditionError, match="values"):
        build_constrained(c, 1, BCKind("robin_tangential", [1.0, 2.0]))


@pytest.mark.parametrize("bc", BCS, ids=lambda b: b.tag)
@pytest.mark.parametrize("family, res", [("interval", 16), ("annulus", 2)])
def test_constrained_operators_are_symmetric_and_positive(bc, family, res):
    c = generate_family(family, res)
    rng = np.random.default_rng(0)
    for k in range(c.n + 2):
        op = build_constrained(c, k, bc)
        assert op.symmetry_error() < 1e-12
        assert op.positivity()["ok"]
        if op.size:
            a, b = op.random_form(rng), op.random_form(rng)
            assert box_green_relative(a, b) < 1e-10
            assert abs(box_green_defect(a, b)) < 1e-8 * op.norm() * np.linalg.norm(a.coeffs) * np.linalg.norm(b.coeffs)


def test_dirichlet_scalar_has_no_zero_modes_but_normal_does():
    c = generate_family("interval", 16)
    lam_d = build_constrained(c, 0, "dirichlet").generalized_eigenvalues()
    lam_n = build_constrained(c, 0, "box_normal").generalized_eigenvalues()
    assert lam_d.min() > 0.5
    assert abs(lam_n.min()) < 1e-9


def test_constrained_forms_respect_their_traces():
    c = generate_family("annulus", 2)
    tr = traces(c)
    rel = subcomplex(c, "relative")
    assert np.abs(tr.T(1).toarray() @ rel.P(1)).max() == 0
    nor = subcomplex(c, "normal")
    assert np.abs(tr.B(1).toarray() @ nor.P(1)).max() < 1e-12
    assert np.abs((tr.B(2) @ derham(c).d(1)).toarray() @ nor.P(1)).max() < 1e-12


def test_subcomplexes_are_closed_under_d():
    c = generate_family("disk", 3)
    D = derham(c)
    for kind in ("relative", "normal"):
        sc = subcomplex(c, kind)
        for j in range(c.n):
            image = D.d(j) @ sc.P(j)
            P = sc.P(j + 1)
            proj = P @ np.linalg.lstsq(P, image, rcond=None)[0]
            assert np.abs(image - proj).max() < 1e-10


def test_corners_are_found_only_on_polygonal_boundaries():
    assert len(boundary_corners(generate_family("rectangle", 3))) == 4
    assert boundary_corners(generate_family("disk", 3)) == set()
    assert boundary_corners(generate_family("interval", 3)) == set()


def test_trace_free_forms_have_zero_traces():
    c = generate_family("disk", 4)
    tr = traces(c)
    rng = np.random.default_rng(2)
    for j in range(3):
        v = rng.standard_normal(c.count(j)) * trace_free(c, j)
        assert np.abs(tr.T(j) @ v).max(initial=0.0) == 0
        assert np.abs(tr.B(j) @ v).max(initial=0.0) == 0


def test_triple_identity_on_interval_decays():
    rep = triple_identity_check(generate_family("interval", 16), 1, samples=5)
    assert rep["interior_max"] < 1e-10
    assert rep["max_relative_discrepancy"] < 1e-10
    assert rep["decay_factor"] >= 1.5


def test_block_degree_out_of_range():
    c = generate_family("interval", 4)
    with pytest.raises(DegreeError):
        build_constrained(c, 3, "dirichlet")
    with pytest.raises(DegreeError):
        normal_trace(DiscreteForm(c, 0, np.zeros(5)))
