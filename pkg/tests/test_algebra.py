import numpy as np
import pytest

from cauchyform.algebra import (
    PairingMatrix,
    box_quotient_generator,
    build_generators,
    commutator_check,
    generator_defects,
    harmonic_fields,
    pairing_matrix,
    radical,
)
from cauchyform.errors import PreconditionError
from cauchyform.fields import poly_bump
from cauchyform.maxwell import interior_coclosed_basis, pairing_gtilde
from cauchyform.mesh import generate_family

BCS = ("maxwell_tangential", "maxwell_normal")


@pytest.fixture(scope="module")
def disk():
    return generate_family("disk", 4)


@pytest.mark.parametrize("bc", BCS)
def test_pairing_matrix_is_antisymmetric(disk, bc):
    gens = build_generators(disk, 1, bc, seed=0)
    P = pairing_matrix(disk, 1, bc, gens, modes=None)
    assert np.abs(P.W).max() > 0
    assert P.antisymmetry < 1e-8


def test_pairing_matrix_entries_match_closed_form_pairing(disk):
    bc = "maxwell_normal"
    gens = build_generators(disk, 1, bc, budget=6, seed=0)
    P = pairing_matrix(disk, 1, bc, gens, modes=None)
    (pa, va), (pb, vb) = gens[0].terms[0], gens[3].terms[0]
    lay = slice(disk.count(0), None)
    g = pairing_gtilde(disk, 1, bc, (pa, va[lay]), (pb, vb[lay]))
    assert P.W[0, 3] == pytest.approx(g, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("bc", BCS)
def test_generators_are_coclosed_and_interior(disk, bc):
    gens = build_generators(disk, 1, bc, budget=8, seed=1)
    for row in generator_defects(disk, 1, bc, gens):
        assert row["delta"] < 1e-10
        assert row["boundary"] == 0.0


@pytest.mark.parametrize("bc", BCS)
def test_disk_radical_is_trivial(disk, bc):
    R = radical(pairing_matrix(disk, 1, bc, build_generators(disk, 1, bc, seed=0)))
    assert R.dimension == 0
    assert R.decided


def test_annulus_harmonic_fields():
    c = generate_family("annulus", 3)
    assert harmonic_fields(c, 1, "maxwell_normal").shape[1] == 1
    assert harmonic_fields(c, 1, "maxwell_tangential").shape[1] == 1


def test_budget_too_small():
    c = generate_family("disk", 4)
    with pytest.raises(PreconditionError, match="budget"):
        build_generators(c, 1, "maxwell_normal", budget=1)


def test_empty_interior_is_reported():
    c = generate_family("annulus", 2)
    with pytest.raises(PreconditionError, match="refine"):
        build_generators(c, 1, "maxwell_normal")


def test_box_quotient_generators_pair_to_zero(disk):
    bc = "maxwell_normal"
    N = interior_coclosed_basis(disk, 1)
    q = box_quotient_generator(disk, 1, bc, poly_bump(0.0, 0.5), N[:, 0])
    gens = build_generators(disk, 1, bc, budget=6, seed=2)
    P = pairing_matrix(disk, 1, bc, gens + [q], modes=None)
    scale = np.abs(P.W).max()
    assert np.abs(P.W[-1]).max() < 1e-9 * scale
    R = radical(P)
    assert q.label in R.null_generators


def test_radical_detects_a_central_direction():
    # W has a one-dimensional kernel that a candidate row detects
    W = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    P = PairingMatrix(W, ["a", "b", "c"], ["exact"] * 3, "maxwell_normal", None, np.array([[0.0, 0.0, 2.0]]), ["static:0"])
    R = radical(P)
    assert (R.rank, R.rank_extended, R.dimension) == (2, 3, 1)
    assert np.allclose(np.abs(R.basis[:, 0]), [0, 0, 1])
    P0 = PairingMatrix(W, ["a", "b", "c"], ["exact"] * 3, "maxwell_normal", None, np.zeros((0, 3)), [])
    assert radical(P0).dimension == 0
    assert radical(P0).null_generators == ["c"]


def test_rank_indecision_is_flagged():
    # singular values straddle the threshold with no clear gap
    P = PairingMatrix(np.diag([1.0, 2e-8, 0.5e-8]), list("abc"), ["exact"] * 3, "maxwell_normal", None)
    R = radical(P)
    assert not R.decided
    assert R.warnings


def test_commutator_relation(disk):
    P = pairing_matrix(disk, 1, "maxwell_normal", build_generators(disk, 1, "maxwell_normal", budget=6), modes=None)
    assert commutator_check(P) < 1e-15
