import numpy as np
import pytest

from conftest import hubbard_dimer, random_hermitian, random_w
from oracles import dense_hamiltonian, jw_annihilators, jw_index
from rdmft.fock import enumerate_basis
from rdmft.hamiltonian import (HamiltonianSpec, Potential, add_potential, build_operator, chemical_potential,
                               interaction_floor, operator_inequality_margin, require_valid,
                               validate_potential, validate_spec)


def test_hermitian_fermion_spec_passes(rng):
    spec = HamiltonianSpec("fermion", 3, random_hermitian(rng, 3), w=random_w(rng, 3, -1))
    rep = validate_spec(spec)
    assert rep.ok and rep.mandatory_ok
    assert rep["h1_hermitian"].passed


def test_non_hermitian_h1_fails():
    spec = HamiltonianSpec("fermion", 2, np.array([[0, 1], [0, 0]], complex))
    rep = validate_spec(spec)
    assert not rep["h1_hermitian"].passed
    with pytest.raises(ValueError, match="h1_hermitian"):
        require_valid(spec)


def test_boson_pairing_stability_flag():
    ok = HamiltonianSpec("boson", 1, np.array([[1.0]]), pairing=np.array([[0.3]]))
    bad = HamiltonianSpec("boson", 1, np.array([[1.0]]), pairing=np.array([[0.6]]))
    assert validate_spec(ok)["pairing_stability"].passed
    assert not validate_spec(bad)["pairing_stability"].passed


def test_boson_negative_interaction_reports_floor():
    # pair-space matrix diag(-0.1, 1) on the symmetric states of two modes
    w = np.zeros((2,) * 4, complex)
    w[0, 0, 0, 0] = -0.1
    w[1, 1, 1, 1] = 1.0
    w[0, 1, 1, 0] = w[1, 0, 0, 1] = w[0, 1, 0, 1] = w[1, 0, 1, 0] = 1.0
    spec = HamiltonianSpec("boson", 2, np.eye(2, dtype=complex), w=w)
    chk = validate_spec(spec)["interaction_positive"]
    assert not chk.passed
    assert chk.value == pytest.approx(-0.1, abs=1e-12)


def test_interaction_floor_positive_construction(rng):
    w = random_w(rng, 3, +1, floor=0.2)
    assert interaction_floor(w, "boson") >= 0.2 - 1e-12


def test_pairing_symmetry_enforced():
    d = np.array([[0, 1], [0.5, 0]], complex)
    assert not validate_spec(HamiltonianSpec("fermion", 2, np.eye(2), pairing=d))["pairing_symmetry"].passed


def test_build_operator_single_modes():
    h = build_operator(HamiltonianSpec("fermion", 1, np.array([[0.7]])), enumerate_basis(1, "fermion"))
    assert np.allclose(h.toarray(), np.diag([0, 0.7]))
    h = build_operator(HamiltonianSpec("boson", 1, np.array([[0.7]])), enumerate_basis(1, "boson", 3))
    assert np.allclose(h.toarray(), np.diag([0, 0.7, 1.4, 2.1]))


def test_hubbard_dimer_two_particle_ground():
    spec = hubbard_dimer()
    fb = enumerate_basis(4, "fermion")
    h = build_operator(spec, fb).toarray()
    sl = dict(fb.sectors())[2]
    e0 = np.linalg.eigvalsh(h[sl, sl])[0]
    assert e0 == pytest.approx(1 - np.sqrt(5), abs=1e-12)
    # independent Jordan-Wigner assembly of the same operator
    perm = np.array([jw_index(c) for c in fb.configurations])
    oracle = dense_hamiltonian(jw_annihilators(4), spec.h1, spec.w)[np.ix_(perm, perm)]
    assert np.allclose(h, oracle, atol=1e-13)


@pytest.mark.parametrize("nb", [2, 3])
def test_general_fermion_operator_matches_oracle(rng, nb):
    d = rng.normal(size=(nb, nb)) + 1j * rng.normal(size=(nb, nb))
    d = d - d.T
    spec = HamiltonianSpec("fermion", nb, random_hermitian(rng, nb), 0.3, random_w(rng, nb, -1),
                           None, d)
    fb = enumerate_basis(nb, "fermion")
    perm = np.array([jw_index(c) for c in fb.configurations])
    oracle = dense_hamiltonian(jw_annihilators(nb), spec.h1, spec.w, pairing=d, h0=0.3)
    assert np.allclose(build_operator(spec, fb).toarray(), oracle[np.ix_(perm, perm)], atol=1e-12)


def test_add_potential_examples():
    spec = HamiltonianSpec("boson", 2, np.diag([1.0, 2.0]).astype(complex))
    assert np.array_equal(add_potential(spec, np.zeros((2, 2))).h1, spec.h1)
    out = add_potential(spec, Potential(np.diag([-0.5, 0.5])))
    assert np.allclose(out.h1, np.diag([0.5, 2.5]))
    with pytest.raises(ValueError):
        Potential(np.array([[0, 1], [0, 0]]))


def test_validate_potential_examples():
    spec = HamiltonianSpec("boson", 1, np.array([[1.0]]))
    assert not validate_potential(spec, np.array([[-2.0]])).passed
    assert validate_potential(spec, np.array([[-2.0]])).min_eigenvalue == pytest.approx(-1.0)
    assert validate_potential(spec, np.array([[-0.5]])).passed
    fspec = HamiltonianSpec("fermion", 2, np.eye(2))
    assert validate_potential(fspec, -100 * np.eye(2)).passed


def test_chemical_potential_examples(rng):
    assert chemical_potential(np.zeros((2, 2))) == 0
    assert chemical_potential(np.diag([1.0, 2.0, 3.0])) == -6
    v = random_hermitian(rng, 3)
    np.fill_diagonal(v, 0)
    assert chemical_potential(v) == 0


def test_shape_errors():
    with pytest.raises(ValueError):
        HamiltonianSpec("fermion", 2, np.eye(3))
    with pytest.raises(ValueError):
        HamiltonianSpec("fermion", 2, np.eye(2), w=np.zeros((2, 2, 2)))
    spec = HamiltonianSpec("fermion", 2, np.eye(2))
    with pytest.raises(ValueError):
        build_operator(spec, enumerate_basis(3, "fermion"))


def test_operator_inequality_margin_basic():
    a = np.diag(np.sqrt(np.arange(1, 5.0)), 1)
    # |alpha|^2 a^dag a + a^dag a - 2 Re(alpha a^dag a) = |alpha - 1|^2 a^dag a >= 0
    assert operator_inequality_margin(a, a, 0.3 + 0.2j) >= -1e-12
