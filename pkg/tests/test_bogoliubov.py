import numpy as np
import pytest

from conftest import random_hermitian
from oracles import boson_annihilators, dense_hamiltonian, jw_annihilators, thermal
from rdmft.bogoliubov import (QuadraticSpec, diagonalize, eliminate_source, half_dimension_energies,
                              quadratic_thermodynamics, takagi, youla)


def _random_pairing(rng, nb, sign, scale=1.0):
    d = rng.normal(size=(nb, nb)) + 1j * rng.normal(size=(nb, nb))
    return scale * 0.5 * (d + sign * d.T)


def _ed_levels(spec, cutoff=None):
    if spec.statistics.value == "fermion":
        ops = jw_annihilators(spec.n_basis)
    else:
        ops = boson_annihilators(spec.n_basis, cutoff)
    h = dense_hamiltonian(ops, spec.omega, source=spec.source, pairing=spec.pairing, h0=spec.offset)
    return np.linalg.eigvalsh(h)


def test_takagi_examples():
    u, s = takagi(np.array([[0, 1], [1, 0]], complex))
    assert np.allclose(s, [1, 1])
    u, s = takagi(np.diag([2.0, -3.0]).astype(complex))
    assert np.allclose(s, [3, 2])
    assert np.allclose(u.T @ np.diag([2.0, -3.0]) @ u, np.diag(s), atol=1e-12)
    with pytest.raises(ValueError):
        takagi(np.array([[0, 1], [0, 0]], complex))


def test_youla_example():
    d = np.array([[0, 2j], [-2j, 0]])
    u, s = youla(d)
    assert np.allclose(s, [2])
    assert np.allclose(u.T @ d @ u, [[0, 2], [-2, 0]], atol=1e-12)
    with pytest.raises(ValueError):
        youla(np.eye(2))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_takagi_and_youla_random(rng, n):
    for _ in range(50 // 6 + 1):
        d = _random_pairing(rng, n, +1)
        u, s = takagi(d)
        assert np.allclose(u.conj().T @ u, np.eye(n), atol=1e-11)
        assert np.allclose(u.T @ d @ u, np.diag(s), atol=1e-10)
        assert np.all(np.diff(s) <= 1e-12)
        a = _random_pairing(rng, n, -1)
        u, s = youla(a)
        assert np.allclose(u.conj().T @ u, np.eye(n), atol=1e-11)
        canon = np.zeros((n, n))
        for k, sk in enumerate(s):
            canon[2 * k, 2 * k + 1], canon[2 * k + 1, 2 * k] = sk, -sk
        assert np.allclose(u.T @ a @ u, canon, atol=1e-10)


def test_takagi_degenerate():
    u, s = takagi(np.eye(3, dtype=complex))
    assert np.allclose(s, 1)
    assert np.allclose(u.T @ u, np.eye(3), atol=1e-12)


def test_single_boson_mode_examples():
    sol = diagonalize(QuadraticSpec("boson", [[2.0]], pairing=[[0.6]]))
    assert sol.stable
    assert sol.quasiparticle_energies[0] == pytest.approx(0.8 * 2, rel=1e-12)
    assert sol.ground_constant == pytest.approx((1.6 - 2.0) / 2, abs=1e-12)
    for d in (1.0, 1.2):
        sol = diagonalize(QuadraticSpec("boson", [[2.0]], pairing=[[d]]))
        assert not sol.stable and sol.U is None
        with pytest.raises(ValueError):
            quadratic_thermodynamics(sol, 1.0)


def test_unit_frequency_boson_gap():
    # omega = 1: spacing sqrt(1 - 4 d^2) = 0.8 at d = 0.3
    sol = diagonalize(QuadraticSpec("boson", [[1.0]], pairing=[[0.3]]))
    assert sol.quasiparticle_energies[0] == pytest.approx(0.8, rel=1e-12)
    e = _ed_levels(QuadraticSpec("boson", [[1.0]], pairing=[[0.3]]), 60)
    assert e[1] - e[0] == pytest.approx(0.8, abs=1e-6)
    assert e[0] == pytest.approx(sol.ground_constant, abs=1e-8)


def test_fermion_pairing_example():
    sq = QuadraticSpec("fermion", np.eye(2), pairing=np.array([[0, 0.5], [-0.5, 0]]))
    sol = diagonalize(sq)
    assert np.allclose(sol.quasiparticle_energies, np.sqrt(2), atol=1e-12)
    assert np.allclose(sol.levels(4), [1 - np.sqrt(2), 1, 1, 1 + np.sqrt(2)], atol=1e-12)
    assert np.allclose(_ed_levels(sq), sol.levels(4), atol=1e-12)


@pytest.mark.parametrize("nb", [2, 3, 4])
def test_fermion_spectrum_matches_ed(rng, nb):
    for _ in range(3):
        sq = QuadraticSpec("fermion", random_hermitian(rng, nb), pairing=_random_pairing(rng, nb, -1, 0.5),
                           offset=0.2)
        sol = diagonalize(sq)
        assert max(sol.metric_residuals()) < 1e-11
        k = min(10, 2**nb)
        assert np.allclose(sol.levels(k), _ed_levels(sq)[:k], atol=1e-10)


@pytest.mark.parametrize("nb", [1, 2])
def test_boson_spectrum_matches_truncated_ed(rng, nb):
    om = random_hermitian(rng, nb, 0.3) + 2.0 * np.eye(nb)
    sq = QuadraticSpec("boson", om, pairing=_random_pairing(rng, nb, +1, 0.15))
    sol = diagonalize(sq)
    assert sol.stable
    assert max(sol.metric_residuals()) < 1e-11
    cutoff = 40 if nb == 1 else 16
    assert np.allclose(sol.levels(4), _ed_levels(sq, cutoff)[:4], atol=1e-6)


def test_half_dimension_reduction(rng):
    for stats, sign in (("fermion", -1), ("boson", +1)):
        om = random_hermitian(rng, 4, 0.5).real + (4 * np.eye(4) if stats == "boson" else 0)
        om = 0.5 * (om + om.T)
        d = _random_pairing(rng, 4, sign, 0.3).real
        sq = QuadraticSpec(stats, om, pairing=d)
        sol = diagonalize(sq)
        assert sol.stable
        full = np.sort(sol.quasiparticle_energies)
        assert np.allclose(half_dimension_energies(sq), full, atol=1e-9)


def test_eliminate_source_example():
    sq = QuadraticSpec("boson", [[2.0]], source=[1.0])
    shift, c_h, free = eliminate_source(sq)
    assert shift[0] == pytest.approx(0.5)
    assert c_h == pytest.approx(0.5)
    sol = diagonalize(sq)
    assert sol.ground_constant == pytest.approx(-0.5, abs=1e-12)
    assert _ed_levels(sq, 40)[0] == pytest.approx(-0.5, abs=1e-10)


def test_source_with_pairing_matches_ed(rng):
    sq = QuadraticSpec("boson", [[1.5, 0.2], [0.2, 2.0]], source=[0.3 + 0.1j, -0.2],
                       pairing=[[0.1, 0.05], [0.05, -0.1]])
    sol = diagonalize(sq)
    assert np.allclose(sol.levels(3), _ed_levels(sq, 18)[:3], atol=1e-6)


def test_fermion_source_rejected():
    with pytest.raises(ValueError, match="fermionic source"):
        eliminate_source(QuadraticSpec("fermion", [[1.0]], source=[0.5]))


def test_singular_source_reports_zero_mode():
    with pytest.raises(ValueError, match="zero mode"):
        eliminate_source(QuadraticSpec("boson", [[0.0]], source=[1.0]))


@pytest.mark.parametrize("stats", ["fermion", "boson"])
def test_quadratic_thermodynamics_matches_ed(rng, stats):
    nb = 2
    sign = -1 if stats == "fermion" else 1
    om = random_hermitian(rng, nb, 0.3) + 1.5 * np.eye(nb)
    sq = QuadraticSpec(stats, om, pairing=_random_pairing(rng, nb, sign, 0.2), offset=0.1)
    th = quadratic_thermodynamics(diagonalize(sq), 1.3)
    if stats == "fermion":
        ops = jw_annihilators(nb)
    else:
        ops = boson_annihilators(nb, 25)
    h = dense_hamiltonian(ops, sq.omega, pairing=sq.pairing, h0=sq.offset)
    _, log_z, energy, ent = thermal(h, 1.3)
    assert th.log_Z == pytest.approx(log_z, abs=1e-8)
    assert th.energy == pytest.approx(energy, abs=1e-8)
    assert th.entropy == pytest.approx(ent, abs=1e-8)


def test_quadratic_spec_validation():
    with pytest.raises(ValueError, match="Hermitian"):
        QuadraticSpec("boson", [[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(ValueError, match="antisymmetric"):
        QuadraticSpec("fermion", np.eye(2), pairing=np.eye(2))
