import numpy as np
import pytest

from conftest import hubbard_dimer, random_hermitian, random_w
from rdmft import reference
from rdmft.ensemble import OneRDM
from rdmft.functional import (InversionError, dual_value, exchange_energy, gamma_from_v, hartree_energy,
                              hxc_decompose, universal_functional, v_from_gamma)
from rdmft.hamiltonian import HamiltonianSpec


def _fermion_model(rng, nb=3, interacting=True):
    w = random_w(rng, nb, -1, scale=0.5) if interacting else None
    return HamiltonianSpec("fermion", nb, random_hermitian(rng, nb), w=w)


def _boson_model(rng):
    w = random_w(rng, 2, +1, floor=0.3, scale=0.3)
    return HamiltonianSpec("boson", 2, random_hermitian(rng, 2, 0.2) + 2 * np.eye(2), w=w)


def _interior_gamma(rng, nb, stats, lo=0.15, hi=0.85):
    q, _ = np.linalg.qr(rng.normal(size=(nb, nb)) + 1j * rng.normal(size=(nb, nb)))
    n = rng.uniform(lo, hi, nb)
    return OneRDM((q * n) @ q.conj().T, stats)


def test_gamma_from_v_occupations():
    spec = HamiltonianSpec("fermion", 2, np.diag([0.5, -0.3]).astype(complex))
    g = gamma_from_v(spec, np.diag([0.1, 0.2]), 1.0)
    assert np.allclose(np.diag(g.matrix).real, 1 / (np.exp([0.6, -0.1]) + 1), atol=1e-10)
    bspec = HamiltonianSpec("boson", 1, np.array([[1.0]]))
    g = gamma_from_v(bspec, np.array([[0.5]]), 1.0)
    assert g.matrix[0, 0].real == pytest.approx(1 / np.expm1(1.5), abs=1e-10)
    with pytest.raises(ValueError, match="invalid potential"):
        gamma_from_v(bspec, np.array([[-2.0]]), 1.0)


def test_constant_shift_lowers_particle_number(rng):
    spec = _fermion_model(rng)
    counts = [gamma_from_v(spec, c * np.eye(3), 1.0).trace for c in (-1.0, 0.0, 1.0)]
    assert counts[0] > counts[1] > counts[2]


@pytest.mark.parametrize("seed", range(5))
def test_roundtrip_fermion(seed):
    rng = np.random.default_rng(seed)
    spec = _fermion_model(rng)
    v = random_hermitian(rng, 3, 0.5)
    g = gamma_from_v(spec, v, 1.0)
    res = v_from_gamma(spec, g, 1.0)
    assert res.converged and res.gamma_residual < 1e-9
    assert np.linalg.norm(res.v.v - v) < 1e-6


def test_roundtrip_boson(rng):
    spec = _boson_model(rng)
    v = random_hermitian(rng, 2, 0.2)
    g = gamma_from_v(spec, v, 1.0)
    res = v_from_gamma(spec, g, 1.0)
    assert res.converged
    assert np.linalg.norm(res.v.v - v) < 1e-6


@pytest.mark.parametrize("stats", ["fermion", "boson"])
def test_non_interacting_closed_form_inverse(rng, stats):
    nb = 3 if stats == "fermion" else 2
    h1 = random_hermitian(rng, nb, 0.5) + (2 * np.eye(nb) if stats == "boson" else 0)
    spec = HamiltonianSpec(stats, nb, h1, h0=0.25)
    g = _interior_gamma(rng, nb, stats)
    res = v_from_gamma(spec, g, 1.0)
    n, u = np.linalg.eigh(g.matrix)
    sign = 1 if stats == "fermion" else -1
    eps = np.log((1 - sign * n) / n)
    assert np.allclose(spec.h1 + res.v.v, (u * eps) @ u.conj().T, atol=1e-8)
    f, _ = universal_functional(spec, g, 1.0)
    assert f == pytest.approx(reference.f_s(g, h1, 1.0, stats) + 0.25, abs=1e-8)


def test_boundary_targets_refused():
    spec = HamiltonianSpec("fermion", 2, np.eye(2))
    for occ in ([1.0, 0.5], [0.0, 0.5], [1.0 - 1e-9, 0.5]):
        with pytest.raises(ValueError, match="interior"):
            v_from_gamma(spec, np.diag(occ), 1.0)
    with pytest.raises(ValueError):
        v_from_gamma(HamiltonianSpec("boson", 1, np.eye(1)), np.array([[0.0]]), 1.0)


def test_iteration_cap_reports_residual(rng):
    spec = _fermion_model(rng)
    g = _interior_gamma(rng, 3, "fermion")
    res = v_from_gamma(spec, g, 1.0, max_iter=1)
    assert not res.converged and res.iterations == 1
    assert res.gamma_residual > 0
    with pytest.raises(InversionError) as exc:
        universal_functional(spec, g, 1.0, max_iter=1)
    assert exc.value.result.gamma_residual == res.gamma_residual


def test_strict_convexity(rng):
    spec = _fermion_model(rng)
    for _ in range(3):
        g1, g2 = _interior_gamma(rng, 3, "fermion"), _interior_gamma(rng, 3, "fermion")
        mid = OneRDM(0.5 * (g1.matrix + g2.matrix), "fermion")
        f1, f2, fm = (universal_functional(spec, g, 1.0)[0] for g in (g1, g2, mid))
        assert fm < 0.5 * (f1 + f2)


def test_differentiability_witness(rng):
    spec = _fermion_model(rng)
    g = _interior_gamma(rng, 3, "fermion", 0.3, 0.7)
    _, v = universal_functional(spec, g, 1.0)
    t = 1e-4
    for _ in range(4):
        d = random_hermitian(rng, 3)
        d /= np.linalg.norm(d)
        fp, _ = universal_functional(spec, OneRDM(g.matrix + t * d, "fermion"), 1.0)
        fm, _ = universal_functional(spec, OneRDM(g.matrix - t * d, "fermion"), 1.0)
        expected = -float(np.real(np.sum(v.v * d.T)))
        assert (fp - fm) / (2 * t) == pytest.approx(expected, rel=1e-3, abs=1e-6)


def test_dual_gap_and_fenchel_young(rng):
    spec = _fermion_model(rng)
    g = _interior_gamma(rng, 3, "fermion")
    f, v = universal_functional(spec, g, 1.0)
    assert dual_value(spec, g, v, 1.0) == pytest.approx(f, abs=1e-9)
    for _ in range(10):
        probe = v.v + random_hermitian(rng, 3, 0.5)
        assert dual_value(spec, g, probe, 1.0) <= f + 1e-9


def test_determinism(rng):
    spec = _fermion_model(rng)
    g = _interior_gamma(rng, 3, "fermion")
    a, b = v_from_gamma(spec, g, 1.0), v_from_gamma(spec, g, 1.0)
    assert np.array_equal(a.v.v, b.v.v) and a.iterations == b.iterations


def test_beta_trend(rng):
    # F = E - S / beta at the minimizer with S >= 0, so F rises with beta
    spec = _fermion_model(rng)
    g = _interior_gamma(rng, 3, "fermion", 0.25, 0.75)
    values = [universal_functional(spec, g, beta)[0] for beta in (1, 2, 5, 10)]
    assert np.all(np.diff(values) > 0)


def test_hxc_zero_interaction(rng):
    spec = HamiltonianSpec("fermion", 3, random_hermitian(rng, 3), w=np.zeros((3,) * 4))
    dec = hxc_decompose(spec, _interior_gamma(rng, 3, "fermion"), 1.0)
    for val in (dec.E_H, dec.E_x, dec.E_c, dec.S_c, dec.F_Hxc):
        assert abs(val) < 1e-8
    with pytest.raises(ValueError, match="two-body"):
        hxc_decompose(HamiltonianSpec("fermion", 1, np.eye(1)), np.array([[0.5]]), 1.0)


def test_hartree_exchange_index_collapse():
    w = np.zeros((3,) * 4)
    for i, val in enumerate((0.5, 1.0, 2.0)):
        w[i, i, i, i] = val
    n = np.array([0.2, 0.5, 0.9])
    expected = 0.5 * np.sum(np.array([0.5, 1.0, 2.0]) * n**2)
    assert hartree_energy(w, np.diag(n)) == pytest.approx(expected)
    assert exchange_energy(w, np.diag(n)) == pytest.approx(expected)


def test_hubbard_dimer_correlation():
    spec = hubbard_dimer()
    g = gamma_from_v(spec, np.zeros((4, 4)), 1.0)
    dec = hxc_decompose(spec, g, 1.0)
    # frozen from dense Jordan-Wigner diagonalization of the 16-state Fock space
    assert dec.E_c == pytest.approx(-0.2921615926853721, abs=1e-8)
    assert dec.S_c == pytest.approx(-0.13496456707958604, abs=1e-8)
    assert dec.E_H == pytest.approx(0.5635751317989915, abs=1e-8)
    assert dec.F == pytest.approx(-2.6839403651195903, abs=1e-8)
    assert dec.F_Hxc == pytest.approx(dec.E_H - dec.E_x + dec.E_c - dec.S_c, abs=1e-8)
