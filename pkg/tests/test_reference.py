import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from rdmft import reference as ref
from rdmft.ensemble import thermal_state
from rdmft.hamiltonian import HamiltonianSpec

E = np.e


def test_occupation_examples():
    assert ref.occupations_from_energies([0.0], 3.7, "fermion")[0] == 0.5
    assert ref.occupations_from_energies([1.0], 1.0, "fermion")[0] == pytest.approx(0.2689414213699951, abs=1e-15)
    assert ref.occupations_from_energies([1.0], 1.0, "boson")[0] == pytest.approx(0.5819767068693265, abs=1e-15)
    with pytest.raises(ValueError):
        ref.occupations_from_energies([0.0], 1.0, "boson")


def test_energy_examples():
    assert ref.energies_from_occupations([0.5], 2.0, "fermion")[0] == 0.0
    assert ref.energies_from_occupations([1 / (E - 1)], 1.0, "boson")[0] == pytest.approx(1.0, abs=1e-14)
    for bad in ([0.0], [1.0]):
        with pytest.raises(ValueError):
            ref.energies_from_occupations(bad, 1.0, "fermion")


@settings(max_examples=100)
@given(n=arrays(float, 5, elements=st.floats(1e-6, 1 - 1e-6)), beta=st.floats(0.1, 10))
def test_fermion_roundtrip(n, beta):
    eps = ref.energies_from_occupations(n, beta, "fermion")
    assert np.allclose(ref.occupations_from_energies(eps, beta, "fermion"), n, rtol=1e-9, atol=1e-15)


@settings(max_examples=100)
@given(n=arrays(float, 5, elements=st.floats(1e-6, 1e3)), beta=st.floats(0.1, 10))
def test_boson_roundtrip(n, beta):
    eps = ref.energies_from_occupations(n, beta, "boson")
    assert np.allclose(ref.occupations_from_energies(eps, beta, "boson"), n, rtol=1e-8)


def test_omega_half_filled_mode():
    # the lower-sign closed form gives ln(1 - 1/2) = -ln 2 for one mode at n = 1/2
    assert ref.omega_s([0.5], 1.0, "fermion") == pytest.approx(-np.log(2), abs=1e-15)


def test_omega_empty_limit():
    assert abs(ref.omega_s([1e-12], 1.0, "fermion")) < 1e-11
    assert abs(ref.omega_s([1e-12], 1.0, "boson")) < 1e-11


@pytest.mark.parametrize("stats", ["fermion", "boson"])
def test_omega_matches_ed(rng, stats):
    eps = rng.uniform(1.0, 2.0, 3)
    beta = 0.8
    # tail weight exp(-0.8 * 36) is far below the tolerance
    spec = HamiltonianSpec(stats, 3, np.diag(eps).astype(complex), bosonic_truncation=36 if stats == "boson" else None)
    st_ = thermal_state(spec, beta)
    n = ref.occupations_from_energies(eps, beta, stats)
    assert ref.omega_s(n, beta, stats) == pytest.approx(st_.omega, abs=1e-10)
    assert ref.entropy_s(n, stats) == pytest.approx(st_.entropy, abs=1e-10)
    assert ref.energy_s(n, beta, stats) == pytest.approx(st_.energy, abs=1e-10)


def test_f_s_examples(rng):
    assert ref.f_s([0.5], None, 1.0, "fermion") == pytest.approx(-np.log(2), abs=1e-15)
    assert ref.f_s([0.5], None, 2.0, "fermion") == pytest.approx(-np.log(2) / 2, abs=1e-15)
    n = rng.uniform(0.05, 0.95, 4)
    total = sum(ref.entropy_s([x], "fermion") for x in n)
    assert ref.entropy_s(n, "fermion") == pytest.approx(total, rel=1e-14)


def test_matrix_argument_uses_spectrum(rng):
    u, _ = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    n = np.array([0.2, 0.5, 0.7])
    g = (u * n) @ u.conj().T
    assert ref.entropy_s(g, "fermion") == pytest.approx(ref.entropy_s(n, "fermion"), rel=1e-13)
    h = np.diag([1.0, 2.0, 3.0])
    assert ref.f_s(np.diag(n), h, 1.0, "fermion") == pytest.approx(n @ [1, 2, 3] - ref.entropy_s(n, "fermion"))


def test_non_interacting_state():
    s = ref.non_interacting_state([1.0], 1.0, "fermion")
    assert s.log_Z == pytest.approx(np.log(1 + np.exp(-1)), abs=1e-15)
    assert s.omega == pytest.approx(s.energy - s.entropy, abs=1e-14)
    b = ref.non_interacting_state([1.0], 1.0, "boson")
    assert np.exp(b.log_Z) == pytest.approx(1 / (1 - np.exp(-1)), rel=1e-14)
