import numpy as np
import pytest

from rdmft.hamiltonian import HamiltonianSpec


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


def pair_projector(nb, sign):
    """Projector onto symmetric (sign=+1) or antisymmetric pair tensors."""
    eye = np.eye(nb * nb)
    swap = np.eye(nb * nb)[np.arange(nb * nb).reshape(nb, nb).T.reshape(-1)]
    return 0.5 * (eye + sign * swap)


def random_w(rng, nb, sign, floor=0.0, scale=1.0):
    """Random two-body tensor; with ``floor > 0`` it is positive definite on the pair space."""
    p = pair_projector(nb, sign)
    b = rng.normal(size=(nb * nb, nb * nb)) + 1j * rng.normal(size=(nb * nb, nb * nb))
    if floor > 0:
        m = p @ (b @ b.conj().T / (nb * nb) * scale + floor * np.eye(nb * nb)) @ p
    else:
        m = p @ (0.5 * (b + b.conj().T) * scale / nb) @ p
    m = 0.5 * (m + m.conj().T)
    return m.reshape(nb, nb, nb, nb).transpose(0, 1, 3, 2)


def hubbard_dimer(t=1.0, u=2.0):
    """Two sites, two spins; orbital 2*site + spin."""
    h1 = np.zeros((4, 4), complex)
    for s in (0, 1):
        h1[s, 2 + s] = h1[2 + s, s] = -t
    w = np.zeros((4,) * 4, complex)
    for site in (0, 1):
        a, b = 2 * site, 2 * site + 1
        w[a, b, b, a] = w[b, a, a, b] = u
    return HamiltonianSpec("fermion", 4, h1, w=w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def verdict(request):
    """Record and print one pass/fail line, then assert it."""
    def record(label, ok, detail):
        line = f"{label}: {'PASS' if ok else 'FAIL'} ({detail})"
        print(line)
        request.config.stash[ACCEPTANCE].append(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
