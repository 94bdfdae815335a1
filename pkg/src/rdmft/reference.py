"""Closed-form thermodynamics of non-interacting particles.

``s = +1`` for bosons and ``-1`` for fermions throughout::

    n     = 1 / (exp(beta eps) - s)
    eps   = ln((1 + s n) / n) / beta
    Omega = -s / beta * sum ln(1 + s n)
    S     = sum (n + s) ln(1 + s n) - n ln n

Matrix arguments are reduced to their eigenvalues; boundary occupations are
errors rather than being clamped.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .fock import Statistics


def _occupations(gamma_or_n):
    m = getattr(gamma_or_n, "matrix", gamma_or_n)
    m = np.asarray(m)
    if m.ndim == 2:
        return np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    return np.asarray(m, dtype=float).reshape(-1)


def _check_occupations(n, stats):
    if np.any(n <= 0):
        raise ValueError(f"occupations must be > 0, got min {n.min():.6g}")
    if stats is Statistics.FERMION and np.any(n >= 1):
        raise ValueError(f"fermionic occupations must be < 1, got max {n.max():.6g}")


def occupations_from_energies(eps, beta, statistics):
    stats = Statistics.parse(statistics)
    eps = np.asarray(eps, dtype=float)
    if stats is Statistics.FERMION:
        return expit(-beta * eps)
    if np.any(eps <= 0):
        raise ValueError("bosonic one-particle energies must be > 0")
    return 1.0 / np.expm1(beta * eps)


def energies_from_occupations(n, beta, statistics):
    stats = Statistics.parse(statistics)
    n = np.asarray(n, dtype=float)
    _check_occupations(n, stats)
    if stats is Statistics.FERMION:
        return (np.log1p(-n) - np.log(n)) / beta
    return np.log1p(1.0 / n) / beta


def log_partition_function(eps, beta, statistics) -> float:
    stats = Statistics.parse(statistics)
    x = beta * np.asarray(eps, dtype=float)
    if stats is Statistics.FERMION:
        return float(np.sum(np.logaddexp(0.0, -x)))
    if np.any(x <= 0):
        raise ValueError("bosonic one-particle energies must be > 0")
    return float(-np.sum(np.log(-np.expm1(-x))))


def omega_s(gamma_or_n, beta, statistics) -> float:
    stats = Statistics.parse(statistics)
    n = _occupations(gamma_or_n)
    _check_occupations(n, stats)
    s = stats.sign
    return float(-s / beta * np.sum(np.log1p(s * n)))


def entropy_s(gamma_or_n, statistics) -> float:
    stats = Statistics.parse(statistics)
    n = _occupations(gamma_or_n)
    _check_occupations(n, stats)
    s = stats.sign
    return float(np.sum((n + s) * np.log1p(s * n) - n * np.log(n)))


def energy_s(gamma_or_n, beta, statistics) -> float:
    """``sum n eps(n)``: the energy in the Hamiltonian whose Gibbs state has these occupations."""
    n = _occupations(gamma_or_n)
    return float(np.sum(n * energies_from_occupations(n, beta, statistics)))


def f_s(gamma_or_n, h_s0, beta, statistics) -> float:
    """``tr(gamma h_s0) - S_s / beta``.

    A vector of occupations is read as a diagonal 1RDM; ``h_s0`` may be a
    matrix in the same basis or ``None`` for zero.
    """
    stats = Statistics.parse(statistics)
    m = np.asarray(getattr(gamma_or_n, "matrix", gamma_or_n))
    gamma = np.diag(m.astype(float)) if m.ndim == 1 else m
    e0 = 0.0
    if h_s0 is not None:
        h = np.asarray(h_s0)
        if h.shape != gamma.shape:
            raise ValueError("h_s0 and gamma shapes differ")
        e0 = float(np.real(np.trace(gamma @ h)))
    return e0 - entropy_s(gamma, stats) / beta


@dataclass(frozen=True, eq=False)
class NonInteractingState:
    """Closed-form ensemble of independent modes; ``f_value`` uses a zero reference one-body term."""

    statistics: Statistics
    epsilons: np.ndarray
    beta: float
    occupations: np.ndarray
    log_Z: float
    omega: float
    energy: float
    entropy: float
    f_value: float


def non_interacting_state(eps, beta, statistics) -> NonInteractingState:
    stats = Statistics.parse(statistics)
    if not beta > 0:
        raise ValueError("beta must be positive")
    eps = np.asarray(eps, dtype=float).reshape(-1)
    n = occupations_from_energies(eps, beta, stats)
    log_z = log_partition_function(eps, beta, stats)
    omega = -log_z / beta
    energy = float(np.dot(n, eps))
    s = entropy_s(n, stats)
    return NonInteractingState(stats, eps, float(beta), n, log_z, omega, energy, s, -s / beta)
