"""Ensemble representability of 1RDMs and explicit generating ensembles.

Every 1RDM whose natural occupations lie in ``[0, 1]`` (fermions) or
``[0, inf)`` (bosons) is generated by a mixture of occupation-number states
built on its natural orbitals.  The decomposition of the occupation vector
into such states is done greedily; see :func:`coleman_integer`.
"""

from dataclasses import dataclass
from enum import Enum
from math import factorial

import numpy as np

from .ensemble import DensityMatrixOperator, OneRDM
from .fock import FockBasis, Statistics, creation_matrix

DELTA = 1e-12
TRACE_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-10


class Membership(str, Enum):
    EXTERIOR = "exterior"
    BOUNDARY = "boundary"
    INTERIOR = "interior"


@dataclass(frozen=True, eq=False)
class MembershipReport:
    set_membership: Membership
    statistics: Statistics
    occupation_spectrum: np.ndarray
    margins: np.ndarray

    @property
    def min_margin(self) -> float:
        return float(self.margins.min())


def _as_rdm(gamma, statistics=None):
    if isinstance(gamma, OneRDM):
        return gamma
    if statistics is None:
        raise ValueError("statistics required for a bare matrix")
    return OneRDM(gamma, statistics)


def classify(gamma, statistics=None) -> MembershipReport:
    g = _as_rdm(gamma, statistics)
    n = g.occupations()
    if g.statistics is Statistics.FERMION:
        margins = np.minimum(n, 1.0 - n)
    else:
        margins = n.copy()
    low = margins.min()
    if low < -DELTA:
        kind = Membership.EXTERIOR
    elif low <= DELTA:
        kind = Membership.BOUNDARY
    else:
        kind = Membership.INTERIOR
    return MembershipReport(kind, g.statistics, n, margins)


@dataclass(frozen=True, eq=False)
class ColemanEnsemble:
    """Weights of occupation configurations over the natural orbitals.

    Column ``k`` of ``natural_orbital_transform`` is the orbital whose
    occupation is entry ``k`` of each configuration.
    """

    natural_orbital_transform: np.ndarray
    terms: tuple
    statistics: Statistics

    @property
    def n_basis(self):
        return self.natural_orbital_transform.shape[0]

    def occupation_vector(self):
        occ = np.zeros(self.n_basis)
        for lam, cfg in self.terms:
            occ += lam * np.asarray(cfg, dtype=float)
        return occ

    def one_rdm(self) -> OneRDM:
        u = self.natural_orbital_transform
        return OneRDM((u * self.occupation_vector()) @ u.conj().T, self.statistics)

    def weights_sum(self):
        return float(sum(lam for lam, _ in self.terms))


def _integer_trace(n_total):
    n_int = int(round(n_total))
    if abs(n_total - n_int) >= TRACE_TOL:
        raise ValueError(f"trace {n_total:.15g} is not an integer")
    return n_int


def _require_not_exterior(g):
    rep = classify(g)
    if rep.set_membership is Membership.EXTERIOR:
        bad = rep.occupation_spectrum[np.argmin(rep.margins)]
        raise ValueError(f"1RDM is not ensemble representable: occupation {bad:.6g} out of range")
    return rep


_SNAP = 1e-11


def _snap(x):
    x = np.where(np.abs(x) < _SNAP, 0.0, x)
    return np.where(np.abs(x - 1.0) < _SNAP, 1.0, x)


def _fermion_terms(occ, n_particles):
    """Greedy convex decomposition of ``occ`` (sum ``n_particles``) into 0/1 vectors."""
    nb = occ.size
    x = _snap(np.clip(occ, 0.0, 1.0))
    mass = 1.0
    terms = []
    for _ in range(nb + 1):
        order = np.argsort(-x, kind="stable")
        sel, unsel = order[:n_particles], order[n_particles:]
        cfg = np.zeros(nb, dtype=int)
        cfg[sel] = 1
        lo = x[sel].min() if sel.size else 1.0
        hi = 1.0 - x[unsel].max() if unsel.size else 1.0
        lam = min(lo, hi)
        if lam >= 1.0 - _SNAP:
            terms.append((mass, tuple(int(c) for c in cfg)))
            return terms
        terms.append((mass * lam, tuple(int(c) for c in cfg)))
        pin = sel[np.argmin(x[sel])] if lo <= hi else unsel[np.argmax(x[unsel])]
        x = _snap((x - lam * cfg) / (1.0 - lam))
        # the coordinate that limited the step sits exactly on its bound
        x[pin] = 0.0 if lo <= hi else 1.0
        mass *= 1.0 - lam
    raise RuntimeError(f"fermionic decomposition did not terminate (remainder {x})")


def _decompose(occ, n_particles, stats):
    if stats is Statistics.BOSON:
        if n_particles == 0:
            return [(1.0, (0,) * occ.size)]
        occ = np.clip(occ, 0.0, None)
        terms = []
        for k in range(occ.size):
            if occ[k] > 0:
                cfg = [0] * occ.size
                cfg[k] = n_particles
                terms.append((occ[k] / n_particles, tuple(cfg)))
        return terms
    return _fermion_terms(occ, n_particles)


def _finish(g, u, terms):
    total = sum(lam for lam, _ in terms)
    terms = tuple((float(lam / total), cfg) for lam, cfg in terms)
    ens = ColemanEnsemble(u, terms, g.statistics)
    err = float(np.linalg.norm(ens.one_rdm().matrix - g.matrix))
    if err > RECONSTRUCTION_TOL:
        raise RuntimeError(f"decomposition does not reproduce the 1RDM (error {err:.3e})")
    return ens


def coleman_integer(gamma, statistics=None) -> ColemanEnsemble:
    """Ensemble for a 1RDM with integer trace ``N``.

    Bosons: weight ``n_k / N`` on ``N`` particles in natural orbital ``k``.
    Fermions: repeatedly take the ``N`` largest remaining occupations as a
    0/1 configuration, with the largest weight that keeps the rescaled
    remainder inside ``[0, 1]``.  Each step makes one more coordinate
    integral, so there are at most ``Nb`` terms.
    """
    g = _as_rdm(gamma, statistics)
    _require_not_exterior(g)
    n_int = _integer_trace(g.trace)
    occ, u = g.natural_orbitals()
    return _finish(g, u, _decompose(occ, n_int, g.statistics))


def _fractional_split(occ, t, stats):
    """Direction ``d >= 0`` (sum 1) with ``occ - t d`` and ``occ + (1 - t) d`` both valid."""
    cap = occ / t
    if stats is Statistics.FERMION:
        cap = np.minimum(cap, (1.0 - occ) / (1.0 - t))
    cap = np.clip(cap, 0.0, None)
    d = np.zeros_like(occ)
    remaining = 1.0
    for k in np.argsort(-occ, kind="stable"):
        d[k] = min(cap[k], remaining)
        remaining -= d[k]
        if remaining <= 0:
            break
    if remaining > 1e-12:
        k = int(np.argmax(cap))
        raise ValueError(f"no valid integer-trace split; occupation {occ[k]:.6g} blocks the remaining mass {remaining:.3e}")
    d[np.argsort(-occ, kind="stable")[0]] += max(remaining, 0.0)
    return d


def coleman_fractional(gamma, statistics=None) -> ColemanEnsemble:
    """Ensemble for any representable 1RDM, mixing ``floor(N)`` and ``ceil(N)`` pieces.

    The excess mass is water-filled onto the largest occupations; both pieces
    share the natural orbitals of ``gamma``.
    """
    g = _as_rdm(gamma, statistics)
    _require_not_exterior(g)
    total = g.trace
    if abs(total - round(total)) < TRACE_TOL:
        return coleman_integer(g)
    lo = int(np.floor(total))
    t = total - lo
    occ, u = g.natural_orbitals()
    occ = np.clip(occ, 0.0, None if g.statistics is Statistics.BOSON else 1.0)
    d = _fractional_split(occ, t, g.statistics)
    occ_lo = occ - t * d
    occ_hi = occ + (1.0 - t) * d
    # rescale so each piece has exactly integer trace
    occ_lo *= lo / occ_lo.sum() if lo else 0.0
    occ_hi *= (lo + 1) / occ_hi.sum()
    terms = [((1.0 - t) * lam, cfg) for lam, cfg in _decompose(occ_lo, lo, g.statistics)]
    terms += [(t * lam, cfg) for lam, cfg in _decompose(occ_hi, lo + 1, g.statistics)]
    return _finish(g, u, terms)


def realize(ensemble: ColemanEnsemble, fb: FockBasis) -> DensityMatrixOperator:
    """Density operator ``sum_I w_I |I><I|`` with ``|I>`` occupation states over the natural orbitals."""
    if fb.statistics is not ensemble.statistics:
        raise ValueError("statistics mismatch between ensemble and basis")
    if fb.n_basis != ensemble.n_basis:
        raise ValueError("n_basis mismatch between ensemble and basis")
    merged = {}
    for lam, cfg in ensemble.terms:
        if lam > 0:
            merged[cfg] = merged.get(cfg, 0.0) + lam
    if fb.statistics is Statistics.BOSON:
        need = max(sum(cfg) for cfg in merged)
        if need > fb.truncation:
            raise ValueError(f"bosonic truncation {fb.truncation} too small; configuration needs {need} particles")
    u = ensemble.natural_orbital_transform
    raw = [creation_matrix(fb, j) for j in range(fb.n_basis)]
    rotated = [sum(u[j, k] * raw[j] for j in range(fb.n_basis)) for k in range(fb.n_basis)]
    vac = np.zeros(fb.dimension, dtype=np.complex128)
    vac[0] = 1.0
    states, weights = [], []
    for cfg, lam in merged.items():
        psi = vac.copy()
        for k, nk in enumerate(cfg):
            for _ in range(nk):
                psi = rotated[k] @ psi
            if nk > 1:
                psi /= np.sqrt(factorial(nk))
        states.append(psi)
        weights.append(lam)
    w = np.array(weights)
    return DensityMatrixOperator(w / w.sum(), np.column_stack(states), fb)
