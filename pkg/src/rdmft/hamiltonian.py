"""Hamiltonian specifications, validation and Fock-space matrices.

The operator represented by a :class:`HamiltonianSpec` is::

    H = h0 + sum_ij h1[i,j] a_i^dag a_j
           + 1/2 sum_ijkl w[i,j,k,l] a_i^dag a_j^dag a_k a_l
           + sum_i (conj(s_i) a_i^dag + s_i a_i)
           + sum_ij (conj(D[j,i]) a_i^dag a_j^dag + D[i,j] a_i a_j)

with ``s`` the source vector and ``D`` the pairing matrix.  A one-body
potential ``v`` enters as ``sum_ij v[i,j] a_i^dag a_j``.
"""

from dataclasses import dataclass, field, replace
from itertools import permutations
from typing import Optional

import numpy as np

from .fock import FockBasis, Statistics

HERMITIAN_TOL = 1e-12
POSITIVITY_TOL = 1e-10


def _rel_residual(a, b):
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - b)) / scale)


def _is_zero(x):
    return x is None or not np.any(x)


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """Coefficient tensors of a finite-basis Hamiltonian.

    Construction only checks shapes; physical validity is reported by
    :func:`validate_spec` and enforced by :func:`build_operator`.
    """

    statistics: Statistics
    n_basis: int
    h1: np.ndarray
    h0: float = 0.0
    w: Optional[np.ndarray] = None
    source: Optional[np.ndarray] = None
    pairing: Optional[np.ndarray] = None
    bosonic_truncation: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "statistics", Statistics.parse(self.statistics))
        nb = int(self.n_basis)
        if nb < 1:
            raise ValueError("n_basis must be >= 1")
        object.__setattr__(self, "n_basis", nb)
        object.__setattr__(self, "h0", float(np.real(self.h0)))
        h1 = np.array(self.h1, dtype=np.complex128)
        if h1.shape != (nb, nb):
            raise ValueError(f"h1 must have shape ({nb}, {nb}), got {h1.shape}")
        object.__setattr__(self, "h1", h1)
        if self.w is not None:
            w = np.array(self.w, dtype=np.complex128)
            if w.ndim != 4:
                raise ValueError(
                    f"interaction tensor of rank {w.ndim} not supported; only two-body (rank 4) terms are representable")
            if w.shape != (nb,) * 4:
                raise ValueError(f"w must have shape {(nb,) * 4}, got {w.shape}")
            object.__setattr__(self, "w", w)
        if self.source is not None:
            s = np.array(self.source, dtype=np.complex128).reshape(-1)
            if s.shape != (nb,):
                raise ValueError(f"source must have length {nb}")
            object.__setattr__(self, "source", s)
        if self.pairing is not None:
            d = np.array(self.pairing, dtype=np.complex128)
            if d.shape != (nb, nb):
                raise ValueError(f"pairing must have shape ({nb}, {nb})")
            object.__setattr__(self, "pairing", d)
        if self.bosonic_truncation is not None:
            if int(self.bosonic_truncation) < 0:
                raise ValueError("bosonic_truncation must be >= 0")
            object.__setattr__(self, "bosonic_truncation", int(self.bosonic_truncation))

    @property
    def interacting(self) -> bool:
        return not _is_zero(self.w)

    @property
    def conserves_number(self) -> bool:
        return _is_zero(self.source) and _is_zero(self.pairing)

    def with_truncation(self, ntrunc):
        return replace(self, bosonic_truncation=ntrunc)


@dataclass(frozen=True, eq=False)
class Potential:
    v: np.ndarray

    def __post_init__(self):
        v = np.array(self.v, dtype=np.complex128)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("potential must be a square matrix")
        res = _rel_residual(v, v.conj().T)
        if res > HERMITIAN_TOL:
            raise ValueError(f"potential is not Hermitian (relative residual {res:.3e})")
        object.__setattr__(self, "v", v)


def as_matrix(v) -> np.ndarray:
    return v.v if isinstance(v, Potential) else np.asarray(v, dtype=np.complex128)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""
    mandatory: bool = True


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def mandatory_ok(self) -> bool:
        return all(c.passed for c in self.checks if c.mandatory)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self):
        return [c for c in self.checks if not c.passed]


def pair_matrix(w) -> np.ndarray:
    """Reshape ``w[i,j,k,l]`` into the Hermitian matrix ``M[(i,j),(l,k)]``."""
    nb = w.shape[0]
    return w.transpose(0, 1, 3, 2).reshape(nb * nb, nb * nb)


def _symmetric_subspace(nb, order, sign):
    # orthonormal basis of (anti)symmetric rank-`order` tensors, as columns
    dim = nb ** order
    proj = np.zeros((dim, dim))
    idx = np.arange(dim).reshape((nb,) * order)
    for perm in permutations(range(order)):
        parity = 1
        p = list(perm)
        for a in range(order):
            for b in range(a + 1, order):
                if p[a] > p[b]:
                    parity = -parity
        coef = 1.0 if sign > 0 else float(parity)
        proj[idx.reshape(-1), idx.transpose(perm).reshape(-1)] += coef
    proj /= len(list(permutations(range(order))))
    evals, evecs = np.linalg.eigh(proj)
    return evecs[:, evals > 0.5]


def interaction_floor(tensor, statistics) -> float:
    """Minimum eigenvalue of the highest-order interaction on the physical subspace.

    ``tensor`` has rank ``2n`` with the creation indices first; it is reshaped
    to ``M[(i_1..i_n), (j_n..j_1)]`` and restricted to symmetric (bosons) or
    antisymmetric (fermions) ``n``-particle tensors, the only ones the
    operator product sees.
    """
    tensor = np.asarray(tensor)
    order = tensor.ndim // 2
    if order < 1 or tensor.ndim % 2:
        raise ValueError("interaction tensor must have even rank")
    nb = tensor.shape[0]
    axes = list(range(order)) + list(range(2 * order - 1, order - 1, -1))
    m = tensor.transpose(axes).reshape(nb ** order, nb ** order)
    m = 0.5 * (m + m.conj().T)
    stats = Statistics.parse(statistics)
    basis = _symmetric_subspace(nb, order, stats.sign)
    if basis.shape[1] == 0:
        return float("inf")
    return float(np.linalg.eigvalsh(basis.T @ m @ basis)[0])


def validate_spec(spec: HamiltonianSpec) -> ValidationReport:
    checks = []
    res = _rel_residual(spec.h1, spec.h1.conj().T)
    checks.append(Check("h1_hermitian", res <= HERMITIAN_TOL, res, HERMITIAN_TOL))
    if spec.w is not None:
        res = _rel_residual(spec.w, spec.w.transpose(3, 2, 1, 0).conj())
        checks.append(Check("w_hermitian", res <= HERMITIAN_TOL, res, HERMITIAN_TOL))
    if spec.pairing is not None:
        d = spec.pairing
        res = _rel_residual(d, spec.statistics.sign * d.T)
        checks.append(Check("pairing_symmetry", res <= HERMITIAN_TOL, res, HERMITIAN_TOL,
                            "D = D^T" if spec.statistics is Statistics.BOSON else "D = -D^T"))
    if spec.statistics is Statistics.BOSON:
        if spec.interacting:
            k_l = interaction_floor(spec.w, spec.statistics)
            detail = "certified floor" if spec.conserves_number else "heuristic: non-conserving terms present"
            checks.append(Check("interaction_positive", k_l > 0.0, k_l, 0.0, detail))
        else:
            k_l = float(np.linalg.eigvalsh(0.5 * (spec.h1 + spec.h1.conj().T))[0])
            checks.append(Check("one_body_floor", True, k_l, None,
                                "informational; h1 + v > 0 is checked per potential", mandatory=False))
            if not _is_zero(spec.pairing):
                from .bogoliubov import QuadraticSpec, diagonalize
                q = QuadraticSpec(spec.statistics, spec.h1, None, spec.pairing)
                sol = diagonalize(q)
                checks.append(Check("pairing_stability", sol.stable,
                                    float(np.min(sol.quasiparticle_energies)) if sol.stable else None,
                                    0.0, "real positive quadratic spectrum", mandatory=False))
    return ValidationReport(tuple(checks))


def require_valid(spec: HamiltonianSpec):
    report = validate_spec(spec)
    if not report.mandatory_ok:
        bad = ", ".join(f"{c.name} ({c.value:.3e})" if c.value is not None else c.name
                        for c in report.failures() if c.mandatory)
        raise ValueError(f"invalid Hamiltonian specification: {bad}")
    return report


def hamiltonian_terms(spec: HamiltonianSpec):
    """Operator-string terms of everything except the constant ``h0``."""
    nb = spec.n_basis
    terms = []
    for i in range(nb):
        for j in range(nb):
            if spec.h1[i, j] != 0:
                terms.append((spec.h1[i, j], ((i, True), (j, False))))
    if spec.interacting:
        for i, j, k, l in zip(*np.nonzero(spec.w)):
            terms.append((0.5 * spec.w[i, j, k, l], ((i, True), (j, True), (k, False), (l, False))))
    if not _is_zero(spec.source):
        for i in range(nb):
            if spec.source[i] != 0:
                terms.append((np.conj(spec.source[i]), ((i, True),)))
                terms.append((spec.source[i], ((i, False),)))
    if not _is_zero(spec.pairing):
        d = spec.pairing
        for i in range(nb):
            for j in range(nb):
                if d[i, j] != 0:
                    terms.append((d[i, j], ((i, False), (j, False))))
                if d[j, i] != 0:
                    terms.append((np.conj(d[j, i]), ((i, True), (j, True))))
    return terms


def build_operator(spec: HamiltonianSpec, fb: FockBasis):
    """Sparse (CSR) matrix of the Hamiltonian on ``fb``."""
    if fb.statistics is not spec.statistics:
        raise ValueError(f"statistics mismatch: spec is {spec.statistics.value}, basis is {fb.statistics.value}")
    if fb.n_basis != spec.n_basis:
        raise ValueError("n_basis mismatch between spec and basis")
    require_valid(spec)
    import scipy.sparse as sp
    h = fb.apply_terms(hamiltonian_terms(spec))
    if spec.h0:
        h = h + spec.h0 * sp.identity(fb.dimension, dtype=np.complex128, format="csr")
    return h.tocsr()


def add_potential(spec: HamiltonianSpec, v) -> HamiltonianSpec:
    v = v if isinstance(v, Potential) else Potential(v)
    if v.v.shape != spec.h1.shape:
        raise ValueError(f"potential shape {v.v.shape} does not match n_basis {spec.n_basis}")
    if not np.any(v.v):
        return spec
    return replace(spec, h1=spec.h1 + v.v)


@dataclass(frozen=True)
class PotentialCheck:
    passed: bool
    min_eigenvalue: Optional[float] = None
    detail: str = ""

    def __bool__(self):
        return self.passed


def validate_potential(spec: HamiltonianSpec, v) -> PotentialCheck:
    vm = as_matrix(v)
    if spec.statistics is Statistics.FERMION:
        return PotentialCheck(True, detail="fermionic potentials are unrestricted")
    if spec.interacting:
        k_l = interaction_floor(spec.w, spec.statistics)
        if k_l > 0:
            return PotentialCheck(True, detail="positive-definite interaction bounds the spectrum")
        return PotentialCheck(False, detail=f"interaction not positive definite (K_l = {k_l:.6g})")
    h = spec.h1 + vm
    lam = float(np.linalg.eigvalsh(0.5 * (h + h.conj().T))[0])
    if lam <= POSITIVITY_TOL:
        return PotentialCheck(False, lam, f"h1 + v has eigenvalue {lam:.6g} <= 0; partition function diverges")
    if not _is_zero(spec.pairing):
        from .bogoliubov import QuadraticSpec, diagonalize
        if not diagonalize(QuadraticSpec(spec.statistics, h, None, spec.pairing)).stable:
            return PotentialCheck(False, lam, "pairing destabilizes the quadratic spectrum")
    return PotentialCheck(True, lam)


def chemical_potential(v) -> float:
    """``-tr v``, the chemical potential carried by a one-body potential."""
    return float(-np.real(np.trace(as_matrix(v))))


def operator_inequality_margin(a, b, alpha) -> float:
    """Minimum eigenvalue of ``|alpha|^2 A^dag A + B^dag B - conj(alpha) A^dag B - alpha B^dag A``."""
    a = a.toarray() if hasattr(a, "toarray") else np.asarray(a)
    b = b.toarray() if hasattr(b, "toarray") else np.asarray(b)
    ah, bh = a.conj().T, b.conj().T
    gap = abs(alpha) ** 2 * ah @ a + bh @ b - np.conj(alpha) * ah @ b - alpha * bh @ a
    return float(np.linalg.eigvalsh(0.5 * (gap + gap.conj().T))[0])
