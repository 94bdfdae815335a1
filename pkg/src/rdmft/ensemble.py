"""Grand-canonical Gibbs states by exact diagonalization.

Conventions: the 1RDM is ``gamma[i, j] = <a_j^dag a_i>`` and a potential
enters as ``sum_ij v[i, j] a_i^dag a_j``, so the pairing between them is
``tr(v gamma) = sum_ij v[i, j] gamma[j, i]``.
"""

from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from .fock import FockBasis, Statistics, enumerate_basis, sector_operator
from .hamiltonian import (
    HamiltonianSpec, add_potential, as_matrix, hamiltonian_terms, interaction_floor,
    require_valid, validate_potential,
)

DEFAULT_MAX_DIMENSION = 50_000


class TruncationError(RuntimeError):
    """Bosonic truncation did not converge below the dimension cap."""

    def __init__(self, message, truncation=None, z_change=None, gamma_change=None, tail_bound=None):
        super().__init__(message)
        self.truncation = truncation
        self.z_change = z_change
        self.gamma_change = gamma_change
        self.tail_bound = tail_bound


@dataclass(frozen=True, eq=False)
class OneRDM:
    matrix: np.ndarray
    statistics: Statistics

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("1RDM must be a square matrix")
        scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
        res = float(np.max(np.abs(m - m.conj().T), initial=0.0))
        if res > 1e-12 * scale:
            raise ValueError(f"1RDM is not Hermitian (residual {res:.3e})")
        object.__setattr__(self, "matrix", 0.5 * (m + m.conj().T))
        object.__setattr__(self, "statistics", Statistics.parse(self.statistics))

    @property
    def n_basis(self):
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def occupations(self):
        """Natural occupation numbers, ascending."""
        return np.linalg.eigvalsh(self.matrix)

    def natural_orbitals(self):
        """``(n, U)`` with occupations descending and ``matrix = U diag(n) U^dag``.

        Ties keep ascending eigen-solver order, so output is deterministic.
        """
        n, u = np.linalg.eigh(self.matrix)
        order = np.argsort(-n, kind="stable")
        return n[order], u[:, order]

    def invariant_violations(self, tol=1e-12):
        out = []
        n = self.occupations()
        if n[0] < -tol:
            out.append(f"negative occupation {n[0]:.3e}")
        if self.statistics is Statistics.FERMION and n[-1] > 1 + tol:
            out.append(f"occupation {n[-1]:.6g} exceeds 1")
        d = np.real(np.diag(self.matrix))
        cs = np.outer(d, d) - np.abs(self.matrix) ** 2
        if cs.min() < -tol:
            out.append(f"off-diagonal bound violated by {-cs.min():.3e}")
        return out


@dataclass(frozen=True, eq=False)
class DensityMatrixOperator:
    """``rho = sum_i weights[i] |states[:, i]><states[:, i]|`` with orthonormal states."""

    weights: np.ndarray
    states: np.ndarray
    basis: Optional[FockBasis] = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        st = np.array(self.states, dtype=np.complex128)
        if st.ndim == 1:
            st = st[:, None]
        if st.shape[1] != w.size:
            raise ValueError("one state per weight required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must be non-negative and sum to 1 (sum {w.sum():.15g})")
        gram = st.conj().T @ st
        if np.max(np.abs(gram - np.eye(w.size)), initial=0.0) > 1e-10:
            raise ValueError("states are not orthonormal")
        if self.basis is not None and st.shape[0] != self.basis.dimension:
            raise ValueError("state length does not match the Fock dimension")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "states", st)

    @classmethod
    def from_matrix(cls, rho, basis=None, cutoff=0.0):
        rho = rho.toarray() if sp.issparse(rho) else np.asarray(rho)
        w, u = np.linalg.eigh(0.5 * (rho + rho.conj().T))
        keep = w > cutoff
        w = w[keep].clip(min=0.0)
        return cls(w / w.sum(), u[:, keep], basis)

    @property
    def dimension(self):
        return self.states.shape[0]

    def matrix(self):
        return (self.states * self.weights) @ self.states.conj().T

    def expectation(self, op) -> float:
        return float(np.real(np.sum(self.weights * np.einsum("ci,ci->i", self.states.conj(), op @ self.states))))

    def entropy(self) -> float:
        w = self.weights[self.weights > 0]
        return float(-np.sum(w * np.log(w)))

    def one_rdm(self, basis=None) -> OneRDM:
        """1RDM from ``gamma[i, j] = sum_k w_k <a_j psi_k | a_i psi_k>``."""
        from .fock import annihilation_matrix
        fb = basis or self.basis
        if fb is None:
            raise ValueError("a FockBasis is needed to evaluate the 1RDM")
        nb = fb.n_basis
        sw = self.states * np.sqrt(self.weights)
        lowered = [annihilation_matrix(fb, i) @ sw for i in range(nb)]
        g = np.array([[np.vdot(lowered[j], lowered[i]) for j in range(nb)] for i in range(nb)])
        return OneRDM(g, fb.statistics)


def schatten_norm(rho, p) -> float:
    """Schatten ``p``-norm of a density operator (``p = inf`` for the operator norm)."""
    w = rho.weights
    if p == np.inf:
        return float(np.max(w))
    return float(np.sum(w ** p) ** (1.0 / p))


@dataclass(frozen=True, eq=False)
class _Block:
    start: int
    energies: np.ndarray
    vectors: np.ndarray
    numbers: Optional[np.ndarray]
    hops: Optional[tuple]


@dataclass(frozen=True, eq=False)
class GibbsState:
    """Thermal state ``exp(-beta H) / Z``.

    ``eigenvalues`` and ``weights`` are listed block by block (one block per
    particle-number sector when ``H`` conserves particle number).
    """

    beta: float
    eigenvalues: np.ndarray
    weights: np.ndarray
    log_Z: float
    omega: float
    energy: float
    entropy: float
    entropy_check: float
    n_moments: Optional[tuple]
    gamma: Optional[OneRDM]
    basis: Optional[FockBasis]
    _blocks: tuple = field(repr=False)
    _config_probs: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def Z(self) -> float:
        return float(np.exp(self.log_Z))

    @property
    def dimension(self):
        return int(self.eigenvalues.size)

    def eigenvectors(self):
        dim = self.dimension
        out = np.zeros((dim, dim), dtype=np.complex128)
        col = 0
        for b in self._blocks:
            m = b.vectors.shape[1]
            out[b.start:b.start + b.vectors.shape[0], col:col + m] = b.vectors
            col += m
        return out

    def log_weights(self):
        return -self.beta * self.eigenvalues - self.log_Z

    def to_density_operator(self, cutoff: float = 0.0) -> DensityMatrixOperator:
        keep = self.weights > cutoff
        w = self.weights[keep]
        return DensityMatrixOperator(w / w.sum(), self.eigenvectors()[:, keep], self.basis)


def _assemble(beta, blocks, statistics, nb, basis):
    energies = np.concatenate([b.energies for b in blocks])
    emin = float(energies.min())
    a = -beta * (energies - emin)
    lse = float(logsumexp(a))
    log_z = -beta * emin + lse
    logw = a - lse
    weights = np.exp(logw)
    omega = -log_z / beta
    energy = float(np.dot(weights, energies))
    entropy = beta * (energy - omega)
    entropy_check = float(-np.dot(weights, logw))
    if -1e-12 * max(1.0, entropy_check) < entropy < 0:
        entropy = 0.0
    moments, probs, gamma = None, None, None
    if all(b.numbers is not None for b in blocks):
        probs = np.zeros(sum(b.vectors.shape[0] for b in blocks))
        nums = np.zeros_like(probs)
        flat = np.zeros(nb * nb, dtype=np.complex128)
        col = 0
        for b in blocks:
            m = b.vectors.shape[1]
            wb = weights[col:col + m]
            col += m
            rows = slice(b.start, b.start + b.vectors.shape[0])
            probs[rows] = (np.abs(b.vectors) ** 2) @ wb
            nums[rows] = b.numbers
            if b.hops is None or not np.any(wb):
                continue
            rho = (b.vectors * wb) @ b.vectors.conj().T
            tags, hr, hc, hv = b.hops
            contrib = hv * rho[hc, hr]
            flat += (np.bincount(tags, contrib.real, nb * nb)
                     + 1j * np.bincount(tags, contrib.imag, nb * nb))
        moments = (float(probs @ nums), float(probs @ nums ** 2))
        gamma = OneRDM(flat.reshape(nb, nb), statistics)
    return GibbsState(float(beta), energies, weights, float(log_z), float(omega), energy,
                      float(entropy), entropy_check, moments, gamma, basis, tuple(blocks), probs)


def _local_hops(hops, lo, hi):
    tags, rows, cols, vals = hops
    sel = (cols >= lo) & (cols < hi)
    return tags[sel], rows[sel] - lo, cols[sel] - lo, vals[sel]


def _check_beta(beta):
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")


def gibbs(H, beta, fb: Optional[FockBasis] = None) -> GibbsState:
    """Gibbs state of an operator matrix.

    With ``fb`` the 1RDM and number moments are evaluated too, and a
    number-conserving ``H`` is diagonalized sector by sector.
    """
    _check_beta(beta)
    hs = sp.csr_matrix(H) if not sp.issparse(H) else H.tocsr()
    if fb is not None and hs.shape[0] != fb.dimension:
        raise ValueError("operator dimension does not match the Fock basis")
    scale = max(1.0, float(np.max(np.abs(hs.data), initial=0.0)))
    if abs(hs - hs.conj().T).max() > 1e-12 * scale:
        raise ValueError("operator is not Hermitian")
    if fb is None:
        e, u = np.linalg.eigh(hs.toarray())
        st = _assemble(beta, [_Block(0, e, u, None, None)], None, 0, None)
        return st
    coo = hs.tocoo()
    numbers = fb.particle_numbers
    conserving = np.array_equal(numbers[coo.row], numbers[coo.col])
    spans = [(sl.start, sl.stop) for _, sl in fb.sectors()] if conserving else [(0, fb.dimension)]
    blocks = []
    for lo, hi in spans:
        if hi == lo:
            continue
        e, u = np.linalg.eigh(hs[lo:hi, lo:hi].toarray())
        blocks.append(_Block(lo, e, u, numbers[lo:hi], _local_hops(fb.hops, lo, hi)))
    return _assemble(beta, blocks, fb.statistics, fb.n_basis, fb)


def _sector_hops(nb, stats, n):
    tags, rows, cols, vals = [], [], [], []
    for i in range(nb):
        for j in range(nb):
            m = sector_operator(nb, stats, n, [(1.0, ((j, True), (i, False)))]).tocoo()
            tags.append(np.full(m.nnz, i * nb + j, dtype=np.int64))
            rows.append(m.row.astype(np.int64))
            cols.append(m.col.astype(np.int64))
            vals.append(m.data)
    return np.concatenate(tags), np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


class ThermalModel:
    """Reusable Fock-space realization of a spec for repeated Gibbs solves.

    The interaction part is materialized once; each call to :meth:`state`
    adds a one-body potential through the cached ``a_i^dag a_j`` tables.
    """

    def __init__(self, spec: HamiltonianSpec, truncation: Optional[int] = None):
        require_valid(spec)
        self.spec = spec
        self.statistics = spec.statistics
        nb = spec.n_basis
        if spec.statistics is Statistics.BOSON:
            truncation = spec.bosonic_truncation if truncation is None else int(truncation)
            if truncation is None:
                raise ValueError("bosonic spec needs a truncation (see converge_truncation)")
        else:
            truncation = None
        self.truncation = truncation
        self.max_total = nb if truncation is None else truncation
        self.conserving = spec.conserves_number
        self._terms = hamiltonian_terms(spec)
        self._sectors = {}
        self._full = None

    @property
    def basis(self) -> FockBasis:
        return enumerate_basis(self.spec.n_basis, self.statistics, self.truncation)

    def _sector(self, n):
        if n not in self._sectors:
            nb = self.spec.n_basis
            h = sector_operator(nb, self.statistics, n, self._terms).toarray()
            h[np.diag_indices_from(h)] += self.spec.h0
            self._sectors[n] = (h, _sector_hops(nb, self.statistics, n))
        return self._sectors[n]

    def _full_block(self):
        if self._full is None:
            fb = self.basis
            h = fb.apply_terms(self._terms).toarray()
            h[np.diag_indices_from(h)] += self.spec.h0
            self._full = (h, fb.hops)
        return self._full

    def _with_potential(self, h, hops, v):
        if v is None or not np.any(v):
            return h
        nb = self.spec.n_basis
        tags, rows, cols, vals = hops
        # tag i*nb + j holds a_j^dag a_i, whose coefficient is v[j, i]
        coef = v.T.reshape(-1)[tags]
        out = h.copy()
        np.add.at(out, (rows, cols), vals * coef)
        return out

    def sector_spectrum(self, n, v=None):
        h, hops = self._sector(n)
        e, u = np.linalg.eigh(self._with_potential(h, hops, v))
        return _Block(0, e, u, np.full(h.shape[0], n), hops)

    def state(self, beta, v=None, check=True) -> GibbsState:
        _check_beta(beta)
        vm = None if v is None else as_matrix(v)
        if check and vm is not None:
            pc = validate_potential(self.spec, vm)
            if not pc.passed:
                raise ValueError(f"invalid potential: {pc.detail}")
        nb = self.spec.n_basis
        if self.conserving:
            blocks, start = [], 0
            for n in range(self.max_total + 1):
                b = self.sector_spectrum(n, vm)
                blocks.append(_Block(start, b.energies, b.vectors, b.numbers, b.hops))
                start += b.vectors.shape[0]
        else:
            h, hops = self._full_block()
            e, u = np.linalg.eigh(self._with_potential(h, hops, vm))
            blocks = [_Block(0, e, u, self.basis.particle_numbers, hops)]
        return _assemble(beta, blocks, self.statistics, nb, self.basis)


def thermal_state(spec: HamiltonianSpec, beta, v=None, truncation: Optional[int] = None) -> GibbsState:
    """Gibbs state of ``spec`` plus an optional one-body potential."""
    return ThermalModel(spec, truncation).state(beta, v)


def observables(state: GibbsState, k: int) -> float:
    """``<N^k>`` in the Gibbs state."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return 1.0
    if state._config_probs is None:
        raise ValueError("state was computed without a Fock basis")
    nums = np.concatenate([b.numbers for b in state._blocks]).astype(float)
    return float(state._config_probs @ nums ** k)


def _as_dense(op):
    return op.toarray() if sp.issparse(op) else np.asarray(op)


def grand_potential_of(rho: DensityMatrixOperator, H, beta) -> float:
    """``sum_k w_k <psi_k|H|psi_k> + beta^-1 sum_k w_k ln w_k``."""
    _check_beta(beta)
    return rho.expectation(H) - rho.entropy() / beta


def relative_entropy(rho: DensityMatrixOperator, sigma) -> float:
    """``tr rho (ln rho - ln sigma)``; ``inf`` when ``rho`` leaves the support of ``sigma``."""
    if isinstance(sigma, GibbsState):
        sw, svec = sigma.weights, sigma.eigenvectors()
        slog = sigma.log_weights()
    else:
        sw, svec = sigma.weights, sigma.states
        with np.errstate(divide="ignore"):
            slog = np.log(sw)
    support = sw > 0
    overlaps = np.abs(svec[:, support].conj().T @ rho.states) ** 2
    leak = 1.0 - overlaps.sum(axis=0)
    if np.any((rho.weights > 0) & (leak > 1e-10)):
        return float("inf")
    cross = float(np.sum(rho.weights * (slog[support] @ overlaps)))
    val = -rho.entropy() - cross
    # roundoff can push S[rho|rho] just below zero
    return 0.0 if -1e-12 < val < 0 else val


def entropy(rho) -> float:
    if isinstance(rho, GibbsState):
        return rho.entropy
    return rho.entropy()


def _nc_floor(spec: HamiltonianSpec):
    h = 0.5 * (spec.h1 + spec.h1.conj().T)
    return float(np.linalg.eigvalsh(h)[0])


def _tail_bound(spec, beta, n):
    """Bound on ``Z - Z_n`` for non-interacting conserving bosons, else ``None``."""
    if spec.interacting or not spec.conserves_number:
        return None
    k_l = _nc_floor(spec)
    if k_l <= 0:
        return None
    nb = spec.n_basis
    x = np.exp(-beta * k_l)
    head = sum(comb(m + nb - 1, m) * x ** m for m in range(n + 1))
    return float(np.exp(-beta * spec.h0) * max((1 - x) ** -nb - head, 0.0))


def _fock_dimension(nb, n):
    return comb(n + nb, nb)


def converge_truncation(spec: HamiltonianSpec, beta, tol, max_dimension: int = DEFAULT_MAX_DIMENSION,
                        start: int = 2):
    """Smallest tried truncation with stride-2 changes of ``Z`` and ``gamma`` below ``tol``.

    Returns ``(n_trunc, GibbsState)``.  Raises ``ValueError`` for an invalid
    potential (before any work) and :class:`TruncationError` when the Fock
    dimension would exceed ``max_dimension``.
    """
    _check_beta(beta)
    if spec.statistics is not Statistics.BOSON:
        raise ValueError("truncation convergence applies to bosonic specs")
    if not tol > 0:
        raise ValueError("tol must be positive")
    require_valid(spec)
    pc = validate_potential(spec, np.zeros_like(spec.h1))
    if not pc.passed:
        raise ValueError(f"invalid potential: {pc.detail}")
    nb = spec.n_basis
    start = max(int(start), 2)
    if spec.conserves_number:
        return _converge_sectors(spec, beta, tol, max_dimension, start)
    prev, prev_change = None, None
    n = start
    while True:
        if _fock_dimension(nb, n) > max_dimension:
            raise _no_convergence(spec, beta, n - 2, prev_change)
        st = ThermalModel(spec, n).state(beta)
        if prev is not None:
            dz = -np.expm1(prev.log_Z - st.log_Z)
            if dz < -1e-12:
                raise RuntimeError(f"partition function decreased with truncation ({dz:.3e})")
            dg = float(np.linalg.norm(st.gamma.matrix - prev.gamma.matrix))
            prev_change = (dz, dg)
            if dz < tol and dg < tol:
                return n, st
        prev = st
        n += 2


def _no_convergence(spec, beta, n, change):
    dz, dg = change if change else (None, None)
    tail = _tail_bound(spec, beta, n)
    msg = (f"bosonic truncation not converged at n_trunc={n}: relative Z change {dz}, "
           f"gamma change {dg}; analytic tail bound on Z - Z_n: "
           f"{tail if tail is not None else 'not available'}")
    return TruncationError(msg, n, dz, dg, tail)


def _converge_sectors(spec, beta, tol, max_dimension, start):
    nb = spec.n_basis
    model = ThermalModel(spec, truncation=0)
    spectra = []
    # running sums relative to a moving reference: z = sum exp(lse_N - ref), g = sum exp(lse_N - ref) gamma_N
    history = []
    ref, z, g = -np.inf, 0.0, np.zeros((nb, nb), complex)
    change = None
    n = 0
    while True:
        if _fock_dimension(nb, n) > max_dimension:
            raise _no_convergence(spec, beta, n - 1, change)
        b = model.sector_spectrum(n)
        spectra.append(b)
        a = -beta * b.energies
        lse_n = float(logsumexp(a))
        w = np.exp(a - lse_n)
        rho = (b.vectors * w) @ b.vectors.conj().T
        tags, hr, hc, hv = b.hops
        contrib = hv * rho[hc, hr]
        g_sec = (np.bincount(tags, contrib.real, nb * nb)
                 + 1j * np.bincount(tags, contrib.imag, nb * nb)).reshape(nb, nb)
        if lse_n > ref:
            scale = np.exp(ref - lse_n)
            z, g, ref = z * scale, g * scale, lse_n
        z += np.exp(lse_n - ref)
        g = g + np.exp(lse_n - ref) * g_sec
        history.append((ref + np.log(z), g / z))
        if n >= start:
            lz_n, g_n = history[-1]
            lz_m, g_m = history[-3]
            dz = float(-np.expm1(lz_m - lz_n))
            if dz < -1e-12:
                raise RuntimeError(f"partition function decreased with truncation ({dz:.3e})")
            dg = float(np.linalg.norm(g_n - g_m))
            change = (dz, dg)
            if dz < tol and dg < tol:
                break
        n += 1
    blocks, off = [], 0
    for b in spectra:
        blocks.append(_Block(off, b.energies, b.vectors, b.numbers, b.hops))
        off += b.vectors.shape[0]
    basis = enumerate_basis(nb, Statistics.BOSON, n)
    return n, _assemble(beta, blocks, Statistics.BOSON, nb, basis)


@dataclass(frozen=True)
class ZBoundReport:
    applicable: bool
    k_l: Optional[float] = None
    z: Optional[float] = None
    z_bound: Optional[float] = None
    z_passed: Optional[bool] = None
    saturation: Optional[float] = None
    moments: tuple = ()
    detail: str = ""

    @property
    def passed(self):
        if not self.applicable:
            return None
        return bool(self.z_passed and all(m["passed"] for m in self.moments))


def pochhammer(x, k):
    out = 1.0
    for m in range(k):
        out *= x + m
    return out


def moment_series_bound(nb, x, k):
    """``sum_N C(N+nb-1, N) N^k x^N`` in closed form, i.e. ``(x d/dx)^k (1-x)^-nb``.

    Computed from Stirling numbers of the second kind:
    ``sum_m S(k, m) (nb)_m x^m (1-x)^-(nb+m)``.
    """
    stirling = [[0] * (k + 1) for _ in range(k + 1)]
    stirling[0][0] = 1
    for a in range(1, k + 1):
        for b in range(1, a + 1):
            stirling[a][b] = b * stirling[a - 1][b] + stirling[a - 1][b - 1]
    return float(sum(stirling[k][m] * pochhammer(nb, m) * x ** m * (1 - x) ** -(nb + m)
                     for m in range(k + 1)))


def verify_z_bound(spec: HamiltonianSpec, beta, state: GibbsState, ks=(1, 2)) -> ZBoundReport:
    """Check ``Z <= (1 - x)^-Nb`` and ``<N^k> Z <= (Nb x)_k / (1 - x)^(Nb + k)`` with ``x = exp(-beta K_l)``.

    Strict only for non-interacting number-conserving bosons, where ``K_l``
    is the lowest eigenvalue of ``h1``.  The constant ``h0`` is factored out.
    """
    if spec.statistics is not Statistics.BOSON:
        return ZBoundReport(False, detail="bound concerns bosonic specs")
    if not spec.conserves_number:
        return ZBoundReport(False, detail="no certified K_l with source or pairing terms")
    if spec.interacting:
        k_l = interaction_floor(spec.w, spec.statistics)
        if k_l <= 0:
            return ZBoundReport(False, k_l, detail="interaction not positive definite")
        ok = np.isfinite(state.log_Z)
        return ZBoundReport(False, k_l, state.Z, None, bool(ok),
                            detail="interacting constants are unconstructed; only finiteness checked")
    k_l = _nc_floor(spec)
    if k_l <= 0:
        return ZBoundReport(False, k_l, detail="h1 not positive definite")
    nb = spec.n_basis
    x = float(np.exp(-beta * k_l))
    scale = float(np.exp(beta * spec.h0))
    z = state.Z * scale
    bound = (1 - x) ** -nb
    slack = 1e-12 * bound
    moments = []
    for k in ks:
        lhs = observables(state, k) * z
        rhs = pochhammer(nb * x, k) / (1 - x) ** (nb + k)
        exact = moment_series_bound(nb, x, k)
        moments.append({"k": k, "lhs": lhs, "pochhammer": rhs, "series": exact,
                        "passed": bool(lhs <= rhs * (1 + 1e-12) + slack)})
    return ZBoundReport(True, k_l, z, bound, bool(z <= bound + slack), z / bound, tuple(moments))
