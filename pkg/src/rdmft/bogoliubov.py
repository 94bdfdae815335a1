"""Exact solution of quadratic Hamiltonians with source and pairing terms.

A quadratic spec describes::

    H = offset + a^dag omega a + sum_i (conj(h_i) a_i^dag + h_i a_i)
        + sum_ij (conj(D[j,i]) a_i^dag a_j^dag + D[i,j] a_i a_j)

In the Nambu basis ``psi = (a, a^dag)`` this is ``1/2 psi^dag M psi`` up to a
constant, with ``M = [[omega, 2 D^dag], [2 D, +-omega^T]]`` (upper sign for
bosons).  The solution gives quasiparticle operators
``b_k = sum_i U[k,i] a_i + V[k,i] a_i^dag`` with ``H = E0 + sum_k E_k b_k^dag b_k``.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .fock import Statistics

METRIC_TOL = 1e-10
_CLUSTER_RTOL = 1e-8
# generic mixing constant for simultaneous diagonalization of commuting real parts
_MIX = 0.5772156649015329


@dataclass(frozen=True, eq=False)
class QuadraticSpec:
    statistics: Statistics
    omega: np.ndarray
    source: Optional[np.ndarray] = None
    pairing: Optional[np.ndarray] = None
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "statistics", Statistics.parse(self.statistics))
        om = np.array(self.omega, dtype=np.complex128)
        if om.ndim != 2 or om.shape[0] != om.shape[1]:
            raise ValueError("omega must be square")
        nb = om.shape[0]
        if np.max(np.abs(om - om.conj().T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(om))):
            raise ValueError("omega must be Hermitian")
        object.__setattr__(self, "omega", om)
        s = np.zeros(nb, complex) if self.source is None else np.array(self.source, dtype=np.complex128).reshape(-1)
        d = np.zeros((nb, nb), complex) if self.pairing is None else np.array(self.pairing, dtype=np.complex128)
        if s.shape != (nb,) or d.shape != (nb, nb):
            raise ValueError("source/pairing dimensions do not match omega")
        sign = self.statistics.sign
        if np.max(np.abs(d - sign * d.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(d))):
            raise ValueError("pairing must be symmetric (boson) or antisymmetric (fermion)")
        object.__setattr__(self, "source", s)
        object.__setattr__(self, "pairing", d)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n_basis(self):
        return self.omega.shape[0]

    @classmethod
    def from_hamiltonian(cls, spec):
        if spec.interacting:
            raise ValueError("Hamiltonian has a two-body term; it is not quadratic")
        return cls(spec.statistics, spec.h1, spec.source, spec.pairing, spec.h0)

    def nambu_matrix(self):
        om, d = self.omega, self.pairing
        lower = om.T if self.statistics is Statistics.BOSON else -om.T
        return np.block([[om, 2 * d.conj().T], [2 * d, lower]])


@dataclass(frozen=True, eq=False)
class BogoliubovSolution:
    """Quasiparticle solution; ``U``/``V`` are ``None`` when unstable.

    ``shift`` is the displacement ``a_i = b'_i - shift_i`` removing the source,
    which lowers every level by ``shift_constant``.
    """

    statistics: Statistics
    quasiparticle_energies: np.ndarray
    ground_constant: float
    stable: bool
    U: Optional[np.ndarray] = None
    V: Optional[np.ndarray] = None
    shift: Optional[np.ndarray] = None
    shift_constant: float = 0.0
    eigenvalues: Optional[np.ndarray] = field(default=None, repr=False)
    detail: str = ""

    def metric_residuals(self):
        """Max-abs residuals of the two (para)unitarity identities."""
        u, v = self.U, self.V
        eye = np.eye(u.shape[0])
        if self.statistics is Statistics.BOSON:
            r1 = u @ u.conj().T - v @ v.conj().T - eye
            r2 = u @ v.T - v @ u.T
        else:
            r1 = u @ u.conj().T + v @ v.conj().T - eye
            r2 = u @ v.T + v @ u.T
        return float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))

    def levels(self, count, max_quanta=None):
        """The ``count`` lowest many-body levels ``E0 + sum_k n_k E_k``."""
        e = np.sort(self.quasiparticle_energies)
        if self.statistics is Statistics.FERMION:
            levels = np.array([0.0])
            for ek in e:
                levels = np.sort(np.concatenate([levels, levels + ek]))[: max(count, 1) * 4]
            return self.ground_constant + levels[:count]
        if np.any(e <= 0):
            raise ValueError("bosonic level ladder needs positive quasiparticle energies")
        top = max_quanta if max_quanta is not None else count
        levels = np.array([0.0])
        for ek in e:
            levels = np.sort((levels[:, None] + ek * np.arange(top + 1)[None, :]).ravel())[: count * 4]
        return self.ground_constant + levels[:count]


def eliminate_source(spec: QuadraticSpec):
    """Remove the linear term by a displacement.

    Returns ``(shift, C_h, source_free_spec)``; with ``a = b - shift`` the
    source drops out and ``H = H_source_free(b) - C_h`` where
    ``C_h = Re sum_i h_i shift_i``.  The shift solves
    ``omega shift + 2 D^dag conj(shift) = conj(h)``.
    """
    nb = spec.n_basis
    h = spec.source
    if not np.any(h):
        return np.zeros(nb, complex), 0.0, spec
    if spec.statistics is Statistics.FERMION:
        raise ValueError("a fermionic source term is odd in the field operators and cannot be removed by a c-number shift")
    om, dh = spec.omega, 2 * spec.pairing.conj().T

    def apply(x):
        y = om @ x + dh @ x.conj()
        return np.concatenate([y.real, y.imag])

    basis = np.eye(nb)
    cols = [apply(basis[k].astype(complex)) for k in range(nb)]
    cols += [apply(1j * basis[k]) for k in range(nb)]
    mat = np.column_stack(cols)
    rhs = np.concatenate([h.conj().real, h.conj().imag])
    u, s, vt = np.linalg.svd(mat)
    if s[-1] <= 1e-12 * max(s[0], 1.0):
        kern = vt[-1, :nb] + 1j * vt[-1, nb:]
        raise ValueError(f"source elimination is singular; zero mode along {np.round(kern, 12).tolist()}")
    x = np.linalg.solve(mat, rhs)
    shift = x[:nb] + 1j * x[nb:]
    c_h = float(np.real(np.sum(h * shift)))
    free = QuadraticSpec(spec.statistics, spec.omega, None, spec.pairing, spec.offset - c_h)
    return shift, c_h, free


def _clusters(values, scale):
    groups, start = [], 0
    for k in range(1, len(values) + 1):
        if k == len(values) or abs(values[k] - values[start]) > _CLUSTER_RTOL * scale:
            groups.append((start, k))
            start = k
    return groups


def _schur_blocks(t, tol):
    """Split a real quasi-triangular Schur factor into 2x2 rotation blocks and 1x1 zeros."""
    n = t.shape[0]
    pairs, zeros, k = [], [], 0
    while k < n:
        if k + 1 < n and abs(t[k + 1, k]) > tol:
            pairs.append((k, 0.5 * (t[k, k + 1] - t[k + 1, k])))
            k += 2
        else:
            zeros.append(k)
            k += 1
    return pairs, zeros


def takagi(d):
    """Unitary ``U`` with ``U^T d U = diag(s)``, ``s`` non-negative and descending."""
    d = np.asarray(d, dtype=np.complex128)
    if np.max(np.abs(d - d.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(d))):
        raise ValueError("takagi requires a complex symmetric matrix")
    n = d.shape[0]
    lam, u = np.linalg.eigh(d.conj().T @ d)
    lam, u = lam[::-1].clip(min=0.0), u[:, ::-1]
    c = u.T @ d @ u
    scale = max(lam[0], 1e-300)
    out = np.zeros((n, n), complex)
    for a, b in _clusters(lam, scale):
        sigma = np.sqrt(lam[a])
        if sigma <= np.sqrt(_CLUSTER_RTOL * scale):
            out[a:b, a:b] = np.eye(b - a)
            continue
        blk = c[a:b, a:b] / sigma
        re, im = 0.5 * (blk.real + blk.real.T), 0.5 * (blk.imag + blk.imag.T)
        _, o = np.linalg.eigh(re + _MIX * im)
        phases = np.diag(o.T @ blk @ o)
        out[a:b, a:b] = o * np.exp(-0.5j * np.angle(phases))[None, :]
    u = u @ out
    s = np.real(np.diag(u.T @ d @ u)).clip(min=0.0)
    order = np.argsort(-s, kind="stable")
    return u[:, order], s[order]


def youla(d):
    """Unitary ``U`` with ``U^T d U`` a direct sum of ``[[0, s_k], [-s_k, 0]]`` blocks.

    Returns ``(U, s)`` with ``s`` non-negative and descending; for odd size the
    last row and column of the canonical form are zero.
    """
    d = np.asarray(d, dtype=np.complex128)
    if np.max(np.abs(d + d.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(d))):
        raise ValueError("youla requires a complex antisymmetric matrix")
    n = d.shape[0]
    lam, u = np.linalg.eigh(d.conj().T @ d)
    lam, u = lam[::-1].clip(min=0.0), u[:, ::-1]
    c = u.T @ d @ u
    scale = max(lam[0], 1e-300)
    cols, svals, zero_cols = [], [], []
    for a, b in _clusters(lam, scale):
        sigma = np.sqrt(lam[a])
        if sigma <= np.sqrt(_CLUSTER_RTOL * scale) or b - a < 2:
            zero_cols.extend(u[:, a:b].T)
            continue
        blk = c[a:b, a:b] / sigma
        re, im = 0.5 * (blk.real - blk.real.T), 0.5 * (blk.imag - blk.imag.T)
        t, o = sla.schur(re + _MIX * im, output="real")
        pairs, zeros = _schur_blocks(t, 1e-9)
        ub = u[:, a:b] @ o
        for k, _ in pairs:
            z = ub[:, k] @ d @ ub[:, k + 1]
            ph = np.exp(-0.5j * np.angle(z))
            cols.append((ub[:, k] * ph, ub[:, k + 1] * ph))
            svals.append(abs(z))
        zero_cols.extend(ub[:, zeros].T)
    order = np.argsort(-np.array(svals), kind="stable")
    mat = []
    for k in order:
        mat.extend(cols[k])
    mat.extend(zero_cols)
    umat = np.column_stack(mat) if mat else np.zeros((n, 0), complex)
    return umat, np.array(svals)[order]


def _boson_solve(spec, m):
    nb = spec.n_basis
    eta = np.diag(np.concatenate([np.ones(nb), -np.ones(nb)]))
    ev = np.linalg.eigvals(eta @ m)
    ev = ev[np.lexsort((ev.imag, -ev.real))]
    min_m = float(np.linalg.eigvalsh(m)[0])
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(ev.imag)) > METRIC_TOL or min_m <= METRIC_TOL * scale:
        detail = ("complex quasiparticle spectrum" if np.max(np.abs(ev.imag)) > METRIC_TOL
                  else f"Nambu matrix not positive definite (min eigenvalue {min_m:.3e})")
        return None, None, ev.real[:nb].copy(), ev, detail
    k = np.linalg.cholesky(m).conj().T  # m = k^dag k
    w = k @ eta @ k.conj().T
    e, uw = np.linalg.eigh(0.5 * (w + w.conj().T))
    pos = np.argsort(-e)[:nb]
    energies = e[pos]
    t_pos = np.linalg.solve(k, uw[:, pos] * np.sqrt(energies)[None, :])
    x, y = t_pos[:nb], t_pos[nb:]
    return x.conj().T, -y.conj().T, energies, ev, ""


def _fermion_solve(spec, m):
    nb = spec.n_basis
    eye = np.eye(nb)
    q = np.block([[eye, eye], [1j * eye, -1j * eye]]) / np.sqrt(2)
    a = np.real(-1j * (q @ m @ q.conj().T))
    a = 0.5 * (a - a.T)
    t, o = sla.schur(a, output="real")
    pairs, zeros = _schur_blocks(t, 1e-13 * max(1.0, np.max(np.abs(a))))
    vecs, energies = [], []
    for k, s in pairs:
        sgn = 1.0 if s >= 0 else -1.0
        vecs.append((o[:, k] - 1j * sgn * o[:, k + 1]) / np.sqrt(2))
        energies.append(abs(s))
    for p in range(0, len(zeros) - 1, 2):
        vecs.append((o[:, zeros[p]] - 1j * o[:, zeros[p + 1]]) / np.sqrt(2))
        energies.append(0.0)
    z = q.conj().T @ np.column_stack(vecs)
    x, y = z[:nb], z[nb:]
    return x.conj().T, y.conj().T, np.array(energies), np.linalg.eigvalsh(m), ""


def diagonalize(spec: QuadraticSpec) -> BogoliubovSolution:
    """Bogoliubov transformation of a quadratic spec; a source is eliminated first."""
    shift, c_h, free = eliminate_source(spec)
    m = free.nambu_matrix()
    tr = float(np.real(np.trace(spec.omega)))
    if spec.statistics is Statistics.BOSON:
        u, v, energies, ev, detail = _boson_solve(spec, m)
    else:
        u, v, energies, ev, detail = _fermion_solve(spec, m)
    stable = u is not None
    order = np.argsort(energies, kind="stable")
    energies = np.asarray(energies, dtype=float)[order]
    if not stable:
        return BogoliubovSolution(spec.statistics, energies, float("nan"), False,
                                  shift=shift, shift_constant=c_h, eigenvalues=ev, detail=detail)
    u, v = u[order], v[order]
    if spec.statistics is Statistics.BOSON:
        ground = 0.5 * energies.sum() - 0.5 * tr + free.offset
    else:
        ground = 0.5 * tr - 0.5 * energies.sum() + free.offset
    return BogoliubovSolution(spec.statistics, energies, float(ground), True, u, v,
                              shift, c_h, ev)


def half_dimension_energies(spec: QuadraticSpec):
    """Quasiparticle energies from the ``Nb x Nb`` squared-energy problem (real omega and D)."""
    om, d = spec.omega, spec.pairing
    if np.max(np.abs(om.imag)) > 1e-14 or np.max(np.abs(d.imag)) > 1e-14:
        raise ValueError("half-dimension reduction needs real omega and pairing")
    om, d = om.real, d.real
    if spec.statistics is Statistics.BOSON:
        prod = (om / 2 - d) @ (om / 2 + d)
    else:
        prod = (om / 2 + d) @ (om / 2 - d)
    sq = np.linalg.eigvals(prod)
    return np.sort(2 * np.sqrt(np.abs(sq.real)))


@dataclass(frozen=True)
class QuadraticThermo:
    log_Z: float
    omega: float
    energy: float
    entropy: float

    @property
    def Z(self):
        return float(np.exp(self.log_Z))


def quadratic_thermodynamics(sol: BogoliubovSolution, beta) -> QuadraticThermo:
    if beta <= 0:
        raise ValueError("beta must be positive")
    if not sol.stable:
        raise ValueError(f"unstable quadratic Hamiltonian: {sol.detail}")
    e = sol.quasiparticle_energies
    x = beta * e
    if sol.statistics is Statistics.FERMION:
        log_z = -beta * sol.ground_constant + np.sum(np.logaddexp(0.0, -x))
        occ = np.exp(-np.logaddexp(0.0, x))
    else:
        if np.any(e <= 0):
            raise ValueError("bosonic zero mode: partition function diverges")
        log_z = -beta * sol.ground_constant - np.sum(np.log(-np.expm1(-x)))
        occ = 1.0 / np.expm1(x)
    omega = -log_z / beta
    energy = sol.ground_constant + float(np.sum(e * occ))
    return QuadraticThermo(float(log_z), float(omega), float(energy), float(beta * (energy - omega)))
