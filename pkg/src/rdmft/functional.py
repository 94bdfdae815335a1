"""The universal functional and the inversion gamma -> v.

``F[gamma]`` is evaluated through its concave dual
``G(v) = Omega[v] - tr(v gamma)``: the maximizer ``v*`` is the unique
potential whose Gibbs state has the target 1RDM, and ``F[gamma] = G(v*)``.
The maximization runs a deterministic BFGS over the ``Nb**2`` real
coordinates of a Hermitian ``v``, warm-started from the exact
non-interacting inverse.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import reference
from .ensemble import OneRDM, ThermalModel, converge_truncation
from .fock import Statistics
from .hamiltonian import HamiltonianSpec, Potential, add_potential, as_matrix, validate_potential
from .representability import classify

GAMMA_TOL = 1e-9
MAX_ITER = 500
BOUNDARY_MARGIN = 1e-8
TRUNCATION_TOL = 1e-10


class InversionError(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True, eq=False)
class InversionResult:
    v: Potential
    gamma_residual: float
    F_value: float
    iterations: int
    converged: bool
    omega: float
    truncation: Optional[int] = None


def _pack(v):
    nb = v.shape[0]
    iu = np.triu_indices(nb, 1)
    return np.concatenate([np.real(np.diag(v)), v[iu].real, v[iu].imag])


def _unpack(p, nb):
    iu = np.triu_indices(nb, 1)
    m = len(iu[0])
    v = np.diag(p[:nb]).astype(complex)
    v[iu] = p[nb:nb + m] + 1j * p[nb + m:]
    v[(iu[1], iu[0])] = p[nb:nb + m] - 1j * p[nb + m:]
    return v


def _grad_coords(dg):
    """Derivative of ``tr(v dg)`` with respect to the packed coordinates of ``v``."""
    nb = dg.shape[0]
    iu = np.triu_indices(nb, 1)
    return np.concatenate([np.real(np.diag(dg)), 2 * dg[iu].real, 2 * dg[iu].imag])


def _susceptibility(h, beta, stats):
    """Matrix of ``d gamma / d v`` in packed coordinates for the quadratic Hamiltonian ``h``."""
    nb = h.shape[0]
    eps, u = np.linalg.eigh(h)
    n = reference.occupations_from_energies(eps, beta, stats)
    de = eps[:, None] - eps[None, :]
    dn = n[:, None] - n[None, :]
    same = np.abs(de) < 1e-10
    s = stats.sign
    diag = -beta * n * (1 + s * n)
    lmat = np.where(same, 0.5 * (diag[:, None] + diag[None, :]), dn / np.where(same, 1.0, de))
    cols = []
    for k in range(nb * nb):
        e = np.zeros(nb * nb)
        e[k] = 1.0
        dv = _unpack(e, nb)
        dg = u @ (lmat * (u.conj().T @ dv @ u)) @ u.conj().T
        cols.append(_grad_coords(dg))
    return np.column_stack(cols)


def _check_target(spec, gamma):
    g = gamma if isinstance(gamma, OneRDM) else OneRDM(gamma, spec.statistics)
    if g.statistics is not spec.statistics:
        raise ValueError("statistics of gamma and spec differ")
    if g.n_basis != spec.n_basis:
        raise ValueError("gamma dimension does not match n_basis")
    rep = classify(g)
    if rep.min_margin <= BOUNDARY_MARGIN:
        raise ValueError(f"target 1RDM is not in the interior ({rep.set_membership.value}, "
                         f"min margin {rep.min_margin:.3e}); no finite potential generates it")
    return g, rep


def initial_potential(spec, gamma, beta):
    """Exact inverse for the non-interacting part: ``h1 + v0 = U eps(n) U^dag``."""
    n, u = np.linalg.eigh(gamma.matrix)
    eps = reference.energies_from_occupations(n, beta, spec.statistics)
    h = (u * eps) @ u.conj().T
    v0 = h - spec.h1
    return 0.5 * (v0 + v0.conj().T)


def _resolve_truncation(spec, beta, v, truncation):
    if spec.statistics is Statistics.FERMION:
        return None
    if truncation is not None:
        return int(truncation)
    if spec.bosonic_truncation is not None:
        return spec.bosonic_truncation
    n, _ = converge_truncation(add_potential(spec, Potential(v)), beta, TRUNCATION_TOL)
    return n


def gamma_from_v(spec: HamiltonianSpec, v, beta, truncation: Optional[int] = None) -> OneRDM:
    """Equilibrium 1RDM of ``spec`` plus the potential ``v``."""
    vm = as_matrix(v)
    pc = validate_potential(spec, vm)
    if not pc.passed:
        raise ValueError(f"invalid potential: {pc.detail}")
    trunc = _resolve_truncation(spec, beta, vm, truncation)
    return ThermalModel(spec, trunc).state(beta, vm).gamma


def v_from_gamma(spec: HamiltonianSpec, gamma_target, beta, tol: float = GAMMA_TOL,
                 max_iter: int = MAX_ITER, truncation: Optional[int] = None) -> InversionResult:
    """Potential generating ``gamma_target`` at inverse temperature ``beta``.

    Raises ``ValueError`` for a target on or near the boundary.  Hitting the
    iteration cap returns a result with ``converged=False``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    g, _ = _check_target(spec, gamma_target)
    nb = spec.n_basis
    stats = spec.statistics
    target = g.matrix
    v0 = initial_potential(spec, g, beta)
    trunc = _resolve_truncation(spec, beta, v0, truncation)
    model = ThermalModel(spec, trunc)
    needs_check = stats is Statistics.BOSON and not spec.interacting

    def evaluate(p):
        v = _unpack(p, nb)
        if needs_check and not validate_potential(spec, v).passed:
            return None
        st = model.state(beta, v, check=False)
        dg = st.gamma.matrix - target
        value = -(st.omega - float(np.real(np.sum(v * target.T))))
        return value, -_grad_coords(dg), dg, st, v

    x = _pack(v0)
    cur = evaluate(x)
    if cur is None:
        raise ValueError("warm-start potential is infeasible")
    # inverse of the exact non-interacting Hessian of -G at the warm start
    hess = -_susceptibility(spec.h1 + v0, beta, stats)
    hinv = np.linalg.inv(0.5 * (hess + hess.T))
    it = 0
    while True:
        f, grad, dg, st, v = cur
        resid = float(np.linalg.norm(dg))
        if resid < tol or it >= max_iter:
            break
        step = -hinv @ grad
        slope = float(grad @ step)
        if slope >= 0:
            hinv = np.linalg.inv(0.5 * (hess + hess.T))
            step = -hinv @ grad
            slope = float(grad @ step)
        alpha, accepted = 1.0, None
        for _ in range(40):
            trial = evaluate(x + alpha * step)
            if trial is not None:
                ft = trial[0]
                if ft <= f + 1e-4 * alpha * slope:
                    accepted = trial
                    break
                # at roundoff level the objective is flat; fall back on the gradient
                if abs(ft - f) <= 1e-13 * max(1.0, abs(f)) and np.linalg.norm(trial[2]) < resid:
                    accepted = trial
                    break
            alpha *= 0.5
        if accepted is None:
            break
        x_new = x + alpha * step
        s_vec, y_vec = x_new - x, accepted[1] - grad
        sy = float(s_vec @ y_vec)
        if sy > 1e-300:
            rho = 1.0 / sy
            a = np.eye(len(x)) - rho * np.outer(s_vec, y_vec)
            hinv = a @ hinv @ a.T + rho * np.outer(s_vec, s_vec)
        x, cur = x_new, accepted
        it += 1
    f, grad, dg, st, v = cur
    resid = float(np.linalg.norm(dg))
    return InversionResult(Potential(0.5 * (v + v.conj().T)), resid, -f, it, resid < tol, st.omega, trunc)


def universal_functional(spec: HamiltonianSpec, gamma, beta, **kwargs):
    """``(F[gamma], v*)``; raises :class:`InversionError` if the inversion does not converge."""
    res = v_from_gamma(spec, gamma, beta, **kwargs)
    if not res.converged:
        raise InversionError(f"inversion did not converge (residual {res.gamma_residual:.3e} "
                             f"after {res.iterations} iterations)", res)
    return res.F_value, res.v


def dual_value(spec: HamiltonianSpec, gamma, v, beta, truncation: Optional[int] = None) -> float:
    """``Omega[v] - tr(v gamma)``, a lower bound on ``F[gamma]`` for every admissible ``v``."""
    vm = as_matrix(v)
    g = gamma.matrix if isinstance(gamma, OneRDM) else np.asarray(gamma)
    trunc = _resolve_truncation(spec, beta, vm, truncation)
    st = ThermalModel(spec, trunc).state(beta, vm)
    return st.omega - float(np.real(np.sum(vm * g.T)))


@dataclass(frozen=True)
class HxcDecomposition:
    """Split of ``F`` against a non-interacting reference.

    ``F_s`` here includes the constant ``h0``, so that
    ``F_Hxc = E_H + xi E_x + E_c - S_c / beta`` with ``xi = -1`` for fermions
    and ``+1`` for bosons.
    """

    E_H: float
    E_x: float
    E_c: float
    S_s: float
    S_c: float
    F_Hxc: float
    F: float
    F_s: float
    E_0: float
    entropy: float


def hartree_energy(w, gamma):
    return float(np.real(0.5 * np.einsum("ijkl,li,kj->", w, gamma, gamma)))


def exchange_energy(w, gamma):
    return float(np.real(0.5 * np.einsum("ijkl,lj,ki->", w, gamma, gamma)))


def hxc_decompose(spec: HamiltonianSpec, gamma, beta, h_s0=None, inversion=None, **kwargs) -> HxcDecomposition:
    """Hartree, exchange and correlation parts of ``F[gamma]``.

    ``inversion`` reuses an earlier :func:`v_from_gamma` result for the same
    target; otherwise the inversion runs with ``kwargs``.
    """
    if spec.w is None:
        raise ValueError("hxc decomposition needs a two-body tensor")
    g, _ = _check_target(spec, gamma)
    h_s0 = spec.h1 if h_s0 is None else np.asarray(h_s0, dtype=complex)
    res = inversion if inversion is not None else v_from_gamma(spec, g, beta, **kwargs)
    if not res.converged:
        raise InversionError(f"inversion did not converge (residual {res.gamma_residual:.3e})", res)
    vm = res.v.v
    st = ThermalModel(spec, res.truncation).state(beta, vm, check=False)
    gm = st.gamma.matrix
    e0 = st.energy - float(np.real(np.sum(vm * gm.T)))
    e_h = hartree_energy(spec.w, gm)
    e_x = exchange_energy(spec.w, gm)
    xi = -1.0 if spec.statistics is Statistics.FERMION else 1.0
    e_s0 = float(np.real(np.trace(gm @ h_s0))) + spec.h0
    s_s = reference.entropy_s(gm, spec.statistics)
    f_s = reference.f_s(gm, h_s0, beta, spec.statistics) + spec.h0
    return HxcDecomposition(
        E_H=e_h, E_x=e_x, E_c=e0 - e_s0 - e_h - xi * e_x,
        S_s=s_s, S_c=st.entropy - s_s, F_Hxc=res.F_value - f_s,
        F=res.F_value, F_s=f_s, E_0=e0, entropy=st.entropy,
    )
