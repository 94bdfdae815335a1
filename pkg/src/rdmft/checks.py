"""Seeded invariant audit of a model, as run by ``rdmft check``."""

import numpy as np
import scipy.sparse as sp

from . import bogoliubov
from .ensemble import (DensityMatrixOperator, ThermalModel, converge_truncation, grand_potential_of,
                       verify_z_bound)
from .fock import FockBasis, Statistics, annihilation_matrix, creation_matrix, enumerate_basis
from .functional import v_from_gamma
from .hamiltonian import HamiltonianSpec, build_operator, validate_potential, validate_spec
from .io import CheckResult, CheckTable
from .representability import classify, coleman_fractional, realize

REALIZE_MAX_DIMENSION = 4096
KLEIN_SAMPLES = 20
SEGMENTS = 5


def fock_algebra_residual(fb: FockBasis) -> float:
    """Largest entry of the (anti)commutator defects.

    Bosonic commutators are compared only on states with fewer than the
    truncation number of particles, where the truncated operators are exact.
    """
    nb = fb.n_basis
    a = [annihilation_matrix(fb, i) for i in range(nb)]
    ad = [creation_matrix(fb, i) for i in range(nb)]
    eye = sp.identity(fb.dimension, format="csr")
    if fb.statistics is Statistics.FERMION:
        keep = np.arange(fb.dimension)
        sgn = 1
    else:
        keep = np.flatnonzero(fb.particle_numbers < fb.truncation)
        sgn = -1
    worst = 0.0
    for i in range(nb):
        for j in range(nb):
            c1 = a[i] @ ad[j] + sgn * ad[j] @ a[i] - (eye if i == j else 0 * eye)
            c2 = a[i] @ a[j] + sgn * a[j] @ a[i]
            for c in (c1, c2):
                block = c.tocsr()[keep][:, keep]
                if block.nnz:
                    worst = max(worst, float(np.abs(block.data).max()))
    return worst


def _random_hermitian(rng, nb, scale):
    a = rng.normal(size=(nb, nb)) + 1j * rng.normal(size=(nb, nb))
    h = 0.5 * (a + a.conj().T)
    return scale * h / max(np.linalg.norm(h, 2), 1e-300)


def _random_density(rng, dim, basis):
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    w = rng.dirichlet(np.full(dim, 0.5))
    return DensityMatrixOperator(w / w.sum(), q, basis)


def _potential_scale(spec):
    if spec.statistics is Statistics.BOSON and not spec.interacting:
        return 0.25 * float(np.linalg.eigvalsh(spec.h1).min())
    return 0.5


def run_checks(spec: HamiltonianSpec, beta=1.0, seed=0, tol=1e-10) -> CheckTable:
    rng = np.random.default_rng(seed)
    results = []
    report = validate_spec(spec)
    fails = [c.name for c in report.failures()]
    results.append(CheckResult("spec_valid", report.mandatory_ok, 0.0 if report.mandatory_ok else -1.0, 0.0,
                               ", ".join(fails)))
    if not report.mandatory_ok:
        return CheckTable(seed, tuple(results))

    trunc = None
    if spec.statistics is Statistics.BOSON:
        trunc = spec.bosonic_truncation
        if trunc is None:
            trunc, _ = converge_truncation(spec, beta, tol)
    model = ThermalModel(spec, trunc)
    fb = model.basis
    st = model.state(beta)

    alg = fb
    if fb.dimension > REALIZE_MAX_DIMENSION and spec.statistics is Statistics.BOSON:
        alg = enumerate_basis(spec.n_basis, spec.statistics, 2)
    if alg.dimension <= REALIZE_MAX_DIMENSION:
        res = fock_algebra_residual(alg)
        results.append(CheckResult("fock_algebra", res <= 1e-12, -res, 1e-12))

    rep = classify(st.gamma)
    results.append(CheckResult("gibbs_interior", rep.set_membership.value == "interior", rep.min_margin, 0.0,
                               rep.set_membership.value))

    ds = abs(st.entropy - st.entropy_check)
    results.append(CheckResult("entropy_two_paths", ds <= 1e-9 * max(1.0, st.entropy), -ds, 1e-9))

    if fb.dimension <= REALIZE_MAX_DIMENSION:
        h = build_operator(spec, fb).toarray()
        worst = np.inf
        for _ in range(KLEIN_SAMPLES):
            rho = _random_density(rng, fb.dimension, fb)
            worst = min(worst, grand_potential_of(rho, h, beta) - st.omega)
        gibbs_gap = abs(grand_potential_of(st.to_density_operator(), h, beta) - st.omega)
        ok = worst > -1e-10 and gibbs_gap <= 1e-10 * max(1.0, abs(st.omega))
        results.append(CheckResult("klein_bound", bool(ok), float(worst), -1e-10,
                                   f"gibbs gap {gibbs_gap:.3e}"))

    scale = _potential_scale(spec)
    worst = np.inf
    for _ in range(SEGMENTS):
        va = _random_hermitian(rng, spec.n_basis, scale)
        vb = _random_hermitian(rng, spec.n_basis, scale)
        om = [model.state(beta, v).omega for v in (va, vb, 0.5 * (va + vb))]
        worst = min(worst, om[2] - 0.5 * (om[0] + om[1]))
    results.append(CheckResult("omega_concavity", worst > -1e-9, float(worst), -1e-9))

    v = _random_hermitian(rng, spec.n_basis, scale)
    if validate_potential(spec, v).passed:
        g = model.state(beta, v).gamma
        inv = v_from_gamma(spec, g, beta, truncation=trunc)
        err = float(np.linalg.norm(inv.v.v - v))
        results.append(CheckResult("inversion_roundtrip", bool(inv.converged and err < 1e-6), -err, 1e-6,
                                   f"{inv.iterations} iterations"))

    ens = coleman_fractional(st.gamma)
    if fb.dimension <= REALIZE_MAX_DIMENSION and (
            spec.statistics is Statistics.FERMION or max(sum(c) for _, c in ens.terms) <= fb.truncation):
        err = float(np.linalg.norm(realize(ens, fb).one_rdm().matrix - st.gamma.matrix))
    else:
        err = float(np.linalg.norm(ens.one_rdm().matrix - st.gamma.matrix))
    results.append(CheckResult("coleman_reconstruction", err < 1e-10, -err, 1e-10, f"{len(ens.terms)} terms"))

    if not spec.interacting and fb.dimension <= REALIZE_MAX_DIMENSION:
        sol = bogoliubov.diagonalize(bogoliubov.QuadraticSpec.from_hamiltonian(spec))
        if sol.stable and (spec.statistics is Statistics.FERMION or spec.conserves_number):
            e_ed = float(np.linalg.eigvalsh(build_operator(spec, fb).toarray()).min())
            gap = abs(sol.ground_constant - e_ed)
            results.append(CheckResult("bogoliubov_ground", gap <= 1e-8 * max(1.0, abs(e_ed)), -gap, 1e-8))

    zb = verify_z_bound(spec, beta, st)
    if zb.applicable:
        results.append(CheckResult("z_bound", bool(zb.passed), float(1.0 - zb.saturation), 0.0,
                                   f"K_l {zb.k_l:.6g}"))
    return CheckTable(seed, tuple(results))
