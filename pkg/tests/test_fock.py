from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import jw_annihilators, jw_index
from rdmft import _backend
from rdmft.checks import fock_algebra_residual
from rdmft.fock import (OneBodyBasis, Statistics, annihilation_matrix, creation_matrix, enumerate_basis,
                        hopping_table, number_operator, one_body_operator, sector_configurations,
                        sector_operator)


def test_fermion_dimension():
    assert enumerate_basis(3, "fermion").dimension == 8
    fb = enumerate_basis(1, "fermion")
    assert [tuple(c) for c in fb.configurations] == [(0,), (1,)]


def test_boson_ordering_example():
    fb = enumerate_basis(2, "boson", 2)
    assert [tuple(c) for c in fb.configurations] == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


@given(nb=st.integers(1, 4), n=st.integers(0, 5))
def test_boson_dimension_formula(nb, n):
    fb = enumerate_basis(nb, "boson", n)
    assert fb.dimension == sum(comb(k + nb - 1, k) for k in range(n + 1))
    assert len({tuple(c) for c in fb.configurations}) == fb.dimension
    assert np.all(np.diff(fb.particle_numbers) >= 0)


def test_labels_basis():
    b = OneBodyBasis(2, ("up", "down"))
    assert enumerate_basis(b, "fermion").dimension == 4
    with pytest.raises(ValueError):
        OneBodyBasis(2, ("only",))


def _ket(fb, cfg):
    v = np.zeros(fb.dimension)
    v[fb.index(cfg)] = 1.0
    return v


def test_fermion_creation_examples():
    fb = enumerate_basis(2, "fermion")
    a0, a1 = creation_matrix(fb, 0), creation_matrix(fb, 1)
    assert np.allclose(a0 @ _ket(fb, (0, 0)), _ket(fb, (1, 0)))
    assert np.allclose(a1 @ _ket(fb, (1, 0)), -_ket(fb, (1, 1)))
    assert np.allclose(a0 @ _ket(fb, (0, 1)), _ket(fb, (1, 1)))
    c1 = annihilation_matrix(fb, 1)
    assert np.allclose(c1 @ _ket(fb, (1, 1)), -_ket(fb, (1, 0)))
    assert not np.any(annihilation_matrix(fb, 0) @ _ket(fb, (0, 0)))


def test_boson_examples():
    fb = enumerate_basis(1, "boson", 3)
    ad = creation_matrix(fb, 0).toarray()
    assert ad[fb.index((3,)), fb.index((2,))] == pytest.approx(np.sqrt(3))
    a = annihilation_matrix(fb, 0)
    assert np.allclose(a @ _ket(fb, (1,)), _ket(fb, (0,)))
    assert np.allclose(number_operator(fb).diagonal(), [0, 1, 2, 3])
    # creation past the truncation is dropped
    assert not np.any(creation_matrix(fb, 0) @ _ket(fb, (3,)))


def test_number_operator_identity():
    # bosonic sqrt(n) * sqrt(n) is exact only up to one rounding
    for fb, tol in ((enumerate_basis(2, "fermion"), 0.0), (enumerate_basis(3, "boson", 3), 1e-14)):
        n = sum(creation_matrix(fb, i) @ annihilation_matrix(fb, i) for i in range(fb.n_basis))
        assert abs(n - number_operator(fb)).max() <= tol
    assert np.array_equal(number_operator(enumerate_basis(2, "fermion")).diagonal(), [0, 1, 1, 2])


@pytest.mark.parametrize("nb", [1, 2, 3, 4])
def test_fermion_matrices_match_jordan_wigner(nb):
    # with the sign counting occupied orbitals below i, the JW string is the same convention
    fb = enumerate_basis(nb, "fermion")
    perm = np.array([jw_index(c) for c in fb.configurations])
    for i, a in enumerate(jw_annihilators(nb)):
        ours = annihilation_matrix(fb, i).toarray()
        assert np.array_equal(ours, a[np.ix_(perm, perm)])


@pytest.mark.parametrize("nb,trunc", [(1, 5), (2, 4), (3, 3)])
def test_canonical_relations(nb, trunc):
    assert fock_algebra_residual(enumerate_basis(nb, "fermion")) <= 1e-12
    assert fock_algebra_residual(enumerate_basis(nb, "boson", trunc)) <= 1e-12


def test_index_roundtrip():
    fb = enumerate_basis(3, "boson", 4)
    for k in range(fb.dimension):
        assert fb.index(fb.configuration(k)) == k
    with pytest.raises((KeyError, ValueError)):
        fb.index((5, 0, 0))


def test_invalid_inputs():
    with pytest.raises(ValueError):
        enumerate_basis(0, "fermion")
    with pytest.raises(ValueError):
        enumerate_basis(2, "boson")
    with pytest.raises(ValueError):
        enumerate_basis(2, "anyon")
    fb = enumerate_basis(2, "fermion")
    with pytest.raises(IndexError):
        creation_matrix(fb, 2)


def test_statistics_parse():
    assert Statistics.parse("Boson") is Statistics.BOSON
    assert Statistics.FERMION.sign == -1 and Statistics.BOSON.sign == 1


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), stats=st.sampled_from(["fermion", "boson"]))
def test_one_body_operator_and_hops(seed, stats):
    rng = np.random.default_rng(seed)
    nb = 3
    fb = enumerate_basis(nb, stats, 3 if stats == "boson" else None)
    m = rng.normal(size=(nb, nb)) + 1j * rng.normal(size=(nb, nb))
    direct = sum(m[i, j] * creation_matrix(fb, i) @ annihilation_matrix(fb, j)
                 for i in range(nb) for j in range(nb))
    assert abs(one_body_operator(fb, m) - direct).max() < 1e-12
    tags, rows, cols, vals = hopping_table(fb)
    dense = np.zeros((fb.dimension, fb.dimension), complex)
    np.add.at(dense, (rows, cols), m.T.reshape(-1)[tags] * vals)
    assert np.allclose(dense, direct.toarray(), atol=1e-12)


@pytest.mark.parametrize("stats", ["fermion", "boson"])
def test_sector_blocks_match_full(stats):
    nb = 3
    trunc = 4 if stats == "boson" else None
    fb = enumerate_basis(nb, stats, trunc)
    terms = [(0.7, ((0, True), (1, False))), (0.7, ((1, True), (0, False))),
             (1.3, ((2, True), (2, False))),
             (0.4, ((0, True), (1, True), (1, False), (0, False)))]
    full = fb.apply_terms(terms).toarray()
    for n, sl in fb.sectors():
        if n > 3:
            continue
        block = sector_operator(nb, stats, n, terms).toarray()
        assert np.allclose(block, full[sl, sl])
        assert np.array_equal(sector_configurations(nb, stats, n), fb.configurations[sl])
    with pytest.raises(ValueError):
        sector_operator(nb, stats, 1, [(1.0, ((0, True),))])


@pytest.mark.skipif(_backend.BACKEND != "compiled", reason="extension not built")
@pytest.mark.parametrize("stats,nb,trunc", [("fermion", 5, None), ("boson", 3, 5)])
def test_backends_agree(stats, nb, trunc):
    fb = enumerate_basis(nb, stats, trunc)
    rng = np.random.default_rng(3)
    terms = []
    for _ in range(40):
        k = rng.integers(1, 5)
        ops = tuple((int(rng.integers(nb)), bool(rng.integers(2))) for _ in range(k))
        terms.append((complex(rng.normal(), rng.normal()), ops))
    py = fb.apply_terms(terms, backend="python")
    cc = fb.apply_terms(terms, backend="compiled")
    assert abs(py - cc).max() == 0
    occ = fb.configurations
    assert np.array_equal(_backend.rank_configs(occ, fb._above, fb._offsets, backend="python"),
                          _backend.rank_configs(occ, fb._above, fb._offsets, backend="compiled"))
