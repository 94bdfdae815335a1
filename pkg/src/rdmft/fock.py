"""Finite-basis Fock spaces and second-quantized operator matrices.

Orbitals are indexed from 0.  Configurations are ordered by ascending total
particle number and, within a sector, in descending lexicographic order of
the occupation vector, e.g. for two bosonic modes truncated at two particles::

    (0,0) (1,0) (0,1) (2,0) (1,1) (0,2)

Bosonic states are the normalized occupation states, so
``a_i^dag |.. n_i ..> = sqrt(n_i + 1) |.. n_i + 1 ..>``.  Fermionic creation
and annihilation on orbital ``i`` pick up ``(-1)**(number of occupied orbitals
with index < i)``.
"""

from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import _backend


class Statistics(str, Enum):
    FERMION = "fermion"
    BOSON = "boson"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"statistics must be 'fermion' or 'boson', got {value!r}") from None

    @property
    def sign(self) -> int:
        """+1 for bosons, -1 for fermions (the ``(1 +- n)`` sign in closed forms)."""
        return 1 if self is Statistics.BOSON else -1


@dataclass(frozen=True)
class OneBodyBasis:
    n_basis: int
    labels: Optional[tuple] = None

    def __post_init__(self):
        if int(self.n_basis) < 1:
            raise ValueError("n_basis must be >= 1")
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != self.n_basis or len(set(labels)) != len(labels):
                raise ValueError("labels must be unique and have length n_basis")
            object.__setattr__(self, "labels", labels)


def _count_table(nb, max_total, cap):
    # cnt[k, r]: occupation vectors of length k, sum r, entries <= cap
    cnt = np.zeros((nb + 1, max_total + 1), dtype=np.int64)
    cnt[0, 0] = 1
    for k in range(1, nb + 1):
        for r in range(max_total + 1):
            cnt[k, r] = cnt[k - 1, max(0, r - cap):r + 1].sum()
    return cnt


def _above_table(cnt, cap):
    # above[k, r, x] = sum_{m=x+1}^{min(cap, r)} cnt[k, r - m]
    nb1, m1 = cnt.shape
    cp = np.zeros((nb1, m1 + 1), dtype=np.int64)
    cp[:, 1:] = np.cumsum(cnt, axis=1)
    r = np.arange(m1)[:, None]
    x = np.arange(m1)[None, :]
    top = np.minimum(cap, r)
    hi = np.clip(r - x, 0, m1)
    above = cp[:, hi] - cp[:, np.broadcast_to(r - top, hi.shape)]
    return np.where(x < top, above, 0)


def _sector_configs(nb, total, cap):
    out = []
    buf = [0] * nb

    def rec(p, remaining):
        if p == nb - 1:
            if remaining <= cap:
                buf[p] = remaining
                out.append(tuple(buf))
            return
        slots = nb - p - 1
        for m in range(min(cap, remaining), -1, -1):
            if remaining - m <= cap * slots:
                buf[p] = m
                rec(p + 1, remaining - m)

    rec(0, total)
    return out


@dataclass(frozen=True, eq=False)
class FockBasis:
    """Enumerated occupation-number basis of a (possibly truncated) Fock space."""

    statistics: Statistics
    n_basis: int
    truncation: Optional[int]
    configurations: np.ndarray
    _above: np.ndarray
    _offsets: np.ndarray

    @property
    def dimension(self) -> int:
        return self.configurations.shape[0]

    @property
    def max_total(self) -> int:
        return self.n_basis if self.statistics is Statistics.FERMION else self.truncation

    @cached_property
    def particle_numbers(self) -> np.ndarray:
        return self.configurations.sum(axis=1)

    @cached_property
    def hops(self):
        """Cached :func:`hopping_table` of this basis."""
        return hopping_table(self)

    def sectors(self):
        """List of ``(N, slice)`` for the contiguous particle-number sectors."""
        return [(n, slice(int(self._offsets[n]), int(self._offsets[n + 1])))
                for n in range(self.max_total + 1)]

    def index(self, config: Sequence[int]) -> int:
        occ = np.asarray(config, dtype=np.int64).reshape(1, -1)
        if occ.shape[1] != self.n_basis:
            raise ValueError("configuration length does not match n_basis")
        cap = 1 if self.statistics is Statistics.FERMION else self.max_total
        if occ.min() < 0 or occ.max() > cap or occ.sum() > self.max_total:
            raise KeyError(f"configuration {tuple(config)} not in basis")
        return int(_backend.rank_configs(occ, self._above, self._offsets)[0])

    def configuration(self, index: int) -> tuple:
        return tuple(int(x) for x in self.configurations[index])

    def apply_terms(self, terms, backend=None):
        """Sparse matrix of ``sum coef * string`` for ``terms = [(coef, ((orb, dagger), ...)), ...]``."""
        dim = self.dimension
        if not terms:
            return sp.csr_matrix((dim, dim), dtype=np.complex128)
        rows, cols, vals = _apply(self.configurations, self._above, self._offsets,
                                  self.statistics, self.max_total, self.n_basis, terms, backend)
        return sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()


def _apply(configs, above, offsets, stats, max_total, nb, terms, backend=None):
    longest = max(max(len(ops) for _, ops in terms), 1)
    n = len(terms)
    orbs = np.zeros((n, longest), dtype=np.int64)
    dags = np.zeros((n, longest), dtype=np.uint8)
    lens = np.zeros(n, dtype=np.int64)
    coefs = np.zeros(n, dtype=np.complex128)
    for t, (coef, ops) in enumerate(terms):
        coefs[t] = coef
        lens[t] = len(ops)
        for s, (orb, dag) in enumerate(ops):
            if not 0 <= orb < nb:
                raise IndexError(f"orbital index {orb} out of range 0..{nb - 1}")
            orbs[t, s] = orb
            dags[t, s] = bool(dag)
    return _backend.apply_terms(configs, above, offsets, stats is Statistics.FERMION, max_total,
                                orbs, dags, lens, coefs, backend=backend)


def enumerate_basis(basis, statistics, truncation: Optional[int] = None) -> FockBasis:
    """Enumerate the Fock basis over ``basis`` (a ``OneBodyBasis`` or an orbital count)."""
    nb = basis.n_basis if isinstance(basis, OneBodyBasis) else int(basis)
    if nb < 1:
        raise ValueError("n_basis must be >= 1")
    stats = Statistics.parse(statistics)
    if stats is Statistics.FERMION:
        truncation = None
    else:
        if truncation is None:
            raise ValueError("bosonic basis requires a truncation")
        truncation = int(truncation)
        if truncation < 0:
            raise ValueError("bosonic truncation must be >= 0")
    return _enumerate(nb, stats, truncation)


@lru_cache(maxsize=64)
def _enumerate(nb, stats, truncation):
    if stats is Statistics.FERMION:
        cap, max_total = 1, nb
    else:
        cap = max_total = truncation
    cnt = _count_table(nb, max_total, cap)
    above = _above_table(cnt, cap)
    offsets = np.zeros(max_total + 2, dtype=np.int64)
    offsets[1:] = np.cumsum(cnt[nb])
    configs = []
    for n in range(max_total + 1):
        configs.extend(_sector_configs(nb, n, cap))
    arr = np.array(configs, dtype=np.int64).reshape(-1, nb)
    arr.setflags(write=False)
    above.setflags(write=False)
    offsets.setflags(write=False)
    return FockBasis(stats, nb, truncation, arr, above, offsets)


def creation_matrix(fb: FockBasis, i: int):
    return fb.apply_terms([(1.0, ((i, True),))])


def annihilation_matrix(fb: FockBasis, i: int):
    return fb.apply_terms([(1.0, ((i, False),))])


def number_operator(fb: FockBasis):
    """Diagonal matrix of total particle numbers."""
    return sp.diags(fb.particle_numbers.astype(np.complex128), format="csr")


def one_body_operator(fb: FockBasis, matrix):
    """Sparse matrix of ``sum_ij matrix[i, j] a_i^dag a_j``."""
    matrix = np.asarray(matrix)
    nb = fb.n_basis
    terms = [(matrix[i, j], ((i, True), (j, False)))
             for i in range(nb) for j in range(nb) if matrix[i, j] != 0]
    return fb.apply_terms(terms)


def hopping_table(fb: FockBasis):
    """COO transition data of every ``a_j^dag a_i``, tagged with the flat index ``i * nb + j``.

    Returns ``(tags, rows, cols, vals)``; the expectation value of
    ``a_j^dag a_i`` in a state with density matrix ``rho`` is
    ``sum(vals * rho[cols, rows])`` over entries with that tag.
    """
    nb = fb.n_basis
    tags, rows, cols, vals = [], [], [], []
    for i in range(nb):
        for j in range(nb):
            m = fb.apply_terms([(1.0, ((j, True), (i, False)))]).tocoo()
            tags.append(np.full(m.nnz, i * nb + j, dtype=np.int64))
            rows.append(m.row.astype(np.int64))
            cols.append(m.col.astype(np.int64))
            vals.append(m.data)
    return (np.concatenate(tags), np.concatenate(rows),
            np.concatenate(cols), np.concatenate(vals))


@lru_cache(maxsize=32)
def _tables(nb, cap, max_total):
    cnt = _count_table(nb, max_total, cap)
    above = _above_table(cnt, cap) if nb > 1 else np.zeros((nb + 1, 1, 1), dtype=np.int64)
    offsets = np.zeros(max_total + 2, dtype=np.int64)
    offsets[1:] = np.cumsum(cnt[nb])
    above.setflags(write=False)
    offsets.setflags(write=False)
    return above, offsets


@lru_cache(maxsize=256)
def _sector_tables(nb, stats, n):
    if stats is Statistics.FERMION:
        cap, max_total = 1, nb
    else:
        # bosonic ranking tables are shared by all sectors up to the next power of two
        cap = max_total = max(8, 1 << max(n - 1, 0).bit_length())
    above, offsets = _tables(nb, cap, max_total)
    configs = np.array(_sector_configs(nb, n, min(cap, n)), dtype=np.int64).reshape(-1, nb)
    configs.setflags(write=False)
    return configs, above, offsets, max_total


def sector_configurations(n_basis: int, statistics, n: int) -> np.ndarray:
    """Configurations with exactly ``n`` particles, in canonical order."""
    return _sector_tables(int(n_basis), Statistics.parse(statistics), int(n))[0]


def sector_operator(n_basis: int, statistics, n: int, terms):
    """Block of a number-conserving operator on the ``n``-particle sector.

    The block coincides with the corresponding diagonal block of the operator
    on any full basis containing the sector.
    """
    stats = Statistics.parse(statistics)
    configs, above, offsets, max_total = _sector_tables(int(n_basis), stats, int(n))
    size = configs.shape[0]
    if not terms:
        return sp.csr_matrix((size, size), dtype=np.complex128)
    rows, cols, vals = _apply(configs, above, offsets, stats, max_total, int(n_basis), terms)
    rows = rows - offsets[n]
    if rows.size and (rows.min() < 0 or rows.max() >= size):
        raise ValueError("operator does not conserve particle number")
    return sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
