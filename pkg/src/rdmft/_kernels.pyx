# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled operator-string kernels.

Configurations are rows of occupation numbers in canonical order (ascending
particle number, then descending lexicographic).  A term is a product of
creation/annihilation operators written left to right; it acts on a ket from
the right.  ``above[k, r, x]`` counts the length-``k`` occupation tails of
total ``r`` whose leading entry exceeds ``x``; together with ``offsets`` it
ranks a configuration without a hash table.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline long _rank(long* occ, int nb, const long[:, :, ::1] above,
                       const long[::1] offsets) noexcept nogil:
    cdef long remaining = 0
    cdef int p
    for p in range(nb):
        remaining += occ[p]
    cdef long idx = offsets[remaining]
    for p in range(nb - 1):
        idx += above[nb - p - 1, remaining, occ[p]]
        remaining -= occ[p]
    return idx


cdef inline int _act(long* occ, int nb, bint fermion, long max_total,
                     const long[:, ::1] term_orbs, const unsigned char[:, ::1] term_dag,
                     long t, long length, double* amp) noexcept nogil:
    """Apply term ``t`` to ``occ`` in place; return 0 if the result vanishes."""
    cdef long s, q, total = 0, parity
    cdef long i, ni
    for q in range(nb):
        total += occ[q]
    amp[0] = 1.0
    for s in range(length - 1, -1, -1):
        i = term_orbs[t, s]
        ni = occ[i]
        if fermion:
            parity = 0
            for q in range(i):
                parity += occ[q]
            if term_dag[t, s]:
                if ni != 0:
                    return 0
                occ[i] = 1
                total += 1
            else:
                if ni != 1:
                    return 0
                occ[i] = 0
                total -= 1
            if parity & 1:
                amp[0] = -amp[0]
        else:
            if term_dag[t, s]:
                if total + 1 > max_total:
                    return 0
                amp[0] *= sqrt(<double>(ni + 1))
                occ[i] = ni + 1
                total += 1
            else:
                if ni == 0:
                    return 0
                amp[0] *= sqrt(<double>ni)
                occ[i] = ni - 1
                total -= 1
    return 1


def rank_configs(occ_in, above_in, offsets_in):
    cdef const long[:, ::1] occ = np.ascontiguousarray(occ_in, dtype=np.int64)
    cdef const long[:, :, ::1] above = np.ascontiguousarray(above_in, dtype=np.int64)
    cdef const long[::1] offsets = np.ascontiguousarray(offsets_in, dtype=np.int64)
    cdef long m = occ.shape[0]
    cdef int nb = occ.shape[1]
    out = np.empty(m, dtype=np.int64)
    cdef long[::1] out_v = out
    cdef long[::1] buf = np.empty(max(nb, 1), dtype=np.int64)
    cdef long r, q
    for r in range(m):
        for q in range(nb):
            buf[q] = occ[r, q]
        out_v[r] = _rank(&buf[0], nb, above, offsets)
    return out


def apply_terms(configs_in, above_in, offsets_in, bint fermion, long max_total,
                term_orbs_in, term_dag_in, term_len_in, coefs_in):
    """Compiled twin of ``_kernels_py.apply_terms``; identical COO output order."""
    cdef const long[:, ::1] configs = np.ascontiguousarray(configs_in, dtype=np.int64)
    cdef const long[:, :, ::1] above = np.ascontiguousarray(above_in, dtype=np.int64)
    cdef const long[::1] offsets = np.ascontiguousarray(offsets_in, dtype=np.int64)
    cdef const long[:, ::1] term_orbs = np.ascontiguousarray(term_orbs_in, dtype=np.int64)
    cdef const unsigned char[:, ::1] term_dag = np.ascontiguousarray(term_dag_in, dtype=np.uint8)
    cdef const long[::1] term_len = np.ascontiguousarray(term_len_in, dtype=np.int64)
    cdef const double complex[::1] coefs = np.ascontiguousarray(coefs_in, dtype=np.complex128)

    cdef long dim = configs.shape[0]
    cdef int nb = configs.shape[1]
    cdef long n_terms = coefs.shape[0]
    cdef long[::1] occ = np.empty(max(nb, 1), dtype=np.int64)
    cdef double amp = 0.0
    cdef long t, c, q, count = 0, pos = 0

    with nogil:
        for t in range(n_terms):
            for c in range(dim):
                for q in range(nb):
                    occ[q] = configs[c, q]
                count += _act(&occ[0], nb, fermion, max_total, term_orbs, term_dag,
                              t, term_len[t], &amp)

    rows = np.empty(count, dtype=np.int64)
    cols = np.empty(count, dtype=np.int64)
    vals = np.empty(count, dtype=np.complex128)
    cdef long[::1] rows_v = rows
    cdef long[::1] cols_v = cols
    cdef double complex[::1] vals_v = vals

    with nogil:
        for t in range(n_terms):
            for c in range(dim):
                for q in range(nb):
                    occ[q] = configs[c, q]
                if _act(&occ[0], nb, fermion, max_total, term_orbs, term_dag,
                        t, term_len[t], &amp):
                    rows_v[pos] = _rank(&occ[0], nb, above, offsets)
                    cols_v[pos] = c
                    vals_v[pos] = coefs[t] * amp
                    pos += 1
    return rows, cols, vals
