"""Pure-Python (numpy-vectorized) fallback for the operator-string kernels.

Mirrors ``_kernels.pyx`` exactly; see that file for the argument layout.
"""

import numpy as np


def rank_configs(occ, above, offsets):
    """Canonical index of each occupation vector in ``occ`` (shape ``(m, nb)``)."""
    occ = np.asarray(occ, dtype=np.int64)
    m, nb = occ.shape
    remaining = occ.sum(axis=1)
    idx = offsets[remaining].copy()
    for p in range(nb - 1):
        k = nb - p - 1
        idx += above[k, remaining, occ[:, p]]
        remaining = remaining - occ[:, p]
    return idx


def apply_terms(configs, above, offsets, fermion, max_total,
                term_orbs, term_dag, term_len, coefs):
    """Apply a batch of creation/annihilation strings to every configuration.

    Returns COO triplets ``(rows, cols, vals)`` such that the operator
    ``sum_t coefs[t] * string_t`` has matrix element ``vals`` at ``(rows, cols)``.
    Duplicate positions are to be summed by the caller.
    """
    configs = np.asarray(configs, dtype=np.int64)
    dim, nb = configs.shape
    rows_out, cols_out, vals_out = [], [], []
    all_cols = np.arange(dim, dtype=np.int64)
    for t in range(len(coefs)):
        occ = configs.copy()
        amp = np.ones(dim, dtype=np.float64)
        alive = np.ones(dim, dtype=bool)
        total = occ.sum(axis=1)
        for s in range(term_len[t] - 1, -1, -1):
            i = term_orbs[t, s]
            ni = occ[:, i]
            if term_dag[t, s]:
                if fermion:
                    alive &= ni == 0
                    parity = occ[:, :i].sum(axis=1) & 1
                    amp *= np.where(parity == 1, -1.0, 1.0)
                else:
                    alive &= total + 1 <= max_total
                    amp *= np.sqrt(np.maximum(ni + 1, 0).astype(np.float64))
                occ[:, i] = ni + 1
                total = total + 1
            else:
                alive &= ni > 0
                if fermion:
                    parity = occ[:, :i].sum(axis=1) & 1
                    amp *= np.where(parity == 1, -1.0, 1.0)
                else:
                    amp *= np.sqrt(np.maximum(ni, 0).astype(np.float64))
                occ[:, i] = ni - 1
                total = total - 1
        # dead rows may hold out-of-range occupations; only live rows are ranked
        if not alive.any():
            continue
        sel = np.nonzero(alive)[0]
        rows_out.append(rank_configs(occ[sel], above, offsets))
        cols_out.append(all_cols[sel])
        vals_out.append(coefs[t] * amp[sel])
    if not rows_out:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), np.zeros(0, dtype=np.complex128)
    return (np.concatenate(rows_out), np.concatenate(cols_out),
            np.concatenate(vals_out).astype(np.complex128))
