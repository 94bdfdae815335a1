"""Time Hamiltonian assembly with the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat 3]

Both backends build the same sparse matrix; the script asserts that before
reporting timings.
"""

import argparse
import time

import numpy as np

from rdmft import _backend
from rdmft.fock import enumerate_basis
from rdmft.hamiltonian import HamiltonianSpec, hamiltonian_terms

CASES = [
    ("fermion", 8, None),
    ("fermion", 10, None),
    ("fermion", 12, None),
    ("boson", 3, 12),
    ("boson", 4, 8),
]


def hubbard_like(stats, nb, trunc, seed=0):
    rng = np.random.default_rng(seed)
    h1 = -np.eye(nb, k=1) - np.eye(nb, k=-1) + np.diag(rng.uniform(0.5, 1.5, nb))
    w = np.zeros((nb,) * 4)
    for i in range(nb):
        for j in range(nb):
            if i != j or stats == "boson":
                w[i, j, j, i] = 1.0
    return HamiltonianSpec(stats, nb, h1.astype(complex), w=w.astype(complex), bosonic_truncation=trunc)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    try:
        _backend.get("compiled")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1
    print(f"{'case':<16}{'dim':>8}{'terms':>8}{'python [s]':>13}{'compiled [s]':>14}{'speedup':>9}")
    for stats, nb, trunc in CASES:
        spec = hubbard_like(stats, nb, trunc)
        fb = enumerate_basis(nb, stats, trunc)
        terms = hamiltonian_terms(spec)
        tp, hp = best_of(lambda: fb.apply_terms(terms, backend="python"), args.repeat)
        tc, hc = best_of(lambda: fb.apply_terms(terms, backend="compiled"), args.repeat)
        diff = abs(hp - hc).max() if hp.nnz else 0.0
        assert diff == 0.0, f"backends disagree by {diff}"
        label = f"{stats} Nb={nb}" + (f" N<={trunc}" if trunc else "")
        print(f"{label:<16}{fb.dimension:>8}{len(terms):>8}{tp:>13.4f}{tc:>14.4f}{tp / tc:>9.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
