"""Compare the numba and pure-numpy kernels on the two hot paths.

    python3 benchmarks/bench_backends.py [--repeat 3]

Fixed-point iteration runs the survival map on a tree-line window just above
its critical rate (slow geometric convergence).  Simulation runs 2000
generation replicas on the single-site kernel.  Compile time is excluded by
one warm-up call.  Both backends must agree; the script checks that too.
"""

import argparse
import time

import numpy as np

from brwcrit import kernels
from brwcrit.brw import BRWLaw
from brwcrit.corpus import single_site, tree_line
from brwcrit.sim import _sampling_arrays, replica_seeds


def best_of(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def fixed_point_case(impl, law, max_iter):
    indptr, indices, data = law.csr
    hist = np.zeros((0, law.n))
    return lambda: impl.iterate_brw(indptr, indices, data, law.escape, law.lam, 1, 1e-10,
                                    max_iter, 0.0, 1e-12, hist)


def simulation_case(impl, law, n_rep):
    indptr, indices, cumw, rates = _sampling_arrays(law)
    seeds = replica_seeds(7, 0, n_rep)
    return lambda: impl.generations(indptr, indices, cumw, rates, law.lam, 0, 200, 500, 50, seeds)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--window", type=int, default=256)
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--replicas", type=int, default=2000)
    args = ap.parse_args()

    fp_law = BRWLaw(tree_line(4), 0.26, tree_line(4).window(args.window))
    sim_law = BRWLaw(single_site(), 2.0)
    cases = [
        ("fixed point", lambda impl: fixed_point_case(impl, fp_law, args.iters)),
        ("simulation", lambda impl: simulation_case(impl, sim_law, args.replicas)),
    ]
    print(f"{'case':<12} {'numba s':>10} {'numpy s':>10} {'speedup':>8}  agree")
    for name, make in cases:
        fast, slow = make(kernels.numba_impl), make(kernels.numpy_impl)
        fast()  # compile
        t_fast, r_fast = best_of(fast, args.repeat)
        t_slow, r_slow = best_of(slow, 1)
        agree = all(np.allclose(a, b, rtol=1e-12, atol=0) for a, b in zip(r_fast, r_slow))
        print(f"{name:<12} {t_fast:>10.4f} {t_slow:>10.4f} {t_slow / t_fast:>8.1f}  {agree}")


if __name__ == "__main__":
    main()
