"""Acceptance gate: one test per criterion, each logging a PASS/FAIL line."""

import math
import time
import warnings

import numpy as np
import pytest
from scipy.sparse.csgraph import breadth_first_order

from brwcrit.branching import extinction_probs, survival_probs, survival_verdict
from brwcrit.brw import BRWLaw, brw_G, brw_H, enumerate_offspring
from brwcrit.corpus import (example1, example1_dominated_q, example2, example4,
                            example4_certificate, log_beta, oscillating_c, single_site,
                            tree_line, two_site)
from brwcrit.critical import (Certificate, check_certificate, lambda_s, lambda_w_bracket,
                              lambda_w_finite)
from brwcrit.genfun import ReachabilityWarning, parameter_estimates, series
from brwcrit.graph import WeightedKernel, first_passage_logs, kernel_power_row
from brwcrit.sim import SimConfig, estimate_survival, sample_offspring_batch

from conftest import positive_dense, record

SEED = 20261016


def perron_oracle(a, iters=200_000, tol=1e-14):
    """Plain power iteration on a + I; independent of the library's solver."""
    b = a + np.eye(a.shape[0])
    v = np.ones(a.shape[0])
    for _ in range(iters):
        u = b @ v
        r = u / v
        v = u / u.max()
        if r.max() - r.min() <= tol * r.max():
            break
    return 0.5 * (r.max() + r.min()) - 1.0


def random_irreducible(seed=SEED, count=50):
    rng = np.random.default_rng(seed)
    return [WeightedKernel.from_dense(positive_dense(rng, int(rng.integers(3, 9))))
            for _ in range(count)]


# ---------------------------------------------------------------------------


def test_criterion_1_single_site():
    t0 = time.perf_counter()
    K = single_site(1.0)
    worst_q, inside = 0.0, []
    for lam in (1.5, 2.0, 4.0):
        q = extinction_probs(BRWLaw(K, lam)).limit[0]
        worst_q = max(worst_q, abs(q - 1 / lam))
        out = estimate_survival(BRWLaw(K, lam), SimConfig(lam=lam, replicas=10_000, seed=SEED))
        inside.append((lam, out.p_hat, out.ci_low <= 1 - 1 / lam <= out.ci_high))
    elapsed = time.perf_counter() - t0
    ok = worst_q <= 1e-8 and all(i for *_, i in inside) and elapsed < 10
    detail = (f"max |q - 1/lam| = {worst_q:.1e}; sim "
              + ", ".join(f"lam={lam}: {p:.4f} {'in' if i else 'OUT of'} CI" for lam, p, i in inside)
              + f"; {elapsed:.1f} s")
    assert record(1, ok, detail)


def test_criterion_2_finite_exactness():
    t0 = time.perf_counter()
    worst_w = worst_phi = worst_ws = 0.0
    for K in random_irreducible():
        rho = perron_oracle(K.dense())
        lw = lambda_w_finite(K, 0)
        ls = lambda_s(K, 0)
        lphi = lambda_s(K, 0, method="phi", n_max=2048, tol=1e-10)
        worst_w = max(worst_w, abs(lw - 1 / rho))
        worst_phi = max(worst_phi, abs(lphi - ls))
        worst_ws = max(worst_ws, abs(lw - ls))
    elapsed = time.perf_counter() - t0
    ok = worst_w <= 1e-9 and worst_phi <= 1e-6 and worst_ws <= 1e-12 and elapsed < 30
    assert record(2, ok, f"|lambda_w - 1/rho| <= {worst_w:.1e}, |phi - spectral| <= "
                         f"{worst_phi:.1e}, |lambda_w - lambda_s| <= {worst_ws:.1e}; "
                         f"{elapsed:.1f} s")


def test_criterion_3_min_rule():
    rng = np.random.default_rng(SEED + 3)
    worst = 0.0
    for _ in range(20):
        sizes = [int(s) for s in rng.integers(1, 4, size=int(rng.integers(2, 5)))]
        n = sum(sizes)
        starts = np.cumsum([0] + sizes)
        a = np.zeros((n, n))
        for b, m in enumerate(sizes):
            blk = slice(starts[b], starts[b + 1])
            a[blk, blk] = positive_dense(rng, m)
            for c in range(b + 1, len(sizes)):
                if rng.random() < 0.5:
                    a[rng.integers(starts[b], starts[b + 1]),
                      rng.integers(starts[c], starts[c + 1])] = rng.uniform(0.1, 2.0)
        K = WeightedKernel.from_dense(a)
        for x in range(n):
            reach = set(breadth_first_order(a, x, directed=True, return_predecessors=False))
            expect = min(1 / perron_oracle(a[starts[b]:starts[b + 1], starts[b]:starts[b + 1]])
                         for b in range(len(sizes)) if starts[b] in reach)
            worst = max(worst, abs(lambda_w_finite(K, x) / expect - 1))
    assert record(3, worst <= 1e-12, f"max relative gap to the per-class oracle {worst:.1e} "
                                     f"over 20 block-triangular kernels")


def test_criterion_4_example1():
    p = [2.0 ** (-i - 2) for i in range(200)]
    rep = extinction_probs(example1(p, n=128, dominated=True), tol=0.0, max_iter=50, history=51)
    err = max(abs(rep.history[n][j] - example1_dominated_q(p, j, n))
              for n in range(1, 51) for j in range(21))
    # n generations from type 0 stay below type n, so on a window of 128 the
    # first 127 iterates are exact; the dominated law bounds them uniformly
    limit = 1.0 - math.prod(1.0 - pi for pi in p)
    full = extinction_probs(example1(p, n=128), tol=0.0, max_iter=120, history=121)
    q0 = full.history[-1][0]
    dom = np.array([example1_dominated_q(p, 0, n) for n in range(1, 121)])
    bounded = bool(np.all(full.history[1:, 0] <= dom + 1e-15)) and q0 <= limit < 1
    harm = [1.0 / (i + 2) for i in range(1200)]
    rep_h = extinction_probs(example1(harm, n=1100, dominated=True), tol=0.0, max_iter=1000,
                             history=1001)
    seq = [rep_h.history[n][0] for n in (10, 100, 1000)]
    ok = err <= 1e-12 and bounded and seq[0] < seq[1] < seq[2] and seq[2] > 0.99
    assert record(4, ok, f"closed-form err {err:.1e}; q_120(0) = {q0:.4f} <= {limit:.4f} "
                         f"for p = 2^(-i-2); "
                         f"harmonic p: q_n(0) = " + ", ".join(f"{s:.4f}" for s in seq))


def shift_closed_form(lam, beta, i, n):
    den = 1.0 + sum(lam**r * beta[i + n] / beta[i + n - r] for r in range(1, n + 1))
    return lam**n * (beta[i + n] / beta[i]) / den


def test_criterion_5_example2():
    t0 = time.perf_counter()
    worst = 0.0
    for k in (0.5, 1.0, 2.0, [1.0, 3.0, 0.5, 2.0]):
        for lam in (0.7, 1.3):
            K = example2(k)
            rep = survival_probs(BRWLaw(K, lam, K.window(100)), tol=0.0, max_iter=40,
                                 history=41)
            beta = np.exp(log_beta(k, 100))
            for n in range(1, 41):
                for i in range(50):
                    worst = max(worst, abs(rep.history[n][i] - shift_closed_form(lam, beta, i, n)))
    osc = example2(oscillating=True)
    c = oscillating_c(2)
    lb = log_beta(lambda i: osc.row(i)[1][0], c[5])
    bounds = []
    for r in (1, 2):
        lo = math.exp(lb[c[2 * r]] / c[2 * r])
        hi = math.exp(lb[c[2 * r + 1]] / c[2 * r + 1])
        bounds.append((r, lo, hi, lo <= 1 + 1 / (2 * r) and hi > 2 - 1 / (2 * r + 1)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and all(b[-1] for b in bounds) and elapsed < 60
    assert record(5, ok, f"closed-form err {worst:.1e}; roots "
                  + "; ".join(f"r={r}: {lo:.4f}, {hi:.4f}" for r, lo, hi, _ in bounds)
                  + f"; {elapsed:.1f} s")


def test_criterion_6_example4():
    K = example4()
    cert = check_certificate(Certificate(example4_certificate, 1.0, sites=512), K, tol_cert=0.0)
    brackets = {N: lambda_w_bracket(K, 0, K.window(N)) for N in (128, 256, 512)}
    b512 = brackets[512]
    v0 = [survival_probs(BRWLaw(K, 1.0, K.window(N))).limit[0] for N in (128, 256, 512)]
    mono = all(b >= a - 1e-9 for a, b in zip(v0, v0[1:]))
    parts = {
        "certificate": cert.holds and cert.slack >= 0,
        "bracket": b512.contains(1.0) and b512.width <= 0.05,
        "v(0)": mono and v0[-1] >= 0.4,
    }
    detail = (f"certificate slack {cert.slack:.1e}; brackets "
              + ", ".join(f"N={N}: [{b.lower:.4f}, {b.upper:.4f}]" for N, b in brackets.items())
              + "; v(0) at lam=1: " + ", ".join(f"{v:.6f}" for v in v0)
              + "; failing: " + (", ".join(k for k, ok in parts.items() if not ok) or "none"))
    assert record(6, all(parts.values()), detail)


def test_criterion_7_critical_extinction():
    bad = []
    iters = []
    for idx, K in enumerate(random_irreducible()):
        lw = lambda_w_finite(K, 0)
        at = survival_probs(BRWLaw(K, lw), max_iter=10**8, floor=1e-6)
        above = survival_probs(BRWLaw(K, 1.001 * lw), max_iter=10**8, floor=1e-6)
        iters.append(at.iterations)
        q_at = 1 - at.limit[0]
        if not (survival_verdict(at, 0) == "extinct" and q_at >= 1 - 1e-6):
            bad.append((idx, "at"))
        if survival_verdict(above, 0) != "survives":
            bad.append((idx, "above"))
    assert record(7, not bad, f"50 kernels: extinct at lambda_w (floor hit after "
                              f"{min(iters)}-{max(iters)} iterations), survives at 1.001 lambda_w; "
                              f"exceptions {bad}")


def test_criterion_8_sampler():
    K = WeightedKernel.from_dense([[0.0, 1.0, 2.0, 0.5], [1.0, 0, 0, 0], [1.0, 0, 0, 0],
                                   [1.0, 0, 0, 0]])
    law = BRWLaw(K, 1.0)
    counts = sample_offspring_batch(law, 0, 100_000, SEED)
    exact = {tuple(c.tolist()): p for c, p in enumerate_offspring(law, 0, 6)}
    keys, freq = np.unique(counts, axis=0, return_counts=True)
    emp = {tuple(k.tolist()): f / counts.shape[0] for k, f in zip(keys, freq)}
    tv = 0.5 * sum(abs(emp.get(k, 0.0) - p) for k, p in exact.items())
    assert record(8, tv < 0.01, f"TV over S(f) <= 6 is {tv:.4f} ({len(exact)} outcomes)")


def cross_kernels():
    rng = np.random.default_rng(SEED + 9)
    star = WeightedKernel.from_dense([[0.0, 1.0, 2.0, 0.5], [1.0, 0, 0, 0], [1.0, 0, 0, 0],
                                      [1.0, 0, 0, 0]])
    T = tree_line(3)
    return [
        ("single_site", single_site(1.0), None),
        ("two_site", two_site(1.0), None),
        ("star", star, None),
        ("random4", WeightedKernel.from_dense(positive_dense(rng, 4)), None),
        ("tree_line30", T, T.window(30)),
    ]


def test_criterion_9_cross_simulator():
    t0 = time.perf_counter()
    estimate_survival(BRWLaw(single_site(), 2.0), SimConfig(lam=2.0, replicas=100))
    estimate_survival(BRWLaw(single_site(), 2.0), SimConfig(lam=2.0, replicas=100,
                                                          method="continuous"))
    rows, bad = [], []
    for name, K, w in cross_kernels():
        w = w or K.window()
        from brwcrit.critical import spectral_radius
        rho = spectral_radius(K.matrix(w)).rho
        for scale in (1.5, 3.0):
            lam = scale / rho
            law = BRWLaw(K, lam, w)
            gen = estimate_survival(law, SimConfig(lam=lam, replicas=10_000, seed=SEED))
            con = estimate_survival(law, SimConfig(lam=lam, replicas=10_000, seed=SEED + 1,
                                                   method="continuous"))
            overlap = gen.ci_low <= con.ci_high and con.ci_low <= gen.ci_high
            rows.append(f"{name}@{scale}: {gen.p_hat:.3f}/{con.p_hat:.3f}")
            if not overlap:
                bad.append(name + f"@{scale}")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 300
    assert record(9, ok, "gen/cont " + ", ".join(rows) + f"; non-overlapping {bad}; "
                         f"{elapsed:.0f} s")


def test_criterion_10_identities():
    rng = np.random.default_rng(SEED + 10)
    worst_ren = worst_fp = worst_h = 0.0
    order_ok = True
    for _ in range(20):
        n = int(rng.integers(2, 7))
        a = rng.uniform(0, 2, (n, n))
        a[rng.random((n, n)) < 0.3] = 0.0
        K = WeightedKernel.from_dense(a)
        w = K.window()
        rho = max(abs(np.linalg.eigvals(a)))
        lam = 0.5 / rho if rho > 0 else 1.0
        for x in range(n):
            for y in range(n):
                g = series(K, "Gamma", x, y, lam, n_max=200).partial_sum
                gyy = series(K, "Gamma", y, y, lam, n_max=200).partial_sum
                f = series(K, "Phi", x, y, lam, n_max=200).partial_sum
                rhs = f * gyy + (x == y)
                worst_ren = max(worst_ren, abs(g - rhs) / max(abs(g), 1e-300))
                phi = np.exp(first_passage_logs(K, x, y, 12, w))
                kyy = [kernel_power_row(K, y, j, w).to_array()[y] for j in range(13)]
                for m in range(1, 13):
                    lhs = kernel_power_row(K, x, m, w).to_array()[y]
                    fp = sum(phi[j] * kyy[m - j] for j in range(1, m + 1))
                    worst_fp = max(worst_fp, abs(lhs - fp) / max(lhs, 1.0))
        for lam in (0.3, 1.0, 3.0):
            law = BRWLaw(K, lam)
            v = rng.random(n)
            worst_h = max(worst_h, float(np.max(np.abs(brw_H(law, v) - (1 - brw_G(law, 1 - v))))))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ReachabilityWarning)
            for x in range(n):
                e = parameter_estimates(K, x)
                order_ok &= e["Ms"] <= e["Mw_minus"] <= e["Mw"]
    ok = worst_ren <= 1e-8 and worst_fp <= 1e-8 and worst_h <= 1e-12 and order_ok
    assert record(10, ok, f"renewal {worst_ren:.1e}, first passage {worst_fp:.1e}, "
                          f"H vs 1-G(1-.) {worst_h:.1e}, ordering {'holds' if order_ok else 'broken'}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
