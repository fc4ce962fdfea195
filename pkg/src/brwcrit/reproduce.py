"""End-to-end checks for the named examples, shared by the CLI."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .branching import extinction_probs, survival_probs
from .brw import BRWLaw
from .corpus import (example1, example1_dominated_q, example2, example4,
                     example4_certificate, log_beta, oscillating_c, _Oscillating)
from .critical import Certificate, check_certificate, lambda_w_bracket


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  {self.detail}".rstrip()


def example2_closed_form(lam, beta, i, n):
    """``v_n(i)`` for the shift kernel, with ``beta`` the prefix products."""
    ratio = beta[i + n] / beta[i]
    den = 1.0 + sum(lam**r * beta[i + n] / beta[i + n - r] for r in range(1, n + 1))
    return lam**n * ratio / den


def check_example1():
    out = []
    p = [2.0 ** (-i - 2) for i in range(200)]
    rep = extinction_probs(example1(p, n=128, dominated=True), tol=0.0, max_iter=50, history=51)
    err = max(abs(rep.history[n][j] - example1_dominated_q(p, j, n))
              for n in range(1, 51) for j in range(21))
    out.append(Check("dominated iterates match 1 - prod(1 - p_i)", err <= 1e-12, f"max err {err:.2e}"))
    limit = 1.0 - math.prod(1.0 - pi for pi in p)
    q0 = rep.history[50][0]
    out.append(Check("summable p: q(0) < 1", q0 < 1 and limit < 1,
                     f"dominated q_50(0) = {q0:.6f}, limit {limit:.6f}"))
    full = extinction_probs(example1(p, n=128), tol=0.0, max_iter=50, history=51)
    dom = bool(np.all(full.history[50] <= rep.history[50] + 1e-15))
    out.append(Check("full law is dominated: q_n <= q_n(dominated)", dom))
    harm = [1.0 / (i + 2) for i in range(1200)]
    rep_h = extinction_probs(example1(harm, n=1100, dominated=True), tol=0.0, max_iter=1000,
                             history=1001)
    seq = [rep_h.history[n][0] for n in (10, 100, 1000)]
    trend = seq[0] < seq[1] < seq[2] and seq[2] > 0.99
    out.append(Check("non-summable p: q_n(0) -> 1", trend,
                     "q_n(0) at n=10,100,1000: " + ", ".join(f"{s:.4f}" for s in seq)))
    return out


def check_example2():
    out = []
    worst = 0.0
    for c in (0.5, 1.0, 2.0):
        for lam in (0.7, 1.3):
            K = example2(c)
            w = K.window(100)
            rep = survival_probs(BRWLaw(K, lam, w), tol=0.0, max_iter=40, history=41)
            beta = np.exp(log_beta(c, 100))
            for n in range(1, 41):
                for i in range(0, 50, 7):
                    worst = max(worst, abs(rep.history[n][i] - example2_closed_form(lam, beta, i, n)))
    out.append(Check("constant rates: v_n(i) matches the closed form", worst <= 1e-10,
                     f"max err {worst:.2e}"))
    c = oscillating_c(2)
    lb = log_beta(_Oscillating(), c[5])
    ok = True
    parts = []
    for r in (1, 2):
        lo = math.exp(lb[c[2 * r]] / c[2 * r])
        hi = math.exp(lb[c[2 * r + 1]] / c[2 * r + 1])
        ok &= lo <= 1 + 1 / (2 * r) and hi > 2 - 1 / (2 * r + 1)
        parts.append(f"r={r}: {lo:.4f} at n={c[2 * r]}, {hi:.4f} at n={c[2 * r + 1]}")
    out.append(Check("oscillating construction root bounds", ok, "; ".join(parts)))
    lam = 1.1
    K = example2(2.0)
    cert = Certificate(lambda n: 1.0 / (lam**n * 2.0**n), lam, "linear", 1, sites=200)
    res = check_certificate(cert, K)
    out.append(Check("linear certificate 1/(lam^n beta_n) above 1/liminf root", res.holds,
                     f"slack {res.slack:.2e}"))
    return out


def check_example4(windows=(128, 256, 512)):
    out = []
    K = example4()
    cert = Certificate(example4_certificate, 1.0, "nonlinear", sites=max(windows))
    res = check_certificate(cert, K, tol_cert=0.0)
    out.append(Check("certificate at rate 1 holds with slack >= 0", res.holds,
                     f"min slack {res.slack:.3e}"))
    br = lambda_w_bracket(K, 0, K.window(max(windows)))
    out.append(Check("weak critical bracket contains 1 (width <= 0.05)",
                     br.contains(1.0) and br.width <= 0.05,
                     f"[{br.lower:.6f}, {br.upper:.6f}] at window {br.window}"))
    vals = [survival_probs(BRWLaw(K, 1.0, K.window(N))).limit[0] for N in windows]
    ups = [survival_probs(BRWLaw(K, 1.0, K.window(N), "escape")).limit[0] for N in windows]
    mono = all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
    out.append(Check("windowed v(0) at rate 1 nondecreasing and >= 0.4",
                     mono and vals[-1] >= 0.4,
                     "lower " + ", ".join(f"{v:.6f}" for v in vals)
                     + "; escape upper " + ", ".join(f"{v:.6f}" for v in ups)))
    return out


CHECKS = {1: check_example1, 2: check_example2, 4: check_example4}
