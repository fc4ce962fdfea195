"""Root-sequence estimates of M_s, M_w, M_w^- and truncated generating functions."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .graph import Window, WeightedKernel, first_passage_logs, power_rows

N_MAX_FINITE = 64
N_MAX_GENERATED = 128
BISECT_TOL = 1e-6


class ReachabilityWarning(UserWarning):
    pass


def default_n_max(K):
    return N_MAX_FINITE if K.is_finite else N_MAX_GENERATED


def default_window(K, x, n_max):
    # nearest-neighbour generated kernels keep every path of length n_max
    return K.window(None if K.is_finite else x + n_max + 1)


@dataclass
class RootSequenceEstimate:
    """n-th roots of a path-weight sequence and the estimates read off them.

    ``limsup_est`` / ``liminf_est`` are the max / min root over
    ``n in [n_max/2, n_max]``; ``sup_est`` is the max over every n;
    ``growth`` is the slope ``exp((log a_n - log a_m)/(n - m))`` across the
    upper half, which cancels a constant prefactor ``C`` in ``a_n ~ C M^n``.
    ``floor`` is a proven lower bound (the ``M_s`` estimate, since
    ``T^n_x >= k^n_xx``) below which the total-weight estimates are not allowed
    to fall; periodic classes make the slope unreliable.
    """

    which: str
    n_max: int
    ns: np.ndarray
    roots: np.ndarray
    limsup_est: float
    liminf_est: float
    sup_est: float = 0.0
    growth: float = 0.0
    floor: float = 0.0

    @property
    def estimate(self):
        if self.which == "Ms":
            # k^n_xx is supermultiplicative, so its roots rise to their limit
            return self.sup_est
        if self.which == "Ms_xy":
            return self.limsup_est
        if self.which == "Mw_minus":
            return max(self.liminf_est, self.growth, self.floor)
        return max(self.limsup_est, self.growth, self.floor)


def log_sequences(K: WeightedKernel, x, y, n_max, w: Window):
    """``log k^n_xy`` and ``log T^n_x`` for n = 0..n_max."""
    log_k = np.full(n_max + 1, -math.inf)
    log_t = np.full(n_max + 1, -math.inf)
    for n, row in power_rows(K, x, n_max, w):
        if row.mantissa[y] > 0:
            log_k[n] = math.log(row.mantissa[y]) + row.log_scale
        log_t[n] = row.total_log()
    return log_k, log_t


def _roots(which, log_vals, n_max):
    ns = np.arange(1, n_max + 1)
    lv = log_vals[1:]
    pos = np.isfinite(lv)
    ns, lv = ns[pos], lv[pos]
    roots = np.exp(lv / ns)
    if roots.size == 0:
        warnings.warn(f"{which}: all path weights vanish (target unreachable)",
                      ReachabilityWarning, stacklevel=3)
        return RootSequenceEstimate(which, n_max, ns, roots, 0.0, 0.0)
    upper = ns >= n_max / 2
    if not upper.any():
        upper = np.ones_like(ns, dtype=bool)
    tail = roots[upper]
    growth = 0.0
    if upper.sum() >= 2:
        nu, lu = ns[upper], lv[upper]
        growth = float(np.exp((lu[-1] - lu[0]) / (nu[-1] - nu[0])))
    return RootSequenceEstimate(which, n_max, ns, roots, float(tail.max()), float(tail.min()),
                                float(roots.max()), growth)


def estimate_parameters(K: WeightedKernel, x, y=None, n_max=None, w=None, which="Ms"):
    """Root-sequence estimate of ``M_s(x, y)``, ``M_w(x)`` or ``M_w^-(x)``.

    See :class:`RootSequenceEstimate` for how ``.estimate`` is formed.  Only
    lengths with a positive weight enter, which side-steps periodicity.  The
    raw sequence is kept on the result.
    """
    n_max = n_max or default_n_max(K)
    if n_max < 8:
        raise ValueError("n_max must be >= 8")
    w = w or default_window(K, x, n_max)
    y = x if y is None else y
    if which == "Ms":
        log_k, _ = log_sequences(K, x, y, n_max, w)
        return _roots("Ms" if y == x else "Ms_xy", log_k, n_max)
    if which in ("Mw", "Mw_minus"):
        log_k, log_t = log_sequences(K, x, x, n_max, w)
        est = _roots(which, log_t, n_max)
        est.floor = _return_floor(log_k, n_max)
        return est
    raise ValueError(f"unknown parameter {which!r}")


def _return_floor(log_k, n_max):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ReachabilityWarning)
        return _roots("Ms", log_k, n_max).estimate


def parameter_estimates(K, x, n_max=None, w=None):
    """All three estimates at ``x`` from one pass over the same root range."""
    n_max = n_max or default_n_max(K)
    if n_max < 8:
        raise ValueError("n_max must be >= 8")
    w = w or default_window(K, x, n_max)
    log_k, log_t = log_sequences(K, x, x, n_max, w)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ReachabilityWarning)
        ms = _roots("Ms", log_k, n_max)
    t = _roots("Mw", log_t, n_max)
    t.floor = ms.estimate
    t_minus = RootSequenceEstimate(**{**t.__dict__, "which": "Mw_minus"})
    return {
        "Ms": ms.estimate,
        "Mw": t.estimate,
        "Mw_minus": t_minus.estimate,
        "ms_sequence": ms,
        "t_sequence": t,
    }


# ---------------------------------------------------------------------------
# generating functions
# ---------------------------------------------------------------------------


@dataclass
class SeriesValue:
    lam: float
    partial_sum: float
    terms_used: int
    tail_flag: str  # converged | truncated | diverging
    log_terms: np.ndarray = field(repr=False, default=None)


def series_coefficients(K, which, x, y, n_max, w):
    """Log coefficients of Gamma (k^n_xy), Theta (T^n_x) or Phi (phi^n_xy)."""
    if which in ("Gamma", "Theta"):
        log_k, log_t = log_sequences(K, x, y, n_max, w)
        return log_k if which == "Gamma" else log_t
    if which == "Phi":
        return first_passage_logs(K, x, y, n_max, w)
    raise ValueError(f"unknown series {which!r}")


def _tail_flag(log_terms, partial_log):
    n = len(log_terms)
    q = log_terms[3 * n // 4:]
    idx = np.arange(3 * n // 4, n)
    pos = np.isfinite(q)
    if not pos.any():
        return "converged"
    q, idx = q[pos], idx[pos]
    if q.size < 2:
        return "converged" if q[-1] < partial_log + math.log(1e-12) else "truncated"
    slope = np.polyfit(idx, q, 1)[0]
    if slope > 0 and q[-1] > q[0]:
        return "diverging"
    if slope < 0:
        r = math.exp(slope)
        tail_log = q[-1] + math.log(r / (1 - r)) if r < 1 else math.inf
        if tail_log < partial_log + math.log(1e-12):
            return "converged"
    return "truncated"


def evaluate_series(log_coef, lam, start):
    """Partial sum of sum_{n >= start} exp(log_coef[n]) lam^n."""
    n = np.arange(len(log_coef))
    with np.errstate(divide="ignore"):
        log_terms = log_coef + n * math.log(lam) if lam > 0 else np.where(n == 0, log_coef, -np.inf)
    log_terms = np.where(n >= start, log_terms, -np.inf)
    finite = np.isfinite(log_terms)
    if not finite.any():
        return -math.inf, log_terms
    return float(logsumexp(log_terms[finite])), log_terms


def series(K: WeightedKernel, which, x, y, lam, n_max=None, w=None) -> SeriesValue:
    """Truncated Gamma(x,y|lam), Theta(x|lam) or Phi(x,y|lam)."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    n_max = n_max or default_n_max(K)
    w = w or default_window(K, x, n_max)
    y = x if y is None else y
    coef = series_coefficients(K, which, x, y, n_max, w)
    start = 1 if which == "Phi" else 0
    log_sum, log_terms = evaluate_series(coef, lam, start)
    value = math.exp(log_sum) if log_sum < 709 else math.inf
    flag = _tail_flag(log_terms[start:], log_sum)
    return SeriesValue(lam, value, n_max - start + 1, flag, log_terms)


def lambda_s_via_phi(K: WeightedKernel, x, n_max=None, w=None, tol=BISECT_TOL):
    """``1 / M_s(x)`` as the largest lam with Phi(x,x|lam) <= 1, by bisection.

    Returns ``math.inf`` when no cycle passes through ``x``.
    """
    n_max = n_max or default_n_max(K)
    w = w or default_window(K, x, n_max)
    coef = first_passage_logs(K, x, x, n_max, w)
    if not np.isfinite(coef[1:]).any():
        return math.inf

    def phi(lam):
        return evaluate_series(coef, lam, 1)[0]  # log Phi

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ReachabilityWarning)
        est = estimate_parameters(K, x, x, n_max=max(n_max, 8), w=w, which="Ms")
    hi = 1.0 / est.liminf_est if est.liminf_est > 0 else 1.0
    lo = 0.0
    for _ in range(200):
        if phi(hi) > 0.0:
            break
        lo, hi = hi, 2 * hi
    else:
        return math.inf
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if phi(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
