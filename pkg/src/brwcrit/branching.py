"""Offspring laws, generating functions and monotone fixed-point iteration.

Extinction probabilities ``q`` are the limit of ``q_{n+1} = G(q_n)`` from
``q_0 = 0``; survival probabilities ``v`` the limit of ``v_{n+1} = H(v_n)``
from ``v_0 = 1`` with ``H(v) = 1 - G(1 - v)``.  Everything runs on
``[0, 1]^window`` with the product order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import kernels
from .brw import BRWLaw, brw_G, brw_H

TOL = 1e-10
MAX_ITER = 10**6
AUDIT_TOL = 1e-12
DELTA_SURVIVE = 1e-6

_REASONS = {kernels.CONVERGED: "converged", kernels.FLOOR: "floor", kernels.MAX_ITER: "max_iter"}


class MonotonicityError(RuntimeError):
    """Iterates moved against the declared order by more than the audit slack."""


class LawError(ValueError):
    pass


# ---------------------------------------------------------------------------
# laws
# ---------------------------------------------------------------------------


class OffspringLaw:
    """Law given by an explicit table ``x -> [(f, prob), ...]`` on a window.

    ``f`` is a mapping ``y -> count``.  Children outside ``0..n-1`` are never
    born, which is the same as evaluating ``z = 1`` there.
    """

    def __init__(self, n, table, name=None):
        self.n = int(n)
        self.name = name
        owner, prob, t_out, t_site, t_count = [], [], [], [], []
        edges = set()
        for x in range(self.n):
            outcomes = table.get(x, [])
            mass = sum(p for _, p in outcomes)
            if abs(mass - 1.0) > 1e-9:
                raise LawError(f"law at type {x} has mass {mass!r}")
            for f, p in outcomes:
                p = p / mass  # absorb rounding so that G(1) = 1 exactly enough
                if p < 0:
                    raise LawError(f"negative probability at type {x}")
                k = len(owner)
                owner.append(x)
                prob.append(p)
                for y, c in f.items():
                    if c <= 0 or not 0 <= y < self.n:
                        continue
                    t_out.append(k)
                    t_site.append(y)
                    t_count.append(c)
                    if p > 0:
                        edges.add((x, y))
        self._owner = np.asarray(owner, dtype=np.int64)
        self._prob = np.asarray(prob, dtype=float)
        self._t_out = np.asarray(t_out, dtype=np.int64)
        self._t_site = np.asarray(t_site, dtype=np.int64)
        self._t_count = np.asarray(t_count, dtype=float)
        self._edges = sorted(edges)

    def G(self, z):
        z = np.asarray(z, dtype=float)
        prod = np.ones(self._owner.size)
        np.multiply.at(prod, self._t_out, z[self._t_site] ** self._t_count)
        return np.bincount(self._owner, weights=self._prob * prod, minlength=self.n)

    def H(self, v):
        return 1.0 - self.G(1.0 - np.asarray(v, dtype=float))

    def edges(self):
        return self._edges


class BRWOffspringLaw:
    """Adapter giving a :class:`BRWLaw` the closed-form ``G`` / ``H``."""

    def __init__(self, brw: BRWLaw):
        self.brw = brw
        self.n = brw.n

    def G(self, z):
        return brw_G(self.brw, z)

    def H(self, v):
        return brw_H(self.brw, v)

    def edges(self):
        indptr, indices, _ = self.brw.csr
        rows = np.repeat(np.arange(self.n), np.diff(indptr))
        return list(zip(rows.tolist(), indices.tolist()))


def as_law(law):
    return BRWOffspringLaw(law) if isinstance(law, BRWLaw) else law


def evaluate_G(law, z, x=None):
    """``G(z|x)``, or the whole vector ``G(z)`` when ``x`` is None."""
    z = np.asarray(z, dtype=float)
    if z.min(initial=0.0) < 0 or z.max(initial=0.0) > 1:
        raise ValueError("z must lie in [0, 1]")
    g = as_law(law).G(z)
    return g if x is None else float(g[x])


# ---------------------------------------------------------------------------
# fixed points
# ---------------------------------------------------------------------------


@dataclass
class MonotoneMap:
    fn: object
    n: int
    name: str = "W"

    def __call__(self, z):
        return self.fn(z)


@dataclass
class FixedPointReport:
    limit: np.ndarray
    iterations: int
    residual: float
    monotone_ok: bool
    direction: str  # "bottom" (from 0) or "top" (from 1)
    reason: str = "converged"
    history: np.ndarray = field(default=None, repr=False)

    @property
    def converged(self):
        return self.reason == "converged"


def monotone_iterate(W, start="bottom", tol=TOL, max_iter=MAX_ITER, floor=0.0, history=0):
    """Iterate ``W`` from the bottom (0) or top (1) of ``[0,1]^n``.

    Stops on convergence, on ``max_iter``, or (if ``floor > 0``) once the
    iterates are within ``floor`` of the opposite extreme.  Convergence needs
    the step below ``tol`` and a geometric tail estimate below ``tol`` too,
    so slow sublinear runs are not mistaken for converged ones.
    """
    if start not in ("bottom", "top"):
        raise ValueError("start must be 'bottom' or 'top'")
    up = start == "bottom"
    cur = np.zeros(W.n) if up else np.ones(W.n)
    hist = [cur.copy()] if history else None
    residual, prev = np.inf, np.inf
    reason = "max_iter"
    it = 0
    while it < max_iter:
        nxt = np.asarray(W(cur), dtype=float)
        d = nxt - cur
        if (up and d.min(initial=0.0) < -AUDIT_TOL) or (not up and d.max(initial=0.0) > AUDIT_TOL):
            raise MonotonicityError(f"{W.name}: iterate {it + 1} moved against the order")
        prev, residual = residual, float(np.abs(d).max(initial=0.0))
        cur = nxt
        it += 1
        if hist is not None and len(hist) < history:
            hist.append(cur.copy())
        if residual == 0.0:
            reason = "converged"
            break
        if residual < tol and np.isfinite(prev):
            r = residual / prev
            if r < 1 and residual * r / (1 - r) < tol:
                reason = "converged"
                break
        if floor > 0 and ((not up and cur.max(initial=0.0) <= floor)
                          or (up and cur.min(initial=1.0) >= 1 - floor)):
            reason = "floor"
            break
    return FixedPointReport(cur, it, residual, True, start, reason,
                            None if hist is None else np.array(hist))


def _brw_iterate(brw: BRWLaw, mode, tol, max_iter, floor, history):
    indptr, indices, data = brw.csr
    hist = np.zeros((history, brw.n))
    cur, it, res, ok, reason = kernels.iterate_brw(
        indptr, indices, data, brw.escape, float(brw.lam), mode, tol, int(max_iter), float(floor),
        AUDIT_TOL, hist)
    if not ok:
        raise MonotonicityError(f"BRW iterate {it} moved against the order")
    return FixedPointReport(cur, int(it), float(res), True, "bottom" if mode == 0 else "top",
                            _REASONS[int(reason)], hist[: min(history, it + 1)] if history else None)


def extinction_probs(law, tol=TOL, max_iter=MAX_ITER, floor=0.0, history=0):
    """Smallest fixed point of ``G``: the extinction probabilities ``q``."""
    if isinstance(law, BRWLaw):
        return _brw_iterate(law, 0, tol, max_iter, floor, history)
    law = as_law(law)
    return monotone_iterate(MonotoneMap(law.G, law.n, "G"), "bottom", tol, max_iter, floor, history)


def survival_probs(law, tol=TOL, max_iter=MAX_ITER, floor=0.0, history=0):
    """Largest fixed point of ``H`` from ``v_0 = 1``: the survival probabilities."""
    if isinstance(law, BRWLaw):
        return _brw_iterate(law, 1, tol, max_iter, floor, history)
    law = as_law(law)
    return monotone_iterate(MonotoneMap(law.H, law.n, "H"), "top", tol, max_iter, floor, history)


def survival_verdict(report: FixedPointReport, x, delta=DELTA_SURVIVE):
    """``extinct`` | ``survives`` | ``undecided`` for site ``x``.

    From-top iterates bound the survival probability from above, so any
    iterate with ``v(x) <= delta`` proves ``q(x) >= 1 - delta``.  Survival
    needs a converged run with ``v(x) > delta``.
    """
    if report.direction != "top":
        raise ValueError("verdicts need a survival (from-top) report")
    v = float(report.limit[x])
    if v <= delta:
        return "extinct"
    if report.converged:
        return "survives"
    return "undecided"


def ibp_irreducible(law):
    """Strong connectivity of the child graph ``E_mu`` on the window."""
    law = as_law(law)
    edges = law.edges()
    if law.n == 1:
        return any(e == (0, 0) for e in edges)
    if not edges:
        return False
    r, c = zip(*edges)
    g = csr_matrix((np.ones(len(r)), (r, c)), shape=(law.n, law.n))
    n_comp, _ = connected_components(g, directed=True, connection="strong")
    return n_comp == 1
