"""The discrete-generation process behind a BRW: offspring law, G, H and K."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import kernels
from .graph import Window, WeightedKernel


@dataclass
class BRWLaw:
    """Offspring law of the BRW with kernel ``kernel`` and rate ``lam``.

    Numerics run on ``window``.  With ``boundary="absorb"`` children outside
    it are never born, so survival is bounded from below; ``"escape"``
    counts them as surviving for sure, which bounds survival from above.
    """

    kernel: WeightedKernel
    lam: float
    window: Window = None
    boundary: str = "absorb"
    _csr: tuple = field(default=None, init=False, repr=False)
    _escape: np.ndarray = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be > 0")
        if self.boundary not in ("absorb", "escape"):
            raise ValueError("boundary must be 'absorb' or 'escape'")
        if self.window is None:
            self.window = self.kernel.window()
        self._csr = self.kernel.csr(self.window)
        if self.boundary == "escape":
            self._escape = np.maximum(self.kernel.row_sums(self.window) - self.rates(), 0.0)
        else:
            self._escape = np.zeros(self.window.size)

    @property
    def escape(self):
        """Weight of edges leaving the window that enters G and H."""
        return self._escape

    @property
    def csr(self):
        return self._csr

    @property
    def n(self):
        return self.window.size

    def rate(self, x):
        """Total birth rate ``S_x`` of the sub-kernel at ``x``."""
        indptr, _, data = self._csr
        return float(data[indptr[x]:indptr[x + 1]].sum())

    def rates(self):
        indptr, _, data = self._csr
        rows = np.repeat(np.arange(self.n), np.diff(indptr))
        return np.bincount(rows, weights=data, minlength=self.n)

    def neighbors(self, x):
        indptr, indices, data = self._csr
        return indices[indptr[x]:indptr[x + 1]], data[indptr[x]:indptr[x + 1]]


def offspring_prob(law: BRWLaw, x, f):
    """Probability ``mu_x(f)`` of the child-count vector ``f`` (a mapping y -> count)."""
    ys, ks = law.neighbors(x)
    weight = dict(zip(ys.tolist(), ks.tolist()))
    log_p = 0.0
    total = 0
    for y, c in f.items():
        c = int(c)
        if c < 0:
            raise ValueError("counts must be nonnegative")
        if c == 0:
            continue
        if y not in weight:
            return 0.0
        log_p += c * math.log(law.lam * weight[y]) - gammaln(c + 1)
        total += c
    log_p += gammaln(total + 1) - (total + 1) * math.log1p(law.lam * law.rate(x))
    return math.exp(log_p)


def apply_K(K, v, w: Window | None = None):
    """``(Kv)(x) = sum_y k_xy v(y)`` on the window; mass leaving it is lost."""
    w = w or K.window()
    indptr, indices, data = K.csr(w)
    return kernels.matvec(indptr, indices, data, np.asarray(v, dtype=float))


def brw_G(law: BRWLaw, z, x=None):
    """``G(z|x) = 1 / (1 + lam sum_y k_xy (1 - z(y)))``; all sites when ``x`` is None."""
    indptr, indices, data = law.csr
    s = kernels.matvec(indptr, indices, data, 1.0 - np.asarray(z, dtype=float)) + law.escape
    g = 1.0 / (1.0 + law.lam * s)
    return g if x is None else float(g[x])


def brw_H(law: BRWLaw, v):
    """``H(v) = lam Kv / (1 + lam Kv)``, component-wise."""
    indptr, indices, data = law.csr
    kv = law.lam * (kernels.matvec(indptr, indices, data, np.asarray(v, dtype=float)) + law.escape)
    return kv / (1.0 + kv)


def enumerate_offspring(law: BRWLaw, x, s_max):
    """Every ``f`` with ``S(f) <= s_max`` at ``x`` with its probability.

    Yields ``(counts, prob)`` where ``counts`` is aligned with the neighbours
    of ``x``.  Only sensible for small degree.
    """
    ys, ks = law.neighbors(x)
    d = len(ys)
    lk = np.log(law.lam * ks) if d else np.zeros(0)
    l0 = math.log1p(law.lam * law.rate(x))

    def compositions(total, parts):
        if parts == 0:
            if total == 0:
                yield ()
            return
        if parts == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    for s in range(s_max + 1):
        for c in compositions(s, d):
            c = np.asarray(c, dtype=np.int64)
            lp = gammaln(s + 1) - (s + 1) * l0 + float(np.dot(c, lk) - gammaln(c + 1).sum())
            yield c, math.exp(lp)
