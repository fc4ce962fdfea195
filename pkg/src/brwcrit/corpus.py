"""Named example kernels and offspring laws, registered for the CLI."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .branching import OffspringLaw
from .graph import KernelError, WeightedKernel

DEFAULT_LAW_WINDOW = 128


def _sequence(value, name):
    """Turn a constant, list (last value repeats) or callable into ``n -> value``."""
    if callable(value):
        return value
    if isinstance(value, (list, tuple)):
        if not value:
            raise ValueError(f"{name} must not be empty")
        vals = [float(v) for v in value]
        return lambda n: vals[n] if n < len(vals) else vals[-1]
    c = float(value)
    return lambda n: c


# ---------------------------------------------------------------------------
# offspring laws on the naturals
# ---------------------------------------------------------------------------


def example1(p=None, n=DEFAULT_LAW_WINDOW, dominated=False):
    """Nearest-neighbour law with one child up, one child down or none.

    A type ``j`` has one child of type ``j+1`` w.p. ``1-p_j``, one child of
    type ``j-1`` (type 0 at ``j = 0``) w.p. ``p_j/2`` and none w.p.
    ``p_j/2``.  The dominated variant drops the downward child, so it dies
    w.p. ``p_j``.  Default ``p_j = 2^(-j-2)``.
    """
    p = _sequence(p, "p") if p is not None else (lambda j: 2.0 ** (-j - 2))
    table = {}
    for j in range(n):
        pj = float(p(j))
        if not 0 <= pj < 1:
            raise ValueError(f"p_{j} = {pj} must lie in [0, 1)")
        if dominated:
            table[j] = [({}, pj), ({j + 1: 1}, 1 - pj)]
        else:
            table[j] = [({}, pj / 2), ({max(j - 1, 0): 1}, pj / 2), ({j + 1: 1}, 1 - pj)]
    return OffspringLaw(n, table, name="example1_dominated" if dominated else "example1")


def example1_dominated_q(p, j, n):
    """Extinction by generation ``n`` from type ``j`` for the dominated law."""
    p = _sequence(p, "p")
    return 1.0 - math.prod(1.0 - p(i) for i in range(j, j + n))


# ---------------------------------------------------------------------------
# kernels on the naturals
# ---------------------------------------------------------------------------


def oscillating_c(r_max):
    """``c_1 .. c_{2 r_max + 1}`` of the 1/2 interval construction, with ``c_0 = 0``."""
    c = [0, 1]
    for n in range(2, 2 * r_max + 2):
        if n % 2 == 0:
            a = math.ceil(math.log(2) / math.log1p(1 / n))
            c.append(a * c[-1])
        else:
            b = math.ceil(math.log(2) / (math.log(2) - math.log(2 - 1 / n)))
            c.append(b * c[-1])
    return c


class _Oscillating:
    """``k_i = 1`` on ``(c_{2r-1}, c_{2r}]``, ``2`` on ``(c_{2r}, c_{2r+1}]``; ``k_0 = 1``."""

    def __init__(self):
        self.c = oscillating_c(3)

    def __call__(self, i):
        if i == 0:
            return 1.0
        while self.c[-1] < i:
            self.c = oscillating_c((len(self.c) - 1) // 2 + 1)
        n = next(n for n in range(1, len(self.c)) if i <= self.c[n])
        return 2.0 if n % 2 == 1 else 1.0


def example2(k=2.0, oscillating=False):
    """Pure shift kernel ``k_{i,i+1} = k_i``."""
    if oscillating:
        seq, bound, params = _Oscillating(), 2.0, {"oscillating": True}
    else:
        seq = _sequence(k, "k")
        if isinstance(k, (list, tuple)):
            bound = max(float(v) for v in k)
        elif callable(k):
            raise ValueError("callable rates cannot be registered; pass a list")
        else:
            bound = float(k)
        params = {"k": k}
    return WeightedKernel.generated(lambda i: [(i + 1, seq(i))], bound, "example2", params)


def log_beta(k, n):
    """``log beta_0 .. log beta_n`` with ``beta_n = prod_{i<n} k_i``."""
    seq = _sequence(k, "k")
    out = np.zeros(n + 1)
    for i in range(n):
        out[i + 1] = out[i] + math.log(seq(i))
    return out


def example4():
    """``k_01 = 2``, ``k_{n,n+1} = (1+1/n)^2``, ``k_{n+1,n} = 3^-(n+1)``."""

    def row(n):
        if n == 0:
            return [(1, 2.0)]
        return [(n - 1, 3.0 ** -n), (n + 1, (1 + 1 / n) ** 2)]

    # the largest row sum is S_1 = 4 + 1/3
    return WeightedKernel.generated(row, 13 / 3, "example4", {})


def example4_certificate(n):
    if n == 0:
        return 0.5
    return 1.0 / (n + 1)


def tree_line(m=3):
    """Radial quotient of the degree-``m`` tree with unit edge weights."""
    if m < 2:
        raise ValueError("m must be >= 2")

    def row(n):
        if n == 0:
            return [(1, float(m))]
        return [(n - 1, 1.0), (n + 1, float(m - 1))]

    return WeightedKernel.generated(row, float(m), "tree_line", {"m": m})


def radial_tree_line(k_plus=1.0, k_minus=1.0, a=2):
    """``k_{n,n+1} = a_n k+_n`` and ``k_{n+1,n} = k-_n``."""
    kp, km, aa = (_sequence(k_plus, "k_plus"), _sequence(k_minus, "k_minus"),
                  _sequence(a, "a"))

    def bound(v):
        return max(float(u) for u in v) if isinstance(v, (list, tuple)) else float(v)

    if any(callable(v) for v in (k_plus, k_minus, a)):
        raise ValueError("callable sequences cannot be registered; pass lists")
    if any(float(u) < 1 for u in (a if isinstance(a, (list, tuple)) else [a])):
        raise ValueError("a_n must be >= 1")

    def row(n):
        out = [(n + 1, aa(n) * kp(n))]
        if n > 0:
            out.insert(0, (n - 1, km(n - 1)))
        return out

    row_bound = bound(a) * bound(k_plus) + bound(k_minus)
    return WeightedKernel.generated(row, row_bound, "radial_tree_line",
                                    {"k_plus": k_plus, "k_minus": k_minus, "a": a})


def two_site(weight=2.0):
    return WeightedKernel.from_dense([[0.0, weight], [weight, 0.0]])


def single_site(c=1.0):
    return WeightedKernel.from_dense([[c]])


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExampleSpec:
    name: str
    build: Callable
    defaults: dict
    note: str
    produces: str = "kernel"


REGISTRY = {
    s.name: s
    for s in [
        ExampleSpec("example1", example1, {"n": DEFAULT_LAW_WINDOW},
                    "irreducible law on N with mean offspring < 1 that can survive; "
                    "p_n = 2^(-n-2)", "law"),
        ExampleSpec("example1_dominated", lambda **kw: example1(dominated=True, **kw),
                    {"n": DEFAULT_LAW_WINDOW},
                    "reducible law dominated by example1; q_n(j) = 1 - prod (1 - p_i)",
                    "law"),
        ExampleSpec("example2", example2, {"k": 2.0},
                    "shift kernel k_{i,i+1} = k_i; weak critical value 1/liminf beta_n^(1/n)"),
        ExampleSpec("example2_oscillating", lambda **kw: example2(oscillating=True),
                    {}, "shift kernel alternating long runs of 1 and 2; M_w = 2, M_w^- = 1"),
        ExampleSpec("example4", example4, {},
                    "nearest-neighbour kernel on N with a survival certificate at rate 1"),
        ExampleSpec("tree_line", tree_line, {"m": 3},
                    "radial quotient of the homogeneous tree of degree m"),
        ExampleSpec("radial_tree_line", radial_tree_line,
                    {"k_plus": 1.0, "k_minus": 1.0, "a": 2},
                    "radial quotient of a radial tree: k_{n,n+1} = a_n k+_n, k_{n+1,n} = k-_n"),
        ExampleSpec("two_site", two_site, {"weight": 2.0}, "two sites joined both ways"),
        ExampleSpec("single_site", single_site, {"c": 1.0}, "one site with a self-loop"),
    ]
}


def build_example(name, params=None):
    if name not in REGISTRY:
        raise KeyError(f"unknown example {name!r}")
    spec = REGISTRY[name]
    kw = dict(spec.defaults)
    kw.update(params or {})
    return spec.build(**kw)


def build_kernel(name, params=None):
    """Rebuild a generated kernel from its file-format ``name`` / ``params``."""
    params = dict(params or {})
    if name == "example2" and params.pop("oscillating", False):
        name = "example2_oscillating"
    spec = REGISTRY.get(name)
    if spec is None or spec.produces != "kernel":
        raise KernelError(f"no kernel named {name!r}")
    return build_example(name, params)
