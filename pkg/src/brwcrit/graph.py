"""Weighted graphs: kernels, windows, path weights and class structure."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from . import kernels

OVERFLOW_LIMIT = 1e300
TOL_ISO = 1e-9


class KernelError(ValueError):
    """Invalid kernel data or a row violating the declared row bound."""


@dataclass(frozen=True)
class Window:
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise KernelError("window size must be >= 1")

    def __contains__(self, x):
        return 0 <= x < self.size

    def sites(self):
        return range(self.size)


class WeightedKernel:
    """Nonnegative weights ``k_xy`` with a declared bound on row sums.

    A *finite* kernel holds explicit rows for sites ``0..n-1``.  A *generated*
    kernel lives on the naturals and produces row ``x`` on demand from
    ``row_fn(x) -> iterable of (y, k_xy)``.  Rows are audited against
    ``row_bound`` the first time they are enumerated; zero weights are dropped.
    """

    def __init__(self, kind, row_bound, *, rows=None, row_fn=None, n_sites=None,
                 name=None, params=None):
        if kind not in ("finite", "generated"):
            raise KernelError(f"unknown kernel kind {kind!r}")
        if not (math.isfinite(row_bound) and row_bound >= 0):
            raise KernelError("row_bound must be a finite nonnegative number")
        self.kind = kind
        self.row_bound = float(row_bound)
        self.name = name
        self.params = dict(params or {})
        if kind == "finite":
            if rows is None or n_sites is None:
                raise KernelError("finite kernel needs rows and n_sites")
            self.n_sites = int(n_sites)
            self._rows = {}
            for x in range(self.n_sites):
                self._rows[x] = self._clean(x, rows.get(x, ()))
            self._row_fn = None
        else:
            if row_fn is None:
                raise KernelError("generated kernel needs row_fn")
            self.n_sites = None
            self._rows = None
            self._row_fn = row_fn
        self._csr_cache = {}

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_dense(cls, matrix, row_bound=None):
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise KernelError("dense kernel must be a square matrix")
        rows = {x: [(y, a[x, y]) for y in range(a.shape[1]) if a[x, y] != 0]
                for x in range(a.shape[0])}
        if row_bound is None:
            row_bound = float(a.sum(axis=1).max()) if a.size else 0.0
        return cls("finite", row_bound, rows=rows, n_sites=a.shape[0])

    @classmethod
    def generated(cls, row_fn: Callable, row_bound, name=None, params=None):
        return cls("generated", row_bound, row_fn=row_fn, name=name, params=params)

    def _clean(self, x, entries):
        ys, ws = [], []
        for y, k in entries:
            k = float(k)
            y = int(y)
            if not math.isfinite(k) or k < 0:
                raise KernelError(f"weight k[{x},{y}] = {k} is not a finite nonnegative real")
            if y < 0 or (self.n_sites is not None and y >= self.n_sites):
                raise KernelError(f"row {x} points to unknown site {y}")
            if k > 0:
                ys.append(y)
                ws.append(k)
        order = np.argsort(ys, kind="stable")
        ys = np.asarray(ys, dtype=np.int64)[order]
        ws = np.asarray(ws, dtype=float)[order]
        if len(np.unique(ys)) != len(ys):
            raise KernelError(f"row {x} lists a target twice")
        total = float(ws.sum())
        if total > self.row_bound * (1 + 1e-12) + 1e-300:
            raise KernelError(f"row {x} sums to {total} > row_bound {self.row_bound}")
        return ys, ws

    # -- access -----------------------------------------------------------------

    @property
    def is_finite(self):
        return self.kind == "finite"

    def row(self, x):
        """Out-neighbours and weights of site ``x`` as two arrays."""
        if self.is_finite:
            return self._rows[x]
        return self._generated_row(x)

    @lru_cache(maxsize=None)
    def _generated_row(self, x):
        return self._clean(x, self._row_fn(x))

    def window(self, size=None):
        if self.is_finite:
            return Window(self.n_sites)
        if size is None:
            raise KernelError("generated kernels need an explicit window size")
        return Window(int(size))

    def csr(self, w: Window):
        """Sub-kernel on ``w`` as CSR arrays; edges leaving the window are dropped."""
        key = w.size
        if key not in self._csr_cache:
            indptr = [0]
            indices, data = [], []
            for x in range(w.size):
                ys, ws = self.row(x)
                keep = ys < w.size
                indices.append(ys[keep])
                data.append(ws[keep])
                indptr.append(indptr[-1] + int(keep.sum()))
            indptr = np.asarray(indptr, dtype=np.int64)
            indices = np.concatenate(indices) if indices else np.zeros(0, np.int64)
            data = np.concatenate(data) if data else np.zeros(0)
            self._csr_cache[key] = (indptr, indices.astype(np.int64), data.astype(float))
        return self._csr_cache[key]

    def matrix(self, w: Window):
        """Sub-kernel on ``w`` as a scipy CSR matrix."""
        indptr, indices, data = self.csr(w)
        return csr_matrix((data, indices, indptr), shape=(w.size, w.size))

    def dense(self, w: Window | None = None):
        w = w or self.window()
        return self.matrix(w).toarray()

    def row_sums(self, w: Window):
        """Full row sums ``S_x`` (including edges leaving the window)."""
        return np.array([self.row(x)[1].sum() for x in range(w.size)])

    def scaled(self, c):
        """The kernel ``c K``."""
        if c <= 0:
            raise KernelError("scale factor must be positive")
        if self.is_finite:
            rows = {x: list(zip(*self.row(x))) for x in range(self.n_sites)}
            rows = {x: [(y, c * k) for y, k in r] for x, r in rows.items()}
            return WeightedKernel("finite", c * self.row_bound, rows=rows,
                                  n_sites=self.n_sites)
        fn = self._row_fn
        return WeightedKernel.generated(
            lambda x: [(y, c * k) for y, k in fn(x)], c * self.row_bound,
            name=self.name, params={**self.params, "scale": c},
        )

    def restrict(self, sites):
        """Finite kernel on ``sites`` (relabelled 0..m-1 in the given order)."""
        sites = [int(s) for s in sites]
        pos = {s: i for i, s in enumerate(sites)}
        rows = {}
        for s in sites:
            ys, ws = self.row(s)
            rows[pos[s]] = [(pos[y], k) for y, k in zip(ys, ws) if y in pos]
        return WeightedKernel("finite", self.row_bound, rows=rows, n_sites=len(sites))

    def __repr__(self):
        if self.is_finite:
            return f"WeightedKernel(finite, n_sites={self.n_sites}, row_bound={self.row_bound})"
        return f"WeightedKernel(generated, name={self.name!r}, row_bound={self.row_bound})"

    # -- serialisation ------------------------------------------------------------

    def to_json(self, window_size=None):
        """Kernel file document.  Generated kernels keep their registry name
        unless ``window_size`` asks for a materialised finite sub-kernel."""
        if self.is_finite or window_size is not None:
            w = self.window(window_size)
            mat = self.matrix(w)
            rows = []
            for x in range(w.size):
                lo, hi = mat.indptr[x], mat.indptr[x + 1]
                rows.append([x, [[int(y), float(k)] for y, k in
                                 zip(mat.indices[lo:hi], mat.data[lo:hi])]])
            return {"kind": "finite", "row_bound": self.row_bound, "rows": rows}
        if self.name is None:
            raise KernelError("anonymous generated kernel cannot be serialised")
        return {"kind": "generated", "row_bound": self.row_bound,
                "name": self.name, "params": self.params}


def kernel_from_json(doc, registry=None):
    kind = doc.get("kind")
    if kind == "finite":
        rows = {}
        n = 0
        for x, entries in doc["rows"]:
            x = int(x)
            rows[x] = [(int(y), float(k)) for y, k in entries]
            n = max(n, x + 1, *(int(y) + 1 for y, _ in entries)) if entries else max(n, x + 1)
        if "n_sites" in doc:
            n = int(doc["n_sites"])
        return WeightedKernel("finite", float(doc["row_bound"]), rows=rows, n_sites=n)
    if kind == "generated":
        if registry is None:
            from .corpus import build_kernel as registry
        return registry(doc["name"], doc.get("params", {}))
    raise KernelError(f"unknown kernel kind {kind!r}")


def load_kernel(path):
    with open(path, encoding="utf-8") as fh:
        return kernel_from_json(json.load(fh))


def save_kernel(kernel, path, window_size=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(kernel.to_json(window_size), fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# path weights
# ---------------------------------------------------------------------------


@dataclass
class ScaledRow:
    """Nonnegative vector stored as ``mantissa * exp(log_scale)``."""

    mantissa: np.ndarray
    log_scale: float = 0.0

    def log_values(self):
        with np.errstate(divide="ignore"):
            return np.log(self.mantissa) + self.log_scale

    def to_array(self):
        if self.log_scale == 0.0:
            return self.mantissa.copy()
        peak = self.mantissa.max(initial=0.0)
        if peak > 0 and math.log(peak) + self.log_scale > math.log(np.finfo(float).max):
            raise OverflowError("path weights exceed float range; use log_values()")
        return self.mantissa * math.exp(self.log_scale)

    def total_log(self):
        s = self.mantissa.sum()
        return math.log(s) + self.log_scale if s > 0 else -math.inf


def _rescale(row: ScaledRow):
    peak = row.mantissa.max(initial=0.0)
    if peak > OVERFLOW_LIMIT or 0.0 < peak < 1.0 / OVERFLOW_LIMIT:
        row.mantissa = row.mantissa / peak
        row.log_scale += math.log(peak)
    return row


def _check_site(x, w):
    if x not in w:
        raise KernelError(f"site {x} outside window of size {w.size}")


def power_rows(K: WeightedKernel, x, n_max, w: Window):
    """Yield ``(n, ScaledRow of k^n_x.)`` for n = 0..n_max on the sub-kernel."""
    _check_site(x, w)
    indptr, indices, data = K.csr(w)
    r = np.zeros(w.size)
    r[x] = 1.0
    row = ScaledRow(r)
    yield 0, ScaledRow(r.copy())
    for n in range(1, n_max + 1):
        row = _rescale(ScaledRow(kernels.vecmat(indptr, indices, data, row.mantissa),
                                 row.log_scale))
        yield n, ScaledRow(row.mantissa.copy(), row.log_scale)


def kernel_power_row(K: WeightedKernel, x, n, w: Window) -> ScaledRow:
    """Row ``(k^n_xy)_y`` restricted to paths inside ``w``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    for m, row in power_rows(K, x, n, w):
        if m == n:
            return row


def advance_row(K: WeightedKernel, row: ScaledRow, m, w: Window) -> ScaledRow:
    """Multiply a row vector by ``K`` ``m`` more times."""
    indptr, indices, data = K.csr(w)
    out = ScaledRow(row.mantissa.copy(), row.log_scale)
    for _ in range(m):
        out = _rescale(ScaledRow(kernels.vecmat(indptr, indices, data, out.mantissa),
                                 out.log_scale))
    return out


def total_weight(K: WeightedKernel, x, n, w: Window) -> float:
    """``T^n_x`` over paths inside ``w``; raises OverflowError past float range."""
    log_t = total_weight_log(K, x, n, w)
    if log_t > math.log(np.finfo(float).max):
        raise OverflowError("T^n_x exceeds float range; use total_weight_log")
    return math.exp(log_t) if log_t > -math.inf else 0.0


def total_weight_log(K, x, n, w):
    return kernel_power_row(K, x, n, w).total_log()


def first_passage_logs(K: WeightedKernel, x, y, n_max, w: Window):
    """``log phi^n_xy`` for n = 0..n_max (paths in ``w`` avoiding y before the end)."""
    _check_site(x, w)
    _check_site(y, w)
    indptr, indices, data = K.csr(w)
    out = np.full(n_max + 1, -math.inf)
    r = np.zeros(w.size)
    r[x] = 1.0
    log_scale = 0.0
    for n in range(1, n_max + 1):
        r = kernels.vecmat(indptr, indices, data, r)
        if r[y] > 0:
            out[n] = math.log(r[y]) + log_scale
        r[y] = 0.0
        peak = r.max(initial=0.0)
        if peak == 0.0:
            break
        if peak > OVERFLOW_LIMIT or peak < 1.0 / OVERFLOW_LIMIT:
            r = r / peak
            log_scale += math.log(peak)
    return out


def first_passage_row(K, x, y, n, w) -> float:
    """``phi^n_xy``; ``phi^0_xy = 0``."""
    if n == 0:
        return 0.0
    v = first_passage_logs(K, x, y, n, w)[n]
    return math.exp(v) if v > -math.inf else 0.0


# ---------------------------------------------------------------------------
# class structure
# ---------------------------------------------------------------------------


@dataclass
class ClassStructure:
    """Irreducible classes of a windowed kernel and reachability between them."""

    labels: np.ndarray
    classes: list
    reach: list = field(default_factory=list)  # reach[c] = set of classes reachable from c

    def class_of(self, x):
        return int(self.labels[x])

    def reachable_classes(self, x):
        return sorted(self.reach[self.class_of(x)])

    def has_cycle(self, c, K):
        members = self.classes[c]
        if len(members) > 1:
            return True
        s = members[0]
        return bool(np.any(K.row(s)[0] == s))


def irreducible_classes(K: WeightedKernel, w: Window | None = None) -> ClassStructure:
    """Strongly connected components of E(X) on the window, with reachability."""
    w = w or K.window()
    mat = K.matrix(w)
    n_comp, labels = connected_components(mat, directed=True, connection="strong")
    classes = [sorted(np.flatnonzero(labels == c).tolist()) for c in range(n_comp)]
    reach = []
    for c in range(n_comp):
        order = breadth_first_order(mat, classes[c][0], directed=True,
                                    return_predecessors=False)
        reach.append({int(labels[s]) for s in order})
    return ClassStructure(labels=labels, classes=classes, reach=reach)


def reachable_sites(K: WeightedKernel, x, w: Window):
    """Sites ``y`` in the window with ``x -> y`` (including x itself)."""
    order = breadth_first_order(K.matrix(w), x, directed=True,
                                return_predecessors=False)
    return np.sort(order)


def closure(K: WeightedKernel, sites, steps):
    """All sites reachable from ``sites`` in at most ``steps`` steps (full rows)."""
    frontier = set(int(s) for s in sites)
    seen = set(frontier)
    for _ in range(steps):
        new = set()
        for s in frontier:
            for y in K.row(s)[0]:
                y = int(y)
                if y not in seen:
                    new.add(y)
        seen |= new
        frontier = new
        if not frontier:
            break
    return sorted(seen)


# ---------------------------------------------------------------------------
# local isomorphism
# ---------------------------------------------------------------------------


@dataclass
class IsomorphismCheck:
    verified: bool
    window: int
    violation: tuple | None = None  # (x, y, lhs, rhs)
    structural: str | None = None


def check_local_isomorphism(KX: WeightedKernel, KY: WeightedKernel, f, w: Window,
                            tol=TOL_ISO) -> IsomorphismCheck:
    """Check ``sum_{z in f^-1(y)} k_xz = k~_{f(x) y}`` for every x in ``w``, y in Y.

    Rows are taken in full, so targets beyond the window still count.
    """
    if not KY.is_finite:
        raise KernelError("quotient kernel must be finite")
    ny = KY.n_sites
    image = set()
    for x in w.sites():
        fx = int(f(x))
        if not 0 <= fx < ny:
            return IsomorphismCheck(False, w.size, structural=f"f({x}) = {fx} not in Y")
        image.add(fx)
        lhs = np.zeros(ny)
        ys, ws = KX.row(x)
        for z, k in zip(ys, ws):
            fz = int(f(int(z)))
            if not 0 <= fz < ny:
                return IsomorphismCheck(False, w.size, structural=f"f({z}) = {fz} not in Y")
            lhs[fz] += k
        rhs = np.zeros(ny)
        ty, tw = KY.row(fx)
        rhs[ty] = tw
        bad = np.flatnonzero(np.abs(lhs - rhs) > tol)
        if bad.size:
            y = int(bad[0])
            return IsomorphismCheck(False, w.size, violation=(x, y, lhs[y], rhs[y]))
    if len(image) < ny:
        missing = sorted(set(range(ny)) - image)
        return IsomorphismCheck(False, w.size,
                                structural=f"f is not onto Y within the window; missing {missing}")
    return IsomorphismCheck(True, w.size)
