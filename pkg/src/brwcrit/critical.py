"""Critical values, survival certificates and critical-behaviour probes."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix, identity, issparse

from .branching import DELTA_SURVIVE, survival_probs, survival_verdict
from .brw import BRWLaw
from .genfun import ReachabilityWarning, estimate_parameters, lambda_s_via_phi
from .graph import Window, WeightedKernel, closure, irreducible_classes, reachable_sites

RHO_TOL = 1e-12
RHO_MAX_ITER = 10**5
DENSE_EIG_SIZE = 200
TOL_CERT = 1e-12
PROBE_MAX_ITER = 10**8
LOWER_MARGIN = 1e-9


# ---------------------------------------------------------------------------
# spectral radius
# ---------------------------------------------------------------------------


@dataclass
class SpectralRadius:
    rho: float
    lower: float
    upper: float
    iterations: int
    method: str

    @property
    def converged(self):
        return self.upper - self.lower <= RHO_TOL * max(1.0, self.upper)


def _power_iteration(A, tol, max_iter):
    """Collatz-Wielandt power iteration on ``A + I`` for an irreducible ``A``."""
    n = A.shape[0]
    B = A + identity(n, format="csr") if issparse(A) else A + np.eye(n)
    v = np.ones(n)
    lo, hi = 0.0, math.inf
    it = 0
    for it in range(1, max_iter + 1):
        u = B @ v
        ratio = u / v
        lo, hi = float(ratio.min()), float(ratio.max())
        if hi - lo <= tol * hi:
            break
        v = u / hi
    return SpectralRadius(0.5 * (lo + hi) - 1.0, lo - 1.0, hi - 1.0, it, "power")


def _symmetrized(sub):
    """``D^-1 A D`` as a symmetric matrix, or None when ``A`` is not reversible.

    ``A`` is reversible when its pattern is symmetric and every cycle has the
    same weight both ways (always true on trees such as nearest-neighbour
    chains).  ``log D`` is built along a BFS tree; the symmetric matrix has
    entries ``sqrt(a_ij a_ji)`` and the same spectrum, with none of the
    non-normal conditioning of ``A`` itself.
    """
    from scipy.sparse.csgraph import breadth_first_order

    A = csr_matrix(sub)
    A.eliminate_zeros()
    coo = A.tocoo()
    At = csr_matrix(A.T)
    if (A != 0).astype(int).__ne__((At != 0).astype(int)).nnz:
        return None
    order, pred = breadth_first_order(A, 0, directed=False, return_predecessors=True)
    if order.size != A.shape[0]:
        return None
    log_d = np.zeros(A.shape[0])
    for i in order[1:]:
        p = pred[i]
        # d_i / d_p = sqrt(a_ip / a_pi) makes the (p, i) pair symmetric
        log_d[i] = log_d[p] + 0.5 * (math.log(A[i, p]) - math.log(A[p, i]))
    lij = np.log(coo.data) + log_d[coo.col] - log_d[coo.row]
    sym = 0.5 * (np.log(coo.data) + np.log(np.asarray(At[coo.row, coo.col]).ravel()))
    if np.max(np.abs(lij - sym), initial=0.0) > 1e-9:
        return None
    return csr_matrix((np.exp(sym), (coo.row, coo.col)), shape=A.shape)


def spectral_radius(A, tol=RHO_TOL, max_iter=RHO_MAX_ITER) -> SpectralRadius:
    """Perron root of a nonnegative square matrix.

    The matrix is split into irreducible classes.  Each class with a cycle
    gets power iteration on ``A_C + I`` (the shift makes bipartite classes
    aperiodic) and the largest root wins.  Classes above ``DENSE_EIG_SIZE``
    sites, where the spectral gap of path-like windows makes power iteration
    crawl, and classes whose Perron vector underflows go to a symmetric
    eigensolver after a diagonal similarity when the class is reversible, and
    to a dense general eigensolver otherwise.  The latter can be inaccurate
    for strongly non-normal classes.
    """
    A = csr_matrix(A)
    best = SpectralRadius(0.0, 0.0, 0.0, 0, "acyclic")
    labels = _scc_labels(A)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        sub = A[idx][:, idx]
        if sub.nnz == 0:
            continue
        res = None
        if idx.size <= DENSE_EIG_SIZE:
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                res = _power_iteration(sub.toarray(), tol, max_iter)
            if not (math.isfinite(res.rho) and res.converged):
                res = None
        if res is None:
            sym = _symmetrized(sub)
            if sym is not None:
                r = float(np.linalg.eigvalsh(sym.toarray())[-1])
                res = SpectralRadius(r, r, r, 0, "symmetrized")
            else:
                r = float(np.max(np.abs(np.linalg.eigvals(sub.toarray()))))
                res = SpectralRadius(r, r, r, 0, "dense")
        if res.rho > best.rho:
            best = res
    return best


def _scc_labels(A):
    from scipy.sparse.csgraph import connected_components

    return connected_components(A, directed=True, connection="strong")[1]


# ---------------------------------------------------------------------------
# lambda_s, lambda_w on finite kernels
# ---------------------------------------------------------------------------


@dataclass
class ClassData:
    sites: list
    rho: float
    reachable: bool


def class_data(K: WeightedKernel, x=None, w: Window | None = None):
    w = w or K.window()
    cs = irreducible_classes(K, w)
    reach = set(cs.reachable_classes(x)) if x is not None else set(range(len(cs.classes)))
    A = K.matrix(w)
    out = []
    for c, members in enumerate(cs.classes):
        rho = 0.0
        if cs.has_cycle(c, K):
            sub = A[members][:, members]
            rho = spectral_radius(sub).rho
        out.append(ClassData(members, rho, c in reach))
    return cs, out


def lambda_s(K: WeightedKernel, x, method="spectral", w: Window | None = None,
             tol=1e-6, n_max=None):
    """Strong critical value ``1 / M_s(x)``.

    ``spectral`` inverts the Perron root of the irreducible class of ``x`` on
    the window (exact for finite kernels, a decreasing upper bound for
    generated ones as the window grows); ``phi`` bisects the first-return
    generating function.
    """
    w = w or K.window()
    if method == "phi":
        return lambda_s_via_phi(K, x, n_max=n_max, w=w, tol=tol)
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    cs = irreducible_classes(K, w)
    c = cs.class_of(x)
    if not cs.has_cycle(c, K):
        return math.inf
    members = cs.classes[c]
    rho = spectral_radius(K.matrix(w)[members][:, members]).rho
    return 1.0 / rho if rho > 0 else math.inf


def lambda_w_finite(K: WeightedKernel, x):
    """``min { 1 / rho_C : C reachable from x }`` with ``1/0 = inf``."""
    if not K.is_finite:
        raise ValueError("lambda_w_finite needs a finite kernel")
    _, data = class_data(K, x)
    rhos = [d.rho for d in data if d.reachable]
    top = max(rhos, default=0.0)
    return 1.0 / top if top > 0 else math.inf


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------


@dataclass
class Certificate:
    """Candidate survival witness ``v`` at rate ``lam``.

    ``v`` is an array on sites ``0..len(v)-1`` (zero beyond) or a callable
    ``site -> value``; callables need ``sites`` to say where to check.
    """

    v: object
    lam: float
    kind: str = "nonlinear"  # nonlinear | linear | iterated
    n: int = 1
    x: int = 0
    sites: int | None = None

    def value(self, y):
        if callable(self.v):
            return float(self.v(y))
        return float(self.v[y]) if 0 <= y < len(self.v) else 0.0

    @property
    def checked_sites(self):
        if self.sites is not None:
            return self.sites
        if callable(self.v):
            raise ValueError("callable certificates need an explicit site count")
        return len(self.v)


@dataclass
class CertificateCheck:
    holds: bool
    site: int | None  # first violating site
    slack: float  # min over checked sites of lhs - rhs

    def __bool__(self):
        return self.holds


def _local_operator(K, sites, depth):
    """Matrix of K on the depth-``depth`` closure of ``sites`` plus the site list."""
    sup = closure(K, sites, depth)
    sub = K.restrict(sup)
    return sub.matrix(sub.window()), sup


def check_certificate(cert: Certificate, K: WeightedKernel, tol_cert=TOL_CERT) -> CertificateCheck:
    """Check ``lam K v >= v/(1-v)``, ``lam^n K^n v >= v`` or ``H_n(v) >= v``.

    Inequalities are checked on ``0..m-1``.  Each application of ``K`` uses
    full rows: the vector lives on the ``n``-step closure of the checked
    sites, so values at the checked sites are exact after ``n`` steps.
    """
    m = cert.checked_sites
    if cert.value(cert.x) <= 0:
        raise ValueError("certificate must be positive at its base site")
    if cert.kind not in ("nonlinear", "linear", "iterated"):
        raise ValueError(f"unknown certificate kind {cert.kind!r}")
    steps = 1 if cert.kind == "nonlinear" else cert.n
    A, sup = _local_operator(K, range(m), steps)
    u = np.array([cert.value(y) for y in sup])
    if u.min(initial=0.0) < 0:
        raise ValueError("certificate entries must be nonnegative")
    pos = np.searchsorted(sup, np.arange(m))
    v0 = u[pos]
    if cert.kind == "nonlinear":
        if v0.max(initial=0.0) >= 1.0 or u.max(initial=0.0) >= 1.0:
            raise ValueError("nonlinear certificates need v < 1")
        lhs = cert.lam * (A @ u)[pos]
        rhs = v0 / (1.0 - v0)
    elif cert.kind == "linear":
        for _ in range(steps):
            u = cert.lam * (A @ u)
        lhs, rhs = u[pos], v0
    else:
        for _ in range(steps):
            ku = cert.lam * (A @ u)
            u = ku / (1.0 + ku)
        lhs, rhs = u[pos], v0
    diff = lhs - rhs
    bad = np.flatnonzero(diff < -tol_cert)
    slack = float(diff.min(initial=math.inf))
    if bad.size:
        return CertificateCheck(False, int(bad[0]), slack)
    return CertificateCheck(True, None, slack)


def part_a_diagnostic(K: WeightedKernel, cert: Certificate, x=None, w: Window | None = None):
    """``inf { v(y) : x -> y, v(y) > 0 }`` over the window."""
    x = cert.x if x is None else x
    w = w or K.window(cert.checked_sites if not K.is_finite else None)
    vals = [cert.value(int(y)) for y in reachable_sites(K, x, w)]
    vals = [v for v in vals if v > 0]
    return min(vals) if vals else math.inf


# ---------------------------------------------------------------------------
# lambda_w bracket
# ---------------------------------------------------------------------------


@dataclass
class Bracket:
    lower: float
    upper: float
    window: int
    n_max: int
    diagnostic: str = ""

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, lam):
        return self.lower <= lam <= self.upper


def windowed_verdict(K, x, lam, w, max_iter=PROBE_MAX_ITER, delta=DELTA_SURVIVE):
    """Survival verdict of the ``lam``-BRW at ``x`` restricted to ``w``."""
    rep = survival_probs(BRWLaw(K, lam, w), max_iter=max_iter, floor=delta)
    return survival_verdict(rep, x, delta), rep


def lambda_w_bracket(K: WeightedKernel, x, w: Window | None = None, n_max=None,
                     lam_grid=None, tol=1e-4, max_iter=10**7):
    """``(lower, upper)`` around the weak critical value at ``x``.

    ``lower`` inverts the larger of the liminf root estimate of ``T^n_x`` and
    its slope extrapolation, less a relative margin for rounding.  ``upper`` is the
    smallest rate (grid, then bisection to ``tol``) whose windowed BRW
    survives; survival on a window implies survival on the whole graph.
    """
    if w is None:
        w = K.window(None if K.is_finite else 512)
    n_max = n_max or (1024 if K.is_finite else min(w.size - x - 1, 256))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ReachabilityWarning)
        est = estimate_parameters(K, x, n_max=n_max, w=w, which="Mw_minus")
    m_hat = est.estimate
    lower = (1.0 - LOWER_MARGIN) / m_hat if m_hat > 0 else math.inf
    if not math.isfinite(lower):
        return Bracket(lower, math.inf, w.size, n_max, "no paths of length n_max")
    if lam_grid is None:
        lam_grid = lower * np.geomspace(1.0, 4.0, 17)
    prev = 0.0
    hi = None
    for lam in lam_grid:
        verdict, _ = windowed_verdict(K, x, lam, w, max_iter)
        if verdict == "survives":
            hi = float(lam)
            break
        prev = float(lam)
    if hi is None:
        return Bracket(lower, math.inf, w.size, n_max, "no survival verdict on the grid")
    lo = prev
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if windowed_verdict(K, x, mid, w, max_iter)[0] == "survives":
            hi = mid
        else:
            lo = mid
    return Bracket(lower, hi, w.size, n_max)


# ---------------------------------------------------------------------------
# condition U
# ---------------------------------------------------------------------------


@dataclass
class CondU:
    holds: bool
    witness: int | None
    level: float


def condU_holds(K: WeightedKernel, eps, N_search, w: Window, mw_minus=None, sites=None):
    """Search ``N <= N_search`` with ``T^N_x >= (M - eps)^N`` for every checked ``x``.

    ``M`` defaults to the M_w^- estimate at the first checked site.  Path
    weights use full rows, so targets beyond the window count.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    sites = list(w.sites()) if sites is None else [int(s) for s in sites]
    if mw_minus is None:
        ww = w if K.is_finite else K.window(max(w.size, sites[0] + N_search + 1))
        mw_minus = estimate_parameters(K, sites[0], n_max=max(N_search, 8), w=ww,
                                       which="Mw_minus").estimate
    level = mw_minus - eps
    if level <= 0:
        return CondU(True, 1, level)
    A, sup = _local_operator(K, sites, N_search)
    pos = np.searchsorted(sup, sites)
    u = np.ones(len(sup))
    for N in range(1, N_search + 1):
        u = (A @ u) / level
        if u[pos].min() >= 1.0:
            return CondU(True, N, level)
    return CondU(False, None, level)


# ---------------------------------------------------------------------------
# critical behaviour
# ---------------------------------------------------------------------------


@dataclass
class ProbeResult:
    verdict: str
    lam: float
    v_x: float
    iterations: int
    reason: str


def critical_behavior_probe(K: WeightedKernel, x, which="weak", scale=1.0,
                            max_iter=PROBE_MAX_ITER, delta=DELTA_SURVIVE) -> ProbeResult:
    """Survival verdict at ``scale`` times the strong or weak critical value.

    Only the sites reachable from ``x`` matter, so the run is restricted to
    them.  At criticality the iterates decay like ``1/n`` and the floor stop
    at ``delta`` is what ends the run.
    """
    if not K.is_finite:
        raise ValueError("the probe needs a finite kernel")
    lam_c = lambda_s(K, x) if which == "strong" else lambda_w_finite(K, x)
    if not math.isfinite(lam_c):
        return ProbeResult("extinct", lam_c, 0.0, 0, "no cycle")
    lam = scale * lam_c
    reach = reachable_sites(K, x, K.window())
    sub = K.restrict(reach)
    xi = int(np.searchsorted(reach, x))
    verdict, rep = windowed_verdict(sub, xi, lam, sub.window(), max_iter, delta)
    return ProbeResult(verdict, lam, float(rep.limit[xi]), rep.iterations, rep.reason)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@dataclass
class CriticalReport:
    lambda_s: float
    lambda_w_lower: float
    lambda_w_upper: float
    lambda_w_exact: float | None
    classes: list = field(default_factory=list)
    window: int = 0

    def to_json(self):
        def num(v):
            return None if v is None else (v if math.isfinite(v) else "inf")

        doc = {
            "lambda_s": num(self.lambda_s),
            "lambda_w_lower": num(self.lambda_w_lower),
            "lambda_w_upper": num(self.lambda_w_upper),
            "classes": [{"sites": c.sites, "rho": c.rho} for c in self.classes],
            "window": self.window,
        }
        if self.lambda_w_exact is not None:
            doc["lambda_w_exact"] = num(self.lambda_w_exact)
        return doc


def critical_report(K: WeightedKernel, x, window=None, tol=1e-4, n_max=None) -> CriticalReport:
    w = K.window(window if not K.is_finite else None)
    if not K.is_finite and window is None:
        w = K.window(512)
    br = lambda_w_bracket(K, x, w, n_max=n_max, tol=tol)
    _, data = class_data(K, x, w)
    exact = lambda_w_finite(K, x) if K.is_finite else None
    return CriticalReport(lambda_s(K, x, w=w), br.lower, br.upper, exact,
                          [d for d in data if d.reachable], w.size)
