"""Hot numeric loops.

Each kernel exists twice: an explicit-loop version compiled by numba and a
vectorised numpy version.  The module-level names pick one according to
``_accel.USE_NUMBA``; both implementations stay importable under
``numba_impl`` / ``numpy_impl`` so tests and benchmarks can compare them.

Sparse kernels are passed as CSR triples ``(indptr, indices, data)`` over a
window of sites ``0..n-1``.
"""

from types import SimpleNamespace

import numpy as np

from ._accel import USE_NUMBA, njit

# stop reasons returned by the fixed-point loops
CONVERGED = 0
FLOOR = 1
MAX_ITER = 2


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def _vecmat_loop(indptr, indices, data, r):
    n = indptr.shape[0] - 1
    out = np.zeros(n)
    for x in range(n):
        rx = r[x]
        if rx == 0.0:
            continue
        for j in range(indptr[x], indptr[x + 1]):
            out[indices[j]] += rx * data[j]
    return out


def _matvec_loop(indptr, indices, data, v):
    n = indptr.shape[0] - 1
    out = np.zeros(n)
    for x in range(n):
        s = 0.0
        for j in range(indptr[x], indptr[x + 1]):
            s += data[j] * v[indices[j]]
        out[x] = s
    return out


def _row_ids(indptr):
    return np.repeat(np.arange(indptr.shape[0] - 1), np.diff(indptr))


def _vecmat_np(indptr, indices, data, r):
    n = indptr.shape[0] - 1
    rows = _row_ids(indptr)
    return np.bincount(indices, weights=r[rows] * data, minlength=n).astype(float)


def _matvec_np(indptr, indices, data, v):
    n = indptr.shape[0] - 1
    rows = _row_ids(indptr)
    return np.bincount(rows, weights=data * v[indices], minlength=n).astype(float)


# ---------------------------------------------------------------------------
# monotone fixed-point iteration of the BRW generating functions
#
# mode 0: q_{k+1} = G(q_k), q_0 = 0,  G(z) = 1 / (1 + lam K (1 - z))
# mode 1: v_{k+1} = H(v_k), v_0 = 1,  H(v) = lam K v / (1 + lam K v)
#
# ``escape[x]`` is the weight of edges from x that leave the window.  Zeros
# give the sub-kernel (children outside are never born); the true out-weight
# treats children outside as surviving for sure.
#
# Convergence needs residual < tol AND the geometric tail estimate
# residual * r / (1 - r) < tol, with r the ratio of successive residuals.
# The floor stop (mode 1: sup v <= floor, mode 0: inf q >= 1 - floor) ends
# runs whose iterates already bound the limit to within floor of extinction.
# ---------------------------------------------------------------------------


def _iterate_brw_loop(indptr, indices, data, escape, lam, mode, tol, max_iter, floor,
                      audit_tol, history):
    n = indptr.shape[0] - 1
    cur = np.zeros(n)
    if mode == 1:
        cur[:] = 1.0
    nxt = np.zeros(n)
    n_hist = history.shape[0]
    if n_hist > 0:
        history[0, :] = cur
    residual = np.inf
    prev_res = np.inf
    monotone_ok = True
    it = 0
    reason = MAX_ITER
    while it < max_iter:
        for x in range(n):
            s = escape[x]
            for j in range(indptr[x], indptr[x + 1]):
                if mode == 0:
                    s += data[j] * (1.0 - cur[indices[j]])
                else:
                    s += data[j] * cur[indices[j]]
            if mode == 0:
                nxt[x] = 1.0 / (1.0 + lam * s)
            else:
                nxt[x] = lam * s / (1.0 + lam * s)
        res = 0.0
        for x in range(n):
            d = nxt[x] - cur[x]
            if mode == 0:
                if d < -audit_tol:
                    monotone_ok = False
            else:
                if d > audit_tol:
                    monotone_ok = False
            if abs(d) > res:
                res = abs(d)
        it += 1
        for x in range(n):
            cur[x] = nxt[x]
        if it < n_hist:
            history[it, :] = cur
        prev_res = residual
        residual = res
        if not monotone_ok:
            break
        if residual == 0.0:
            reason = CONVERGED
            break
        if residual < tol and prev_res < np.inf:
            ratio = residual / prev_res
            if ratio < 1.0 and residual * ratio / (1.0 - ratio) < tol:
                reason = CONVERGED
                break
        if floor > 0.0:
            if mode == 1:
                m = 0.0
                for x in range(n):
                    if cur[x] > m:
                        m = cur[x]
                if m <= floor:
                    reason = FLOOR
                    break
            else:
                m = 1.0
                for x in range(n):
                    if cur[x] < m:
                        m = cur[x]
                if m >= 1.0 - floor:
                    reason = FLOOR
                    break
    return cur, it, residual, monotone_ok, reason


def _iterate_brw_np(indptr, indices, data, escape, lam, mode, tol, max_iter, floor,
                    audit_tol, history):
    n = indptr.shape[0] - 1
    rows = _row_ids(indptr)
    cur = np.ones(n) if mode == 1 else np.zeros(n)
    n_hist = history.shape[0]
    if n_hist > 0:
        history[0, :] = cur
    residual = np.inf
    prev_res = np.inf
    monotone_ok = True
    it = 0
    reason = MAX_ITER
    while it < max_iter:
        if mode == 0:
            s = np.bincount(rows, weights=data * (1.0 - cur[indices]), minlength=n) + escape
            nxt = 1.0 / (1.0 + lam * s)
            if np.any(nxt - cur < -audit_tol):
                monotone_ok = False
        else:
            s = np.bincount(rows, weights=data * cur[indices], minlength=n) + escape
            nxt = lam * s / (1.0 + lam * s)
            if np.any(nxt - cur > audit_tol):
                monotone_ok = False
        res = float(np.max(np.abs(nxt - cur))) if n else 0.0
        it += 1
        cur = nxt
        if it < n_hist:
            history[it, :] = cur
        prev_res, residual = residual, res
        if not monotone_ok:
            break
        if residual == 0.0:
            reason = CONVERGED
            break
        if residual < tol and np.isfinite(prev_res):
            ratio = residual / prev_res
            if ratio < 1.0 and residual * ratio / (1.0 - ratio) < tol:
                reason = CONVERGED
                break
        if floor > 0.0:
            if mode == 1 and cur.max() <= floor:
                reason = FLOOR
                break
            if mode == 0 and cur.min() >= 1.0 - floor:
                reason = FLOOR
                break
    return cur, it, residual, monotone_ok, reason


# ---------------------------------------------------------------------------
# offspring sampling and replica simulation
#
# Offspring of a particle at x: total count S geometric on {0, 1, ...} with
# P(S >= k) = (lam s_x / (1 + lam s_x))^k, each child's site drawn i.i.d.
# with weights k_xy / s_x.  Only np.random.random() is used, so the loop
# versions consume the same stream whether compiled or not.
# ---------------------------------------------------------------------------


def _draw_total(p_stay):
    if p_stay <= 0.0:
        return 0
    u = np.random.random()
    k = np.floor(np.log(1.0 - u) / np.log(p_stay))
    if k > 1e9:
        k = 1e9
    return int(k)


def _draw_site(indptr, indices, cumw, x):
    u = np.random.random()
    lo = indptr[x]
    hi = indptr[x + 1] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cumw[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return indices[lo]



def _make_sim_kernels(_draw_total, _draw_site, wrap):
    """Build the replica loops around a given pair of draw helpers."""

    def _offspring_batch_loop(indptr, indices, cumw, rowsum, lam, x, n_samples, seed):
        deg = indptr[x + 1] - indptr[x]
        out = np.zeros((n_samples, deg), dtype=np.int64)
        np.random.seed(seed)
        p_stay = lam * rowsum[x] / (1.0 + lam * rowsum[x])
        for i in range(n_samples):
            s = _draw_total(p_stay)
            for _ in range(s):
                u = np.random.random()
                lo = indptr[x]
                hi = indptr[x + 1] - 1
                while lo < hi:
                    mid = (lo + hi) // 2
                    if cumw[mid] > u:
                        hi = mid
                    else:
                        lo = mid + 1
                out[i, lo - indptr[x]] += 1
        return out


    def _generations_loop(indptr, indices, cumw, rowsum, lam, x0, g_max, p_max,
                          r_local, seeds):
        """One generation-by-generation replica per seed."""
        n = indptr.shape[0] - 1
        n_rep = seeds.shape[0]
        alive = np.zeros(n_rep, dtype=np.bool_)
        censored = np.zeros(n_rep, dtype=np.bool_)
        local = np.zeros(n_rep, dtype=np.bool_)
        ext_time = np.full(n_rep, -1.0)
        births = np.zeros(n_rep, dtype=np.int64)
        births_x0 = np.zeros(n_rep, dtype=np.int64)
        steps = np.zeros(n_rep, dtype=np.int64)
        p_stay = np.empty(n)
        for x in range(n):
            p_stay[x] = lam * rowsum[x] / (1.0 + lam * rowsum[x])
        cur = np.zeros(n, dtype=np.int64)
        nxt = np.zeros(n, dtype=np.int64)
        for r in range(n_rep):
            np.random.seed(seeds[r])
            cur[:] = 0
            cur[x0] = 1
            pop = 1
            g = 0
            b = 0
            b0 = 0
            while True:
                if pop == 0:
                    ext_time[r] = g
                    break
                if g >= g_max:
                    alive[r] = True
                    break
                if pop > p_max:
                    alive[r] = True
                    censored[r] = True
                    break
                nxt[:] = 0
                for x in range(n):
                    for _ in range(cur[x]):
                        s = _draw_total(p_stay[x])
                        for _c in range(s):
                            y = _draw_site(indptr, indices, cumw, x)
                            nxt[y] += 1
                            b += 1
                            if y == x0:
                                b0 += 1
                pop = 0
                for x in range(n):
                    cur[x] = nxt[x]
                    pop += nxt[x]
                g += 1
            births[r] = b
            births_x0[r] = b0
            steps[r] = g
            local[r] = b0 >= r_local
        return alive, censored, local, ext_time, births, births_x0, steps


    def _continuous_loop(indptr, indices, cumw, rowsum, lam, x0, horizon, p_max,
                         r_local, seeds):
        """One event-driven replica per seed (embedded jump chain)."""
        n = indptr.shape[0] - 1
        n_rep = seeds.shape[0]
        alive = np.zeros(n_rep, dtype=np.bool_)
        censored = np.zeros(n_rep, dtype=np.bool_)
        local = np.zeros(n_rep, dtype=np.bool_)
        ext_time = np.full(n_rep, -1.0)
        births = np.zeros(n_rep, dtype=np.int64)
        births_x0 = np.zeros(n_rep, dtype=np.int64)
        steps = np.zeros(n_rep, dtype=np.int64)
        rate = np.empty(n)
        for x in range(n):
            rate[x] = 1.0 + lam * rowsum[x]
        counts = np.zeros(n, dtype=np.int64)
        for r in range(n_rep):
            np.random.seed(seeds[r])
            counts[:] = 0
            counts[x0] = 1
            pop = 1
            t = 0.0
            b = 0
            b0 = 0
            ev = 0
            while True:
                if pop == 0:
                    ext_time[r] = t
                    break
                if pop > p_max:
                    alive[r] = True
                    censored[r] = True
                    break
                total = 0.0
                for x in range(n):
                    total += counts[x] * rate[x]
                u = np.random.random()
                t += -np.log(1.0 - u) / total
                if t > horizon:
                    alive[r] = True
                    break
                u = np.random.random() * total
                acc = 0.0
                site = n - 1
                for x in range(n):
                    acc += counts[x] * rate[x]
                    if u < acc:
                        site = x
                        break
                while counts[site] == 0:
                    site -= 1
                ev += 1
                if np.random.random() * rate[site] < 1.0:
                    counts[site] -= 1
                    pop -= 1
                else:
                    y = _draw_site(indptr, indices, cumw, site)
                    counts[y] += 1
                    pop += 1
                    b += 1
                    if y == x0:
                        b0 += 1
            births[r] = b
            births_x0[r] = b0
            steps[r] = ev
            local[r] = b0 >= r_local
        return alive, censored, local, ext_time, births, births_x0, steps

    return (wrap(_offspring_batch_loop), wrap(_generations_loop),
            wrap(_continuous_loop))


def _identity(fn):
    return fn


_py_batch, _py_gen, _py_cont = _make_sim_kernels(_draw_total, _draw_site, _identity)
_nb_batch, _nb_gen, _nb_cont = _make_sim_kernels(
    njit(_draw_total), njit(_draw_site), njit
)

numpy_impl = SimpleNamespace(
    vecmat=_vecmat_np,
    matvec=_matvec_np,
    iterate_brw=_iterate_brw_np,
    offspring_batch=_py_batch,
    generations=_py_gen,
    continuous=_py_cont,
)

numba_impl = SimpleNamespace(
    vecmat=njit(_vecmat_loop),
    matvec=njit(_matvec_loop),
    iterate_brw=njit(_iterate_brw_loop),
    offspring_batch=_nb_batch,
    generations=_nb_gen,
    continuous=_nb_cont,
)

_active = numba_impl if USE_NUMBA else numpy_impl

vecmat = _active.vecmat
matvec = _active.matvec
iterate_brw = _active.iterate_brw
offspring_batch = _active.offspring_batch
generations = _active.generations
continuous = _active.continuous
