"""Monte Carlo survival estimates for the BRW.

Two simulators share one seeding discipline: the master seed and the replica
index go through ``numpy.random.SeedSequence`` to give one 32-bit seed per
replica, and each replica runs sequentially on its own stream.  Results do
not depend on how replicas are chunked across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from ._accel import USE_NUMBA, thread_cap
from .brw import BRWLaw

Z95 = 1.959963984540054
Z99 = 2.5758293035489004
CHUNK = 256


@dataclass(frozen=True)
class SimConfig:
    lam: float
    x0: int = 0
    replicas: int = 1000
    seed: int = 0
    method: str = "generations"  # generations | continuous
    g_max: int = 1000
    horizon: float = 50.0
    p_max: int = 1000
    r_local: int = 50

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be > 0")
        if self.method not in ("generations", "continuous"):
            raise ValueError("method must be 'generations' or 'continuous'")
        if min(self.replicas, self.g_max, self.p_max, self.r_local) < 1 or not self.horizon > 0:
            raise ValueError("replicas, caps and horizon must be >= 1 / > 0")


@dataclass
class SimOutcome:
    config: SimConfig
    alive: np.ndarray
    censored: np.ndarray
    local: np.ndarray
    ext_time: np.ndarray
    births: np.ndarray
    births_x0: np.ndarray
    steps: np.ndarray
    p_hat: float = field(init=False)
    ci_low: float = field(init=False)
    ci_high: float = field(init=False)

    def __post_init__(self):
        n = self.alive.size
        k = int(self.alive.sum())
        self.p_hat = k / n if n else math.nan
        self.ci_low, self.ci_high = wilson_interval(k, n)

    @property
    def n(self):
        return int(self.alive.size)

    @property
    def n_censored(self):
        return int(self.censored.sum())

    def interval(self, z=Z95):
        return wilson_interval(int(self.alive.sum()), self.n, z)

    def summary(self):
        return {
            "p_hat": self.p_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "replicas": self.n,
            "censored": self.n_censored,
            "local_frequency": float(self.local.mean()) if self.n else math.nan,
            "local_proxy": f"births at x0 >= {self.config.r_local}",
            "config": asdict(self.config),
        }

    def rows(self):
        """Per-replica records ``(replica, alive, censored, local, ext_time, births, births_x0)``."""
        for i in range(self.n):
            yield (i, bool(self.alive[i]), bool(self.censored[i]), bool(self.local[i]),
                   float(self.ext_time[i]), int(self.births[i]), int(self.births_x0[i]))


def wilson_interval(k, n, z=Z95):
    """Wilson score interval for ``k`` successes out of ``n``."""
    if n <= 0:
        return (0.0, 1.0)
    p = k / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return (max(0.0, centre - half), min(1.0, centre + half))


def replica_seeds(master, start, stop):
    """32-bit seeds for replicas ``start..stop-1``, each from ``(master, replica)``."""
    return np.array([np.random.SeedSequence([int(master), r]).generate_state(1)[0]
                     for r in range(start, stop)], dtype=np.int64)


def _sampling_arrays(law: BRWLaw):
    indptr, indices, data = law.csr
    rates = law.rates()
    cumw = np.empty_like(data)
    for x in range(law.n):
        lo, hi = indptr[x], indptr[x + 1]
        if hi > lo:
            c = np.cumsum(data[lo:hi]) / rates[x]
            c[-1] = 1.0
            cumw[lo:hi] = c
    return indptr, indices, cumw, rates


# ---------------------------------------------------------------------------
# offspring
# ---------------------------------------------------------------------------


def sample_offspring(law: BRWLaw, x, rng: np.random.Generator):
    """One draw of ``f``: geometric total, then i.i.d. sites with weights ``k_xy``."""
    ys, ks = law.neighbors(x)
    s_x = float(ks.sum())
    total = int(rng.geometric(1.0 / (1.0 + law.lam * s_x))) - 1
    if total == 0:
        return {}
    counts = rng.multinomial(total, ks / s_x)
    return {int(y): int(c) for y, c in zip(ys, counts) if c}


def sample_offspring_batch(law: BRWLaw, x, n_samples, seed):
    """``n_samples`` draws at ``x`` from the compiled sampler.

    Returns counts aligned with ``law.neighbors(x)[0]``.
    """
    indptr, indices, cumw, rates = _sampling_arrays(law)
    return kernels.offspring_batch(indptr, indices, cumw, rates, float(law.lam), int(x),
                                   int(n_samples), int(seed))


# ---------------------------------------------------------------------------
# replicas
# ---------------------------------------------------------------------------


def _run(law: BRWLaw, cfg: SimConfig, seeds):
    indptr, indices, cumw, rates = _sampling_arrays(law)
    if cfg.method == "generations":
        return kernels.generations(indptr, indices, cumw, rates, float(cfg.lam), int(cfg.x0),
                                   int(cfg.g_max), int(cfg.p_max), int(cfg.r_local), seeds)
    return kernels.continuous(indptr, indices, cumw, rates, float(cfg.lam), int(cfg.x0),
                              float(cfg.horizon), int(cfg.p_max), int(cfg.r_local), seeds)


def _check(law: BRWLaw, cfg: SimConfig):
    if abs(law.lam - cfg.lam) > 0:
        raise ValueError("law and config disagree on lam")
    if not 0 <= cfg.x0 < law.n:
        raise ValueError("start site outside the window")


def simulate_generations(law: BRWLaw, cfg: SimConfig, replica=0) -> SimOutcome:
    """One generation-by-generation replica."""
    _check(law, cfg)
    cfg = SimConfig(**{**asdict(cfg), "method": "generations"})
    return SimOutcome(cfg, *_run(law, cfg, replica_seeds(cfg.seed, replica, replica + 1)))


def simulate_continuous(law: BRWLaw, cfg: SimConfig, replica=0) -> SimOutcome:
    """One event-driven replica in continuous time."""
    _check(law, cfg)
    cfg = SimConfig(**{**asdict(cfg), "method": "continuous"})
    return SimOutcome(cfg, *_run(law, cfg, replica_seeds(cfg.seed, replica, replica + 1)))


def estimate_survival(law: BRWLaw, cfg: SimConfig, threads=None) -> SimOutcome:
    """All replicas of ``cfg`` with the aggregate frequency and Wilson interval.

    Chunks of replicas may run on up to ``BRWCRIT_THREADS`` threads when the
    compiled loops are active (they release the GIL).  Output is identical for any thread count.
    """
    _check(law, cfg)
    if cfg.replicas < 100:
        raise ValueError("estimate_survival needs at least 100 replicas")
    threads = thread_cap() if threads is None else max(1, int(threads))
    if not USE_NUMBA:
        threads = 1  # the Python loops share numpy's global RNG state
    bounds = [(a, min(a + CHUNK, cfg.replicas)) for a in range(0, cfg.replicas, CHUNK)]

    def work(b):
        return _run(law, cfg, replica_seeds(cfg.seed, *b))

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    merged = [np.concatenate([p[i] for p in parts]) for i in range(7)]
    return SimOutcome(cfg, *merged)
