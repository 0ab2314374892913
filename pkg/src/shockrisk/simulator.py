"""Monte Carlo simulation of the two shock streams and the random threshold.

Shocks are generated as one superposed Poisson stream of rate
lambda1 + lambda2 in which each shock is of type 1 with probability pi1.
A sample fails at the first shock that moves the count vector into S_M.

Batches advance every live sample by the same number of shocks per step,
so a step's shock count is shared across the batch and censoring at
``max_events`` is exact. Work is split statically across workers; worker
w draws from ``SeedSequence(seed, spawn_key=(w,))``, so results depend
only on (seed, samples, workers).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .analytic import Model
from .schemes import in_failure_set, in_risky_set

CENSORED_CAUSE = 0
# cap on (live samples x shocks per step) held in memory at once
_STEP_BUDGET = 1 << 21


@dataclass(frozen=True)
class SimConfig:
    samples: int = 100_000
    seed: int = 0
    max_events: int = 10**6
    workers: int = 1

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError(f"samples must be >= 1, got {self.samples}")
        if self.max_events < 1:
            raise ValueError(f"max_events must be >= 1, got {self.max_events}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class SimOutcome:
    failure_time: float
    cause: int
    events: int
    censored: bool


@dataclass
class SampleArrays:
    times: np.ndarray
    causes: np.ndarray
    events: np.ndarray
    censored: np.ndarray
    inconsistent: int = 0

    @classmethod
    def concat(cls, parts: list["SampleArrays"]) -> "SampleArrays":
        return cls(
            np.concatenate([p.times for p in parts]),
            np.concatenate([p.causes for p in parts]),
            np.concatenate([p.events for p in parts]),
            np.concatenate([p.censored for p in parts]),
            sum(p.inconsistent for p in parts),
        )


@dataclass
class EmpiricalSummary:
    samples: int
    grid: list[float]
    survival: list[float]
    survival_se: list[float]
    delta_hat: list[float]
    delta_se: list[float]
    mean_time: float
    mean_time_se: float
    cond_mean: list[float]
    cond_mean_se: list[float]
    cond_second_moment: list[float]
    censored_count: int
    inconsistent_count: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def worker_rng(seed: int, worker: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(worker,))))


def simulate_one(m: Model, rng: np.random.Generator, max_events: int = 10**6) -> SimOutcome:
    """One failure, shock by shock."""
    r = m.rates
    k = int(m.threshold.sample(rng, 1)[0])
    x1 = x2 = 0
    t = 0.0
    for n in range(1, max_events + 1):
        t += rng.exponential(1.0 / r.total)
        cause = 1 if rng.random() < r.pi1 else 2
        pre = (x1, x2)
        if cause == 1:
            x1 += 1
        else:
            x2 += 1
        if in_failure_set(m.scheme, k, (x1, x2)):
            if not in_risky_set(m.scheme, k, cause, pre):
                raise AssertionError(
                    f"failure by cause {cause} from {pre} is outside the risky set for k={k}"
                )
            return SimOutcome(t, cause, n, False)
    return SimOutcome(t, CENSORED_CAUSE, max_events, True)


def simulate_batch(m: Model, rng: np.random.Generator, n: int, max_events: int = 10**6) -> SampleArrays:
    """n independent failures, vectorized across samples."""
    r = m.rates
    scheme = m.scheme
    thresholds = m.threshold.sample(rng, n)
    times = np.zeros(n)
    causes = np.zeros(n, dtype=np.int8)
    events = np.zeros(n, dtype=np.int64)
    censored = np.zeros(n, dtype=bool)
    inconsistent = 0

    live = np.arange(n)
    x1 = np.zeros(n, dtype=np.int64)
    x2 = np.zeros(n, dtype=np.int64)
    t = np.zeros(n)
    k = thresholds
    done = 0
    while live.size:
        step = max(1, min(_STEP_BUDGET // live.size, max_events - done))
        gaps = rng.exponential(1.0 / r.total, size=(live.size, step))
        is1 = rng.random((live.size, step)) < r.pi1
        c1 = x1[:, None] + np.cumsum(is1, axis=1)
        c2 = x2[:, None] + (np.arange(1, step + 1) - np.cumsum(is1, axis=1))
        clock = t[:, None] + np.cumsum(gaps, axis=1)
        hit = scheme.failure_mask(k[:, None], c1, c2)
        failed = hit.any(axis=1)
        if failed.any():
            rows = np.flatnonzero(failed)
            col = hit[rows].argmax(axis=1)
            ids = live[rows]
            kind1 = is1[rows, col]
            cause = np.where(kind1, 1, 2)
            times[ids] = clock[rows, col]
            causes[ids] = cause
            events[ids] = done + col + 1
            pre1 = c1[rows, col] - kind1
            pre2 = c2[rows, col] - ~kind1
            kk = k[rows]
            ok1 = scheme.risky_mask(kk, 1, pre1, pre2)
            ok2 = scheme.risky_mask(kk, 2, pre1, pre2)
            inconsistent += int(np.count_nonzero(~np.where(kind1, ok1, ok2)))
        keep = ~failed
        done += step
        live, k = live[keep], k[keep]
        x1, x2, t = c1[keep, -1], c2[keep, -1], clock[keep, -1]
        if done >= max_events and live.size:
            times[live] = t
            events[live] = max_events
            censored[live] = True
            causes[live] = CENSORED_CAUSE
            break
    return SampleArrays(times, causes, events, censored, inconsistent)


def _worker_samples(samples: int, workers: int) -> list[int]:
    base, extra = divmod(samples, workers)
    return [base + (w < extra) for w in range(workers)]


def _run_worker(args) -> SampleArrays:
    m, seed, worker, n, max_events = args
    return simulate_batch(m, worker_rng(seed, worker), n, max_events)


def simulate(m: Model, cfg: SimConfig) -> SampleArrays:
    """All samples, concatenated in worker order."""
    jobs = [
        (m, cfg.seed, w, n, cfg.max_events)
        for w, n in enumerate(_worker_samples(cfg.samples, cfg.workers))
        if n
    ]
    if cfg.workers == 1 or len(jobs) == 1:
        parts = [_run_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_worker, jobs))
    return SampleArrays.concat(parts)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def summarize(data: SampleArrays, grid) -> EmpiricalSummary:
    """Empirical survival, cause frequencies and moments with standard errors.

    Censored samples count as alive at every grid time and are left out of
    the moment estimates.
    """
    grid = [float(g) for g in grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be sorted ascending")
    n = data.times.size
    alive_time = np.sort(np.where(data.censored, np.inf, data.times))
    surv = 1.0 - np.searchsorted(alive_time, grid, side="right") / n
    surv_se = np.sqrt(surv * (1.0 - surv) / n)
    delta = [np.count_nonzero(data.causes == i) / n for i in (1, 2)]
    delta_se = [math.sqrt(d * (1.0 - d) / n) for d in delta]
    observed = data.times[~data.censored]
    mean, mean_se = _mean_se(observed)
    cond, cond_se, cond2 = [], [], []
    for i in (1, 2):
        ti = data.times[data.causes == i]
        c, se = _mean_se(ti)
        cond.append(c)
        cond_se.append(se)
        cond2.append(float(np.mean(ti**2)) if ti.size else math.nan)
    return EmpiricalSummary(
        samples=n,
        grid=grid,
        survival=[float(s) for s in surv],
        survival_se=[float(s) for s in surv_se],
        delta_hat=delta,
        delta_se=delta_se,
        mean_time=mean,
        mean_time_se=mean_se,
        cond_mean=cond,
        cond_mean_se=cond_se,
        cond_second_moment=cond2,
        censored_count=int(np.count_nonzero(data.censored)),
        inconsistent_count=data.inconsistent,
    )


def run(m: Model, cfg: SimConfig, grid) -> EmpiricalSummary:
    return summarize(simulate(m, cfg), grid)


def z_score(estimate: float, exact: float, se: float, n: int | None = None) -> float:
    """Standardized discrepancy. A zero binomial SE (estimate 0 or 1) falls
    back to the SE implied by the exact proportion when n is given."""
    if not se > 0 and n and 0.0 < exact < 1.0:
        se = math.sqrt(exact * (1.0 - exact) / n)
    if se > 0:
        return abs(estimate - exact) / se
    return 0.0 if estimate == exact else math.inf
