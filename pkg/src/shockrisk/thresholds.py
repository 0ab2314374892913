"""Laws of the random threshold M, supported on {1, 2, ...}."""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .special import DEFAULT_BUDGET, SeriesBudget, descending_factorial, poisson_tail

#: Returned by moment computations whose defining series diverges.
DIVERGENT = math.inf

TRUNCATION_HARD_CAP = 10**9
CUSTOM_NORMALIZATION_TOL = 1e-12


class ThresholdError(ValueError):
    """Invalid threshold parameters or out-of-domain index."""


class TruncationCapError(ThresholdError):
    """The truncation index would exceed TRUNCATION_HARD_CAP."""


def _check_index(k: int) -> None:
    if k < 1:
        raise ThresholdError(f"pmf is supported on k >= 1, got k={k}")


class ThresholdDistribution:
    """Common interface; subclasses provide ``pmf`` and ``survival``."""

    name = "threshold"

    def pmf(self, k: int) -> float:
        raise NotImplementedError

    def survival(self, k: int) -> float:
        """P(M > k), with P(M > 0) = 1."""
        if k <= 0:
            return 1.0
        return max(0.0, 1.0 - sum(self.pmf(j) for j in range(1, k + 1)))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    @property
    def support_max(self) -> float:
        """Largest k with positive mass (inf for unbounded support)."""
        return math.inf

    def truncation_index(self, eps: float) -> int:
        """Smallest K with P(M > K) < eps."""
        if not 0 < eps < 1:
            raise ThresholdError(f"eps must lie in (0, 1), got {eps}")
        k = 0
        while self.survival(k) >= eps:
            k += 1
            if k > TRUNCATION_HARD_CAP:
                raise TruncationCapError(f"truncation index exceeds {TRUNCATION_HARD_CAP}")
        return k

    def bounded_truncation_index(self, eps: float, limit: int) -> int:
        """min(truncation_index(eps), limit), tolerating heavy tails."""
        try:
            return min(self.truncation_index(eps), limit)
        except TruncationCapError:
            return limit

    def factorial_moment(self, s: int, budget: SeriesBudget = DEFAULT_BUDGET) -> float:
        """E[(M + s - 1)_s]; ``DIVERGENT`` when the series does not converge."""
        if s < 1:
            raise ThresholdError(f"factorial moment order must be >= 1, got {s}")
        total = 0.0
        prev = 0.0
        for k in range(1, budget.max_terms + 1):
            p = self.pmf(k)
            term = p * float(descending_factorial(k + s - 1, s)) if p > 0 else 0.0
            total += term
            if k >= self.support_max or self.survival(k) == 0.0:
                return total
            if p == 0:
                continue
            # past the mode the terms shrink; stop once negligible
            if total > 0 and term <= prev and term <= budget.rel_tol * total:
                return total
            prev = term
        return DIVERGENT

    def pmf_table(self, kmax: int) -> np.ndarray:
        """Array whose entry k is P(M = k) for k = 0..kmax (entry 0 is 0)."""
        out = np.zeros(kmax + 1)
        for k in range(1, kmax + 1):
            out[k] = self.pmf(k)
        return out

    def survival_table(self, kmax: int) -> np.ndarray:
        """Array whose entry k is P(M > k) for k = 0..kmax."""
        return np.array([self.survival(k) for k in range(kmax + 1)])


@dataclass(frozen=True)
class Geometric(ThresholdDistribution):
    p: float
    name = "geometric"

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ThresholdError(f"geometric p must lie in (0, 1], got {self.p}")

    def pmf(self, k):
        _check_index(k)
        return self.p * (1.0 - self.p) ** (k - 1)

    def survival(self, k):
        if k <= 0:
            return 1.0
        return (1.0 - self.p) ** k

    def truncation_index(self, eps):
        if not 0 < eps < 1:
            raise ThresholdError(f"eps must lie in (0, 1), got {eps}")
        if self.p == 1.0:
            return 1
        k = max(0, math.floor(math.log(eps) / math.log1p(-self.p)) - 1)
        if k > TRUNCATION_HARD_CAP:
            raise TruncationCapError(f"truncation index exceeds {TRUNCATION_HARD_CAP}")
        while self.survival(k) >= eps:
            k += 1
        if k > TRUNCATION_HARD_CAP:
            raise TruncationCapError(f"truncation index exceeds {TRUNCATION_HARD_CAP}")
        return k

    def factorial_moment(self, s, budget=DEFAULT_BUDGET):
        if s < 1:
            raise ThresholdError(f"factorial moment order must be >= 1, got {s}")
        return math.factorial(s) / self.p**s

    def sample(self, rng, size):
        return rng.geometric(self.p, size=size).astype(np.int64)


@dataclass(frozen=True)
class ShiftedPoisson(ThresholdDistribution):
    """M = 1 + Poisson(eta)."""

    eta: float
    name = "poisson1"

    def __post_init__(self):
        if not self.eta > 0:
            raise ThresholdError(f"shifted Poisson eta must be positive, got {self.eta}")

    def pmf(self, k):
        _check_index(k)
        return math.exp((k - 1) * math.log(self.eta) - self.eta - math.lgamma(k))

    def survival(self, k):
        if k <= 0:
            return 1.0
        return poisson_tail(k, self.eta)

    def sample(self, rng, size):
        return 1 + rng.poisson(self.eta, size=size).astype(np.int64)


@dataclass(frozen=True)
class Harmonic(ThresholdDistribution):
    """p_k = 1 / (k (k + 1)); infinite mean."""

    name = "harmonic"

    def pmf(self, k):
        _check_index(k)
        return 1.0 / (k * (k + 1.0))

    def survival(self, k):
        if k <= 0:
            return 1.0
        return 1.0 / (k + 1.0)

    def truncation_index(self, eps):
        if not 0 < eps < 1:
            raise ThresholdError(f"eps must lie in (0, 1), got {eps}")
        k = max(0, math.floor(1.0 / eps) - 2)
        if k > TRUNCATION_HARD_CAP:
            raise TruncationCapError(f"truncation index exceeds {TRUNCATION_HARD_CAP}")
        while self.survival(k) >= eps:
            k += 1
        if k > TRUNCATION_HARD_CAP:
            raise TruncationCapError(f"truncation index exceeds {TRUNCATION_HARD_CAP}")
        return k

    def factorial_moment(self, s, budget=DEFAULT_BUDGET):
        if s < 1:
            raise ThresholdError(f"factorial moment order must be >= 1, got {s}")
        return DIVERGENT

    def sample(self, rng, size):
        # P(floor(1/U) > k) = P(U <= 1/(k+1)) for U uniform on (0, 1]
        u = 1.0 - rng.random(size)
        return np.minimum(np.floor(1.0 / u), np.iinfo(np.int64).max // 4).astype(np.int64)


@dataclass(frozen=True)
class NegBinomial2(ThresholdDistribution):
    """p_k = k p^2 (1 - p)^(k - 1): the sum of two geometrics, minus one."""

    p: float
    name = "negbinom2"

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ThresholdError(f"negbinom2 p must lie in (0, 1], got {self.p}")

    def pmf(self, k):
        _check_index(k)
        return k * self.p**2 * (1.0 - self.p) ** (k - 1)

    def survival(self, k):
        if k <= 0:
            return 1.0
        return (1.0 - self.p) ** k * (1.0 + k * self.p)

    def sample(self, rng, size):
        return 1 + rng.negative_binomial(2, self.p, size=size).astype(np.int64)


@dataclass(frozen=True)
class Deterministic(ThresholdDistribution):
    k0: int
    name = "det"

    def __post_init__(self):
        if int(self.k0) != self.k0 or self.k0 < 1:
            raise ThresholdError(f"deterministic threshold must be an integer >= 1, got {self.k0}")

    @property
    def support_max(self):
        return self.k0

    def pmf(self, k):
        _check_index(k)
        return 1.0 if k == self.k0 else 0.0

    def survival(self, k):
        return 1.0 if k < self.k0 else 0.0

    def truncation_index(self, eps):
        if not 0 < eps < 1:
            raise ThresholdError(f"eps must lie in (0, 1), got {eps}")
        return self.k0

    def factorial_moment(self, s, budget=DEFAULT_BUDGET):
        if s < 1:
            raise ThresholdError(f"factorial moment order must be >= 1, got {s}")
        return float(descending_factorial(self.k0 + s - 1, s))

    def sample(self, rng, size):
        return np.full(size, self.k0, dtype=np.int64)


@dataclass(frozen=True)
class Custom(ThresholdDistribution):
    """Finite pmf table over k >= 1."""

    table: Mapping[int, float]
    _ks: tuple = field(init=False, repr=False, compare=False)
    _tail: dict = field(init=False, repr=False, compare=False)
    name = "pmf"

    def __post_init__(self):
        items = sorted((int(k), float(p)) for k, p in dict(self.table).items())
        if not items:
            raise ThresholdError("custom pmf table is empty")
        for k, p in items:
            if k < 1:
                raise ThresholdError(f"custom pmf key must be >= 1, got {k}")
            if p < 0 or not math.isfinite(p):
                raise ThresholdError(f"custom pmf value must be finite and >= 0, got p_{k}={p}")
        total = math.fsum(p for _, p in items)
        if abs(total - 1.0) > CUSTOM_NORMALIZATION_TOL:
            raise ThresholdError(f"custom pmf sums to {total!r}, not 1")
        object.__setattr__(self, "table", dict(items))
        object.__setattr__(self, "_ks", tuple(k for k, _ in items))
        # tail sums accumulated from the largest k down
        tail = {}
        acc = 0.0
        for k, p in reversed(items):
            tail[k] = acc
            acc += p
        object.__setattr__(self, "_tail", tail)

    def __hash__(self):
        return hash(tuple(self.table.items()))

    @property
    def support_max(self):
        return max(k for k, p in self.table.items() if p > 0)

    def pmf(self, k):
        _check_index(k)
        return self.table.get(k, 0.0)

    def survival(self, k):
        if k <= 0:
            return 1.0
        pos = bisect.bisect_right(self._ks, k)
        if pos == len(self._ks):
            return 0.0
        first = self._ks[pos]
        return self._tail[first] + self.table[first]

    def sample(self, rng, size):
        ks = np.array(self._ks, dtype=np.int64)
        ps = np.array([self.table[k] for k in self._ks])
        return rng.choice(ks, size=size, p=ps / ps.sum())

    @classmethod
    def from_csv(cls, path: str | Path) -> "Custom":
        """Read a two-column ``k,p_k`` file with a header row."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["k", "p_k"]:
                raise ThresholdError(f"{path}: expected header 'k,p_k', got {header!r}")
            table: dict[int, float] = {}
            for lineno, row in enumerate(reader, start=2):
                if not row or not "".join(row).strip():
                    continue
                if len(row) != 2:
                    raise ThresholdError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
                try:
                    k, p = int(row[0]), float(row[1])
                except ValueError as exc:
                    raise ThresholdError(f"{path}:{lineno}: {exc}") from None
                if k in table:
                    raise ThresholdError(f"{path}:{lineno}: duplicate k={k}")
                table[k] = p
        return cls(table)
