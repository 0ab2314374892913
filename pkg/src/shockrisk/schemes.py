"""Failure sets S_k and risky sets for the sum, min and max schemes.

Each scheme partitions the lattice of shock counts (x1, x2) into failure
sets S_0, S_1, ... via a level function: the point lies in S_k exactly
when its level is k. The risky set for cause i holds the points outside
S_k that one more type-i shock moves into S_k.

The predicates below work on plain ints and, elementwise, on numpy arrays.
"""

from __future__ import annotations

import enum
from typing import NamedTuple

import numpy as np


class LatticePoint(NamedTuple):
    x1: int
    x2: int


class Scheme(enum.Enum):
    SUM = "sum"
    MIN = "min"
    MAX = "max"

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown scheme {text!r}; expected one of {[s.value for s in cls]}"
            ) from None

    def level(self, x1, x2):
        """Index k of the failure set containing (x1, x2)."""
        if self is Scheme.SUM:
            return x1 + x2
        if self is Scheme.MIN:
            return np.minimum(x1, x2)
        return np.maximum(x1, x2)

    def failure_mask(self, k, x1, x2):
        return self.level(x1, x2) == k

    def risky_mask(self, k, i, x1, x2):
        """Closed descriptions of the risky sets, elementwise."""
        if i == 2:
            x1, x2 = x2, x1
        if self is Scheme.SUM:
            return x1 + x2 == k - 1
        if self is Scheme.MIN:
            return (x1 == k - 1) & (x2 >= k)
        return (x1 == k - 1) & (x2 <= k - 1)

    def failure_window(self, k: int, cap1: int, cap2: int) -> tuple[np.ndarray, np.ndarray]:
        """Points of S_k with x1 <= cap1 and x2 <= cap2."""
        if self is Scheme.SUM:
            x1 = np.arange(max(0, k - cap2), min(k, cap1) + 1)
            return x1, k - x1
        if self is Scheme.MIN:
            # horizontal arm (x1 >= k, x2 = k) and vertical arm (x1 = k, x2 > k)
            if k > cap1 or k > cap2:
                return _empty()
            h = np.arange(k, cap1 + 1)
            v = np.arange(k + 1, cap2 + 1)
            return (np.concatenate([h, np.full(v.size, k)]),
                    np.concatenate([np.full(h.size, k), v]))
        # max: vertical arm (x1 = k, x2 <= k) and horizontal arm (x1 < k, x2 = k)
        parts1, parts2 = [], []
        if k <= cap1:
            v = np.arange(0, min(k, cap2) + 1)
            parts1.append(np.full(v.size, k))
            parts2.append(v)
        if k <= cap2:
            h = np.arange(0, min(k - 1, cap1) + 1)
            parts1.append(h)
            parts2.append(np.full(h.size, k))
        if not parts1:
            return _empty()
        return np.concatenate(parts1), np.concatenate(parts2)

    def risky_window(self, k: int, i: int, cap1: int, cap2: int) -> tuple[np.ndarray, np.ndarray]:
        """Points of the cause-i risky set for S_k inside the window."""
        _check_cause(i)
        if i == 2:
            b, a = self._risky_window_cause1(k, cap2, cap1)
            return a, b
        return self._risky_window_cause1(k, cap1, cap2)

    def _risky_window_cause1(self, k, cap1, cap2):
        if self is Scheme.SUM:
            return Scheme.SUM.failure_window(k - 1, cap1, cap2)
        if k - 1 > cap1:
            return _empty()
        if self is Scheme.MIN:
            x2 = np.arange(k, cap2 + 1)
        else:
            x2 = np.arange(0, min(k - 1, cap2) + 1)
        return np.full(x2.size, k - 1), x2

    def max_level(self, cap1: int, cap2: int) -> int:
        """Largest k whose failure or risky sets meet the window."""
        if self is Scheme.SUM:
            return cap1 + cap2 + 1
        if self is Scheme.MIN:
            return min(cap1, cap2) + 1
        return max(cap1, cap2) + 1


def _empty():
    e = np.zeros(0, dtype=np.int64)
    return e, e


def _check_cause(i: int) -> None:
    if i not in (1, 2):
        raise ValueError(f"cause index must be 1 or 2, got {i}")


def in_failure_set(scheme: Scheme, k: int, pt: LatticePoint) -> bool:
    return bool(scheme.failure_mask(k, pt[0], pt[1]))


def in_risky_set(scheme: Scheme, k: int, i: int, pt: LatticePoint) -> bool:
    _check_cause(i)
    return bool(scheme.risky_mask(k, i, pt[0], pt[1]))


def derived_risky_set(scheme: Scheme, k: int, i: int, pt: LatticePoint) -> bool:
    """Risky-set membership computed only from failure-set membership."""
    _check_cause(i)
    x1, x2 = pt
    nxt = (x1 + 1, x2) if i == 1 else (x1, x2 + 1)
    return not in_failure_set(scheme, k, (x1, x2)) and in_failure_set(scheme, k, nxt)


def enumerate_risky_set(scheme: Scheme, k: int, i: int, bound: int) -> list[LatticePoint]:
    x1, x2 = scheme.risky_window(k, i, bound, bound)
    return sorted(LatticePoint(int(a), int(b)) for a, b in zip(x1, x2))
