"""Finitely supported probability mass functions over non-negative integers.

PMFs are dense float64 vectors indexed by queue length from 0 up to the last
support point.  Support is structural: an index is in the support iff its
entry is exactly nonzero.  Mass is never pruned for being small, so support
logic stays exact while probabilities float.
"""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np

from .errors import ParameterError

SUM_TOL = 1e-12


def _trim(arr: np.ndarray) -> np.ndarray:
    """Drop zero padding beyond the last support point."""
    nz = np.flatnonzero(arr)
    if len(nz) == 0:
        raise ParameterError("PMF has no support")
    return arr[: nz[-1] + 1]


class Pmf:
    """Immutable validated PMF; ``p[x]`` is the probability of length x."""

    __slots__ = ("probs",)

    def __init__(self, probs):
        arr = np.asarray(probs, dtype=np.float64)
        if arr.ndim != 1 or len(arr) == 0:
            raise ParameterError("PMF must be a non-empty 1-D vector")
        if np.any(arr < 0):
            raise ParameterError("PMF entries must be >= 0")
        total = float(arr.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise ParameterError(f"PMF mass {total} not within {SUM_TOL} of 1")
        arr = _trim(arr).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Pmf is immutable")

    def __getstate__(self):
        return self.probs

    def __setstate__(self, state):
        object.__setattr__(self, "probs", state)

    @classmethod
    def point(cls, x: int) -> "Pmf":
        if x < 0:
            raise ParameterError("point mass must be at a non-negative integer")
        arr = np.zeros(x + 1)
        arr[x] = 1.0
        return cls(arr)

    @classmethod
    def from_dict(cls, d: dict) -> "Pmf":
        if not d:
            raise ParameterError("empty PMF dict")
        arr = np.zeros(max(int(k) for k in d) + 1)
        for k, v in d.items():
            arr[int(k)] = v
        return cls(arr)

    def __len__(self) -> int:
        return len(self.probs)

    def __getitem__(self, x: int) -> float:
        if 0 <= x < len(self.probs):
            return float(self.probs[x])
        return 0.0

    def __eq__(self, other) -> bool:
        return isinstance(other, Pmf) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    def __repr__(self):
        return f"Pmf({list(self.probs)})"

    @property
    def support_min(self) -> int:
        return int(np.flatnonzero(self.probs)[0])

    @property
    def support_max(self) -> int:
        return len(self.probs) - 1

    def support(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.probs)]

    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.probs)), self.probs))

    def mean_fraction(self) -> Fraction:
        """Exact rational mean of the (exact-rational) float entries."""
        acc = Fraction(0)
        for x, p in enumerate(self.probs):
            if p:
                acc += x * Fraction(float(p))
        return acc

    def sample(self, rng: np.random.Generator) -> int:
        u = rng.random()
        acc = 0.0
        for x, p in enumerate(self.probs):
            acc += p
            if u < acc:
                return x
        return self.support_max

    def to_json(self) -> str:
        """JSON array of probabilities; round-trips float64 exactly."""
        return json.dumps([float(p) for p in self.probs])

    @classmethod
    def from_json(cls, s: str) -> "Pmf":
        return cls(json.loads(s))
