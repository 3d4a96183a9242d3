"""Physical system: primitive randomness, queue dynamics, and holding cost.

Slot ordering (fixed by the dynamics equations): at the start of slot t the
queues hold ``x``; departures and arrivals produce the pre-decision lengths
``xbar = (x - d)+ + a``; routing decisions then move at most one customer
each way to give the next slot's ``x``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleActionError, ParameterError


class Convention(enum.Enum):
    """Per-slot law of one queue's (arrival, departure) indicator pair.

    INDEPENDENT draws the two indicators independently, Bernoulli(lambda)
    and Bernoulli(mu).  EXCLUSIVE makes them mutually exclusive within a
    slot: one arrival w.p. lambda, one departure attempt w.p. mu, nothing
    otherwise (requires lambda + mu <= 1).  The queue update is the same
    ``(x - d)+ + a`` in both cases; only the joint law differs.
    """

    INDEPENDENT = "independent"
    EXCLUSIVE = "exclusive"


@dataclass(frozen=True)
class ModelParams:
    """Arrival probability ``lam`` and departure probability ``mu`` per slot."""

    lam: float
    mu: float

    def __post_init__(self):
        if not (0.0 <= self.lam <= 1.0):
            raise ParameterError(f"lambda must be in [0, 1], got {self.lam}")
        if not (0.0 <= self.mu <= 1.0):
            raise ParameterError(f"mu must be in [0, 1], got {self.mu}")

    def require_stable(self):
        """Infinite-horizon routines need mu > lambda."""
        if not self.mu > self.lam:
            raise ParameterError(
                f"infinite-horizon analysis requires mu > lambda, got "
                f"lambda={self.lam}, mu={self.mu}"
            )


def joint_arrival_departure_kernel(
    params: ModelParams, convention: Convention = Convention.INDEPENDENT
) -> tuple[float, float, float, float]:
    """Probabilities ``(k00, k01, k10, k11)`` of (a, d) in one slot.

    ``kad`` is the probability of arrival indicator ``a`` and departure
    indicator ``d``.  Every belief propagation, exact enumeration, and
    steady-state kernel in the package derives from these four numbers.
    """
    lam, mu = params.lam, params.mu
    if convention is Convention.INDEPENDENT:
        return ((1 - lam) * (1 - mu), (1 - lam) * mu, lam * (1 - mu), lam * mu)
    if lam + mu > 1.0 + 1e-12:
        raise ParameterError(
            f"exclusive convention requires lambda + mu <= 1, got {lam + mu}"
        )
    return (max(0.0, 1.0 - lam - mu), mu, lam, 0.0)


@dataclass(frozen=True)
class Primitives:
    """One slot's arrival/departure indicators for both queues."""

    a1: int
    a2: int
    d1: int
    d2: int

    def __post_init__(self):
        for f in (self.a1, self.a2, self.d1, self.d2):
            if f not in (0, 1):
                raise ParameterError(f"primitive indicators must be 0/1, got {f}")


@dataclass(frozen=True)
class SystemState:
    """True joint queue lengths plus the pre-decision lengths."""

    x1: int
    x2: int
    xbar1: int
    xbar2: int

    def __post_init__(self):
        for f in (self.x1, self.x2, self.xbar1, self.xbar2):
            if f < 0:
                raise ParameterError(f"queue lengths must be >= 0, got {f}")


def step_queue(x: int, d: int, a: int) -> int:
    """One queue's slot update ``(x - d)+ + a``."""
    return max(0, x - d) + a


def apply_routing(xbar1: int, xbar2: int, u1: int, u2: int) -> tuple[int, int]:
    """Move ``u1`` customers 1->2 and ``u2`` customers 2->1; conserves the sum."""
    if u1 and xbar1 == 0:
        raise InfeasibleActionError("u1=1 with empty queue 1")
    if u2 and xbar2 == 0:
        raise InfeasibleActionError("u2=1 with empty queue 2")
    return xbar1 - u1 + u2, xbar2 - u2 + u1


def stage_cost(x1: int, x2: int, cost, t: int = 0) -> float:
    """Holding cost ``c_t(x1) + c_t(x2)`` for one slot."""
    return cost(t, x1) + cost(t, x2)


# RNG stream layout.  A master seed plus (replication, stream) identifies one
# independent PCG64 stream; streams 0..3 drive the four primitive processes
# (A1, A2, D1, D2) so coupling experiments can re-associate departures
# without re-drawing, and stream 4 samples initial queue lengths.
STREAM_A1, STREAM_A2, STREAM_D1, STREAM_D2, STREAM_INIT = range(5)


def make_stream(master_seed: int, replication: int, stream: int) -> np.random.Generator:
    """Deterministically derived, mutually independent generator."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((master_seed, replication, stream)))
    )


def sample_primitives(
    rngs: tuple[np.random.Generator, ...],
    params: ModelParams,
    convention: Convention = Convention.INDEPENDENT,
) -> Primitives:
    """Draw one slot's primitives from the four process streams.

    ``rngs`` is (A1, A2, D1, D2) in that order.  Under the exclusive
    convention the (a, d) pair for queue i is drawn from queue i's arrival
    stream alone; the departure streams are left untouched.
    """
    ra1, ra2, rd1, rd2 = rngs
    if convention is Convention.INDEPENDENT:
        return Primitives(
            a1=int(ra1.random() < params.lam),
            a2=int(ra2.random() < params.lam),
            d1=int(rd1.random() < params.mu),
            d2=int(rd2.random() < params.mu),
        )
    joint_arrival_departure_kernel(params, convention)  # validates lam + mu <= 1
    u1, u2 = ra1.random(), ra2.random()
    a1, d1 = (1, 0) if u1 < params.lam else (0, 1) if u1 < params.lam + params.mu else (0, 0)
    a2, d2 = (1, 0) if u2 < params.lam else (0, 1) if u2 < params.lam + params.mu else (0, 0)
    return Primitives(a1=a1, a2=a2, d1=d1, d2=d2)
