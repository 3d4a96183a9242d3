"""Pathwise coupling oracle: the threshold system against its uncontrolled shadow.

The shadow pair (y1, y2) consumes the same primitive draws as the
threshold-policy pair (x1, x2), but arrivals/departures are matched between
the longer/shorter queues of each system rather than by queue index.  On the
knife-edge state where the shadow's longer queue sits exactly one above two
equal controlled queues, the two departure draws are swapped for the two
primitive patterns that would otherwise let the controlled maximum overtake
the shadow maximum.  This keeps, pathwise and surely,

    x1 + x2 <= y1 + y2      and      max(x1, x2) <= max(y1, y2),

while each shadow queue still follows the uncontrolled single-queue law.
Pathwise dominance is asserted with zero tolerance; the marginal-law claim
is verified statistically against independently simulated uncontrolled
queues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .belief import CommonInfo
from .costs import CostModel
from .errors import InvariantViolationError
from .model import (
    Convention,
    ModelParams,
    Primitives,
    STREAM_A1,
    STREAM_A2,
    STREAM_D1,
    STREAM_D2,
    STREAM_INIT,
    make_stream,
)
from .pmf import Pmf
from .policies import GhatPolicy

# replication-index offset separating the independent reference runs'
# streams from the coupled runs' streams under one master seed
_REFERENCE_REP_OFFSET = 1 << 20


@dataclass(frozen=True)
class CoupledState:
    """Controlled pair (x1, x2) and shadow pair (y1, y2); dominance enforced."""

    x1: int
    x2: int
    y1: int
    y2: int

    def __post_init__(self):
        if self.x1 + self.x2 > self.y1 + self.y2:
            raise InvariantViolationError(
                f"sum dominance violated: {self.x1}+{self.x2} > {self.y1}+{self.y2}"
            )
        if max(self.x1, self.x2) > max(self.y1, self.y2):
            raise InvariantViolationError(
                f"max dominance violated: max{(self.x1, self.x2)} > max{(self.y1, self.y2)}"
            )


def couple_step(
    state: CoupledState,
    primitives: Primitives,
    info: CommonInfo,
    params: ModelParams,
) -> tuple[CoupledState, dict]:
    """Advance both systems one slot on shared primitives.

    Returns the next state plus a detail dict (actions, swap flag).  The
    controlled side runs the threshold policy against ``info``; the caller
    owns the belief advance.
    """
    pol = GhatPolicy()
    a1, a2, d1, d2 = primitives.a1, primitives.a2, primitives.d1, primitives.d2
    xb1 = max(0, state.x1 - d1) + a1
    xb2 = max(0, state.x2 - d2) + a2
    u1 = pol.decide(xb1, info, 1)
    u2 = pol.decide(xb2, info, 2)
    nx1 = xb1 - u1 + u2
    nx2 = xb2 - u2 + u1

    if state.x1 >= state.x2:
        amx, dmx, amn, dmn = a1, d1, a2, d2
    else:
        amx, dmx, amn, dmn = a2, d2, a1, d1
    ymax, ymin = (
        (state.y1, state.y2) if state.y1 >= state.y2 else (state.y2, state.y1)
    )
    swap = ymax - 1 == state.x1 == state.x2 and (amx, dmx, amn, dmn) in (
        (0, 1, 1, 0),
        (0, 0, 1, 1),
    )
    d_max, d_min = (dmn, dmx) if swap else (dmx, dmn)
    nymax = max(0, ymax - d_max) + amx
    nymin = max(0, ymin - d_min) + amn
    ny1, ny2 = (nymax, nymin) if state.y1 >= state.y2 else (nymin, nymax)

    nxt = CoupledState(x1=nx1, x2=nx2, y1=ny1, y2=ny2)
    return nxt, {"u1": u1, "u2": u2, "case1": swap}


def _uniforms(seed: int, rep: int, horizon: int):
    return (
        make_stream(seed, rep, STREAM_A1).random(horizon),
        make_stream(seed, rep, STREAM_D1).random(horizon),
        make_stream(seed, rep, STREAM_A2).random(horizon),
        make_stream(seed, rep, STREAM_D2).random(horizon),
    )


def _sample_initial(seed: int, rep: int, pi1: Pmf, pi2: Pmf) -> tuple[int, int]:
    rng = make_stream(seed, rep, STREAM_INIT)
    return pi1.sample(rng), pi2.sample(rng)


def _tv_and_band(counts_a: dict, counts_b: dict, n: int) -> tuple[float, float]:
    """Total variation between two empirical laws and a 3-sigma null band.

    Under the null (same law), p_hat(k) - q_hat(k) has variance about
    2 p(k)(1-p(k))/n, so TV = 0.5 * sum_k |diff_k| has mean roughly
    0.5 * sum_k sigma_k * sqrt(2/pi) and variance 0.25 * sum_k sigma_k^2 *
    (1 - 2/pi); the band is mean + 3 sd, computed from the pooled law.
    """
    keys = sorted(set(counts_a) | set(counts_b))
    tv = 0.0
    mean = 0.0
    var = 0.0
    for k in keys:
        pa = counts_a.get(k, 0) / n
        pb = counts_b.get(k, 0) / n
        tv += abs(pa - pb)
        pooled = (counts_a.get(k, 0) + counts_b.get(k, 0)) / (2 * n)
        sig2 = 2.0 * pooled * (1.0 - pooled) / n
        mean += math.sqrt(sig2) * math.sqrt(2.0 / math.pi)
        var += sig2 * (1.0 - 2.0 / math.pi)
    tv *= 0.5
    band = 0.5 * mean + 3.0 * 0.5 * math.sqrt(var)
    return tv, band


@dataclass
class DistributionMatchReport:
    replications: int
    checkpoints: tuple[int, ...]
    # per checkpoint, per queue: (tv, band)
    tv: dict = field(default_factory=dict)
    within_band: bool = True
    case1_events: int = 0


def verify_distribution_match(
    params: ModelParams,
    pi1: Pmf,
    pi2: Pmf,
    horizon: int,
    replications: int,
    seed: int = 0,
    checkpoints: tuple[int, ...] = (1, 5, 20),
    convention: Convention = Convention.INDEPENDENT,
) -> DistributionMatchReport:
    """Compare coupled-shadow marginals to independent uncontrolled runs."""
    if replications < 10_000:
        raise InvariantViolationError(
            "distribution match needs at least 10^4 replications"
        )
    if max(checkpoints) > horizon:
        raise InvariantViolationError("checkpoints beyond horizon")
    snaps = np.array(sorted(checkpoints), dtype=np.int64)
    counts_y = {(t, q): {} for t in checkpoints for q in (1, 2)}
    counts_g0 = {(t, q): {} for t in checkpoints for q in (1, 2)}
    case1_total = 0
    exclusive = int(convention is Convention.EXCLUSIVE)
    for rep in range(replications):
        x1, x2 = _sample_initial(seed, rep, pi1, pi2)
        ua1, ud1, ua2, ud2 = _uniforms(seed, rep, horizon)
        b1, r1 = kernels.support_from_mask(_abs_mask(pi1))
        b2, r2 = kernels.support_from_mask(_abs_mask(pi2))
        res = kernels.coupled_path(
            x1, x2, b1, r1, b2, r2, params.lam, params.mu, exclusive,
            horizon, ua1, ud1, ua2, ud2, None, snaps,
        )
        if res["sum_violations"] or res["max_violations"]:
            raise InvariantViolationError(
                f"dominance violated at rep {rep}, step {res['first_violation']}"
            )
        case1_total += res["case1"]
        for t, (y1, y2) in zip(sorted(checkpoints), res["snapshots"]):
            counts_y[(t, 1)][y1] = counts_y[(t, 1)].get(y1, 0) + 1
            counts_y[(t, 2)][y2] = counts_y[(t, 2)].get(y2, 0) + 1

        ref = rep + _REFERENCE_REP_OFFSET
        gx1, gx2 = _sample_initial(seed, ref, pi1, pi2)
        ga1, gd1, ga2, gd2 = _uniforms(seed, ref, horizon)
        g = kernels.g0_pair_path(
            gx1, gx2, params.lam, params.mu, exclusive, horizon,
            ga1, gd1, ga2, gd2, None, None, snaps,
        )
        for t, (y1, y2) in zip(sorted(checkpoints), g["snapshots"]):
            counts_g0[(t, 1)][y1] = counts_g0[(t, 1)].get(y1, 0) + 1
            counts_g0[(t, 2)][y2] = counts_g0[(t, 2)].get(y2, 0) + 1

    report = DistributionMatchReport(
        replications=replications,
        checkpoints=tuple(sorted(checkpoints)),
        case1_events=case1_total,
    )
    for key in counts_y:
        tv, band = _tv_and_band(counts_y[key], counts_g0[key], replications)
        report.tv[key] = (tv, band)
        if tv > band:
            report.within_band = False
    return report


@dataclass
class CostDominanceReport:
    replications: int
    horizon: int
    violations: int
    case1_events: int
    first_violation: tuple[int, int] | None  # (replication, step)


def verify_cost_dominance(
    params: ModelParams,
    cost: CostModel,
    pi1: Pmf,
    pi2: Pmf,
    horizon: int,
    replications: int,
    seed: int = 0,
    convention: Convention = Convention.INDEPENDENT,
) -> CostDominanceReport:
    """Assert stage costs under the threshold policy never exceed the shadow's."""
    c = cost.stationary()
    max_len = max(pi1.support_max, pi2.support_max) + horizon + 1
    table = np.array([c(x) for x in range(max_len + 1)])
    exclusive = int(convention is Convention.EXCLUSIVE)
    violations = 0
    case1_total = 0
    first = None
    for rep in range(replications):
        x1, x2 = _sample_initial(seed, rep, pi1, pi2)
        ua1, ud1, ua2, ud2 = _uniforms(seed, rep, horizon)
        b1, r1 = kernels.support_from_mask(_abs_mask(pi1))
        b2, r2 = kernels.support_from_mask(_abs_mask(pi2))
        res = kernels.coupled_path(
            x1, x2, b1, r1, b2, r2, params.lam, params.mu, exclusive,
            horizon, ua1, ud1, ua2, ud2, table, None,
        )
        bad = res["sum_violations"] + res["max_violations"] + res["cost_violations"]
        if bad:
            violations += bad
            if first is None:
                first = (rep, res["first_violation"])
        case1_total += res["case1"]
    return CostDominanceReport(
        replications=replications,
        horizon=horizon,
        violations=violations,
        case1_events=case1_total,
        first_violation=first,
    )


def _abs_mask(pmf: Pmf) -> int:
    m = 0
    for x in pmf.support():
        m |= 1 << x
    return m
