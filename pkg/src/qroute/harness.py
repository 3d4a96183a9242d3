"""Monte Carlo runner: seeded replications, traces, statistics, invariant checks.

Two interchangeable engines produce identical paths for the same seed:

* ``fast`` - the compiled/pure kernel with support-bitmask belief tracking;
  used for large sweeps (balancing, stopping-time, running-average studies).
* ``filter`` - a Python loop that additionally maintains the full Bayes
  filter PMFs, cross-checks their structural supports against the bitmask
  recursion on every step, and can record full traces.

Per-replication randomness comes from streams derived from (master seed,
replication, stream id); see ``qroute.model`` for the layout.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .belief import (
    condition_dense,
    condition_mask,
    mask_bounds,
    propagate_dense,
    propagate_mask,
    shift_dense,
    shift_mask,
    support_mask,
)
from .costs import CostModel
from .errors import InvariantViolationError, ParameterError
from .model import (
    Convention,
    ModelParams,
    STREAM_A1,
    STREAM_A2,
    STREAM_D1,
    STREAM_D2,
    STREAM_INIT,
    joint_arrival_departure_kernel,
    make_stream,
)
from .pmf import Pmf
from .policies import get_policy

TRACE_SCHEMA = "qroute-trace-v1"
SUMMARY_SCHEMA = "qroute-summary-v1"


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: system, policy, initial knowledge, horizon, seeds."""

    params: ModelParams
    pi1: Pmf
    pi2: Pmf
    horizon: int
    cost: CostModel
    policy: str = "ghat"
    replications: int = 1
    seed: int = 0
    convention: Convention = Convention.INDEPENDENT
    initial: tuple[int, int] | None = None  # None: sample from the beliefs
    max_support: int = 100_000

    def __post_init__(self):
        if self.horizon < 1:
            raise ParameterError("horizon must be >= 1")
        if self.replications < 1:
            raise ParameterError("replications must be >= 1")
        if max(self.pi1.support_max, self.pi2.support_max) > self.max_support:
            raise ParameterError("initial belief support exceeds configured bound")
        get_policy(self.policy)
        if self.initial is not None:
            x1, x2 = self.initial
            if self.pi1[x1] == 0.0 or self.pi2[x2] == 0.0:
                raise ParameterError(
                    f"explicit initial lengths {self.initial} lie outside the "
                    "initial beliefs' supports"
                )


@dataclass(frozen=True)
class TraceRecord:
    """One slot: entry state, primitives, decision context, actions, cost.

    ``lb``/``ub``/``threshold`` are the decision-time (pre-decision) joint
    support bounds and routing threshold; the pre-decision lengths always
    lie inside [lb, ub] when the true state was sampled from the beliefs.
    """

    t: int
    x1: int
    x2: int
    xbar1: int
    xbar2: int
    u1: int
    u2: int
    a1: int
    a2: int
    d1: int
    d2: int
    lb: int
    ub: int
    threshold: Fraction
    stage_cost: float


CHECK_FIELDS = (
    "truth_violations",
    "lemma_violations",
    "halving_violations",
    "nonincrease_violations",
    "post_t0_violations",
    "balance_violations",
    "s_mismatches",
    "support_mismatches",
    "bound_mismatches",
)


@dataclass
class RepStats:
    replication: int
    cost_total: float
    t0: int | None
    censored: bool
    zero_one_bumps: int = 0
    n00: int = 0
    avgs: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)

    def violation_total(self) -> int:
        return sum(self.counters.get(k, 0) for k in CHECK_FIELDS)


def _draw_uniforms(config: ExperimentConfig, rep: int):
    T = config.horizon
    return (
        make_stream(config.seed, rep, STREAM_A1).random(T),
        make_stream(config.seed, rep, STREAM_D1).random(T),
        make_stream(config.seed, rep, STREAM_A2).random(T),
        make_stream(config.seed, rep, STREAM_D2).random(T),
    )


def _initial_state(config: ExperimentConfig, rep: int) -> tuple[int, int]:
    if config.initial is not None:
        return config.initial
    rng = make_stream(config.seed, rep, STREAM_INIT)
    return config.pi1.sample(rng), config.pi2.sample(rng)


def default_checkpoints(horizon: int) -> list[int]:
    """1-2-5 log-spaced running-average checkpoints, always ending at horizon."""
    pts = set()
    base = 1
    while base <= horizon:
        for m in (1, 2, 5):
            if m * base <= horizon:
                pts.add(m * base)
        base *= 10
    pts.add(horizon)
    return sorted(pts)


def run_replication(
    config: ExperimentConfig,
    rep: int = 0,
    record_trace: bool = False,
    engine: str = "auto",
    checkpoints: list[int] | None = None,
):
    """Simulate one seeded path; returns (trace or None, RepStats)."""
    if engine == "auto":
        engine = "fast" if config.policy in ("ghat", "g0") else "filter"
    if engine == "fast":
        return _run_fast(config, rep, record_trace, checkpoints)
    if engine == "filter":
        return _run_filter(config, rep, record_trace, checkpoints)
    raise ParameterError(f"unknown engine {engine!r}")


def _cost_table(config: ExperimentConfig) -> np.ndarray | None:
    """Stationary cost table covering every reachable length, or None."""
    if len(config.cost.stages) != 1:
        return None
    size = max(config.pi1.support_max, config.pi2.support_max) + config.horizon + 2
    return np.array(config.cost.table(0, size), dtype=np.float64)


def _run_fast(config, rep, record_trace, checkpoints):
    table = _cost_table(config)
    if table is None:
        raise ParameterError("fast engine requires a stationary cost")
    x1, x2 = _initial_state(config, rep)
    ua1, ud1, ua2, ud2 = _draw_uniforms(config, rep)
    cps = np.array(checkpoints or default_checkpoints(config.horizon), dtype=np.int64)
    exclusive = int(config.convention is Convention.EXCLUSIVE)

    if config.policy == "g0":
        res = kernels.g0_pair_path(
            x1, x2, config.params.lam, config.params.mu, exclusive,
            config.horizon, ua1, ud1, ua2, ud2, table, cps, None,
        )
        stats = RepStats(
            replication=rep,
            cost_total=res["cost_total"],
            t0=None,
            censored=False,
            avgs=list(res["avgs"]),
        )
        return None, stats
    if config.policy != "ghat":
        raise ParameterError(f"fast engine does not support policy {config.policy!r}")

    b1, r1 = kernels.support_from_mask(support_mask(config.pi1))
    b2, r2 = kernels.support_from_mask(support_mask(config.pi2))
    res = kernels.ghat_path(
        x1, x2, b1, r1, b2, r2, config.params.lam, config.params.mu, exclusive,
        config.horizon, ua1, ud1, ua2, ud2, table, cps, record_trace,
    )
    stats = RepStats(
        replication=rep,
        cost_total=res["cost_total"],
        t0=None if res["censored"] else res["t0"],
        censored=bool(res["censored"]),
        zero_one_bumps=res["zero_one_bumps"],
        n00=res["n00"],
        avgs=list(res["avgs"]),
        counters={
            k: res[k]
            for k in (
                "truth_violations",
                "lemma_violations",
                "halving_violations",
                "nonincrease_violations",
                "post_t0_violations",
                "balance_violations",
                "s_mismatches",
            )
        },
    )
    trace = None
    if record_trace:
        trace = _trace_from_arrays(res["trace"], config)
    return trace, stats


def _trace_from_arrays(rec: dict, config: ExperimentConfig) -> list[TraceRecord]:
    out = []
    for t in range(config.horizon):
        x1 = int(rec["x1"][t])
        x2 = int(rec["x2"][t])
        out.append(
            TraceRecord(
                t=t,
                x1=x1,
                x2=x2,
                xbar1=int(rec["xbar1"][t]),
                xbar2=int(rec["xbar2"][t]),
                u1=int(rec["u1"][t]),
                u2=int(rec["u2"][t]),
                a1=int(rec["a1"][t]),
                a2=int(rec["a2"][t]),
                d1=int(rec["d1"][t]),
                d2=int(rec["d2"][t]),
                lb=int(rec["lb"][t]),
                ub=int(rec["ub"][t]),
                threshold=Fraction(int(rec["th2"][t]), 2),
                stage_cost=config.cost(t, x1) + config.cost(t, x2),
            )
        )
    return out


def _run_filter(config, rep, record_trace, checkpoints):
    """Python engine: full Bayes filter + bitmask recursion, cross-checked."""
    policy = get_policy(config.policy)
    kernel = joint_arrival_departure_kernel(config.params, config.convention)
    lam, mu = config.params.lam, config.params.mu
    exclusive = config.convention is Convention.EXCLUSIVE
    lam_mu = lam + mu
    is_ghat = config.policy == "ghat"

    x1, x2 = _initial_state(config, rep)
    ua1, ud1, ua2, ud2 = (u.tolist() for u in _draw_uniforms(config, rep))
    cps = checkpoints or default_checkpoints(config.horizon)

    p1 = config.pi1.probs
    p2 = config.pi2.probs
    m1 = support_mask(config.pi1)
    m2 = support_mask(config.pi2)

    lb1, ub1 = mask_bounds(m1)
    lb2, ub2 = mask_bounds(m2)
    prev_gap = max(ub1, ub2) - min(lb1, lb2)
    t0 = 0 if prev_gap <= 1 else -1
    s_track = None

    counters = dict.fromkeys(CHECK_FIELDS, 0)
    bumps = n00 = 0
    if t0 == 0 and abs(x1 - x2) > 1:
        counters["balance_violations"] += 1

    cost_total = 0.0
    avgs = []
    ci = 0
    trace: list[TraceRecord] | None = [] if record_trace else None

    for t in range(config.horizon):
        stage = config.cost(t, x1) + config.cost(t, x2)
        cost_total += stage
        if ci < len(cps) and t + 1 == cps[ci]:
            avgs.append(cost_total / (t + 1))
            ci += 1

        if exclusive:
            v1, v2 = ua1[t], ua2[t]
            a1 = 1 if v1 < lam else 0
            d1 = 1 if (not a1 and v1 < lam_mu) else 0
            a2 = 1 if v2 < lam else 0
            d2 = 1 if (not a2 and v2 < lam_mu) else 0
        else:
            a1 = 1 if ua1[t] < lam else 0
            a2 = 1 if ua2[t] < lam else 0
            d1 = 1 if ud1[t] < mu else 0
            d2 = 1 if ud2[t] < mu else 0
        xb1 = max(0, x1 - d1) + a1
        xb2 = max(0, x2 - d2) + a2

        # exact filter propagation and its bitmask twin
        b1 = propagate_dense(p1, kernel)
        b2 = propagate_dense(p2, kernel)
        mm1 = propagate_mask(m1, kernel)
        mm2 = propagate_mask(m2, kernel)
        counters["support_mismatches"] += int(
            mm1 != _dense_mask(b1) or mm2 != _dense_mask(b2)
        )
        flb1, fub1 = _first_nz(b1), len(b1) - 1
        flb2, fub2 = _first_nz(b2), len(b2) - 1
        klb1, kub1 = mask_bounds(mm1)
        klb2, kub2 = mask_bounds(mm2)
        counters["bound_mismatches"] += int(
            (flb1, fub1, flb2, fub2) != (klb1, kub1, klb2, kub2)
        )
        lbb = min(flb1, flb2)
        ubb = max(fub1, fub2)
        cth = (ubb + lbb + 1) // 2

        if is_ghat:
            cut1 = cut2 = max(1, cth)
        elif config.policy == "g0":
            cut1 = cut2 = None
        else:  # gtilde: mean of the *other* queue's pre-decision belief
            cut1 = _mean_cut(b2)
            cut2 = _mean_cut(b1)
        u1 = 1 if (cut1 is not None and xb1 >= cut1) else 0
        u2 = 1 if (cut2 is not None and xb2 >= cut2) else 0

        if not (flb1 <= xb1 <= fub1 and flb2 <= xb2 <= fub2):
            counters["truth_violations"] += 1

        if is_ghat:
            if (u1, u2) == (0, 0):
                rlb, rub = lbb, cth - 1
            elif (u1, u2) == (1, 1):
                rlb, rub = cth, ubb
            elif (u1, u2) == (1, 0):
                rlb, rub = min(flb2 + 1, cth - 1), max(fub1 - 1, cth)
            else:
                rlb, rub = min(flb1 + 1, cth - 1), max(fub2 - 1, cth)

        if cut1 is not None:
            p1 = condition_dense(b1, u1, cut1)
            m1 = condition_mask(mm1, u1, cut1)
        else:
            p1, m1 = b1, mm1
        if cut2 is not None:
            p2 = condition_dense(b2, u2, cut2)
            m2 = condition_mask(mm2, u2, cut2)
        else:
            p2, m2 = b2, mm2
        p1 = shift_dense(p1, u2 - u1)
        m1 = shift_mask(m1, u2 - u1)
        p2 = shift_dense(p2, u1 - u2)
        m2 = shift_mask(m2, u1 - u2)

        nx1 = xb1 - u1 + u2
        nx2 = xb2 - u2 + u1

        counters["support_mismatches"] += int(
            m1 != _dense_mask(p1) or m2 != _dense_mask(p2)
        )
        lb1, ub1 = _first_nz(p1), len(p1) - 1
        lb2, ub2 = _first_nz(p2), len(p2) - 1
        klb1, kub1 = mask_bounds(m1)
        klb2, kub2 = mask_bounds(m2)
        counters["bound_mismatches"] += int(
            (lb1, ub1, lb2, ub2) != (klb1, kub1, klb2, kub2)
        )
        lb = min(lb1, lb2)
        ub = max(ub1, ub2)
        gap = ub - lb

        if is_ghat:
            if cth >= 1 and (rlb > lb or rub < ub):
                counters["lemma_violations"] += 1
            if (u1, u2) == (0, 0):
                n00 += 1
                if gap > (prev_gap + 1) // 2:
                    counters["halving_violations"] += 1
            if prev_gap >= 1 and gap > prev_gap:
                counters["nonincrease_violations"] += 1
            if prev_gap == 0 and gap > 0:
                if gap == 1:
                    bumps += 1
                else:
                    counters["nonincrease_violations"] += 1
            if t0 < 0:
                if gap <= 1:
                    t0 = t + 1
            elif gap > 1:
                counters["post_t0_violations"] += 1
            if t0 >= 0 and t + 1 >= t0 and abs(nx1 - nx2) > 1:
                counters["balance_violations"] += 1
            if t0 >= 0 and t + 1 > t0:
                if s_track is None:
                    s_track = nx1 + nx2
                else:
                    s_next = s_track - d1 - d2 + a1 + a2
                    if s_track == 1:
                        s_next += d1 if x1 == 0 else d2
                    elif s_track == 0:
                        s_next += d1 + d2
                    if s_next != nx1 + nx2:
                        counters["s_mismatches"] += 1
                        s_next = nx1 + nx2
                    s_track = s_next

        if trace is not None:
            trace.append(
                TraceRecord(
                    t=t, x1=x1, x2=x2, xbar1=xb1, xbar2=xb2, u1=u1, u2=u2,
                    a1=a1, a2=a2, d1=d1, d2=d2, lb=lbb, ub=ubb,
                    threshold=Fraction(ubb + lbb, 2), stage_cost=stage,
                )
            )

        x1, x2 = nx1, nx2
        prev_gap = gap

    stats = RepStats(
        replication=rep,
        cost_total=cost_total,
        t0=(None if (not is_ghat or t0 < 0) else t0),
        censored=bool(is_ghat and t0 < 0),
        zero_one_bumps=bumps,
        n00=n00,
        avgs=avgs,
        counters=counters,
    )
    return trace, stats


def _first_nz(arr) -> int:
    return int(np.flatnonzero(arr)[0])


def _dense_mask(arr) -> int:
    m = 0
    for x in np.flatnonzero(arr):
        m |= 1 << int(x)
    return m


def _mean_cut(pibar: np.ndarray) -> int:
    from fractions import Fraction as F

    acc = F(0)
    for x, p in enumerate(pibar):
        if p:
            acc += x * F(float(p))
    return max(1, math.ceil(acc))


@dataclass
class RunSummary:
    config_policy: str
    replications: int
    horizon: int
    mean_cost: float
    stderr: float
    mean_running_avg: float
    checkpoints: list
    checkpoint_means: list
    tail_spread: float
    t0_histogram: dict
    censor_fraction: float
    zero_one_bumps: int
    counters: dict
    failures: list

    def violation_total(self) -> int:
        return sum(self.counters.get(k, 0) for k in CHECK_FIELDS)

    def to_json_dict(self) -> dict:
        return {
            "schema": SUMMARY_SCHEMA,
            "policy": self.config_policy,
            "replications": self.replications,
            "horizon": self.horizon,
            "mean_cost": self.mean_cost,
            "stderr": self.stderr,
            "mean_running_avg": self.mean_running_avg,
            "checkpoints": list(self.checkpoints),
            "checkpoint_means": list(self.checkpoint_means),
            "tail_spread": self.tail_spread,
            "t0_histogram": {str(k): v for k, v in sorted(self.t0_histogram.items())},
            "censor_fraction": self.censor_fraction,
            "zero_one_bumps": self.zero_one_bumps,
            "counters": dict(self.counters),
            "failures": list(self.failures),
        }


def _merge_stats(config, all_stats, checkpoints) -> RunSummary:
    n = len(all_stats)
    costs = [s.cost_total for s in all_stats]
    mean = sum(costs) / n
    var = sum((c - mean) ** 2 for c in costs) / (n - 1) if n > 1 else 0.0
    stderr = math.sqrt(var / n) if n > 1 else 0.0
    counters = dict.fromkeys(CHECK_FIELDS, 0)
    t0_hist: dict = {}
    censored = 0
    bumps = 0
    for s in all_stats:
        for k, v in s.counters.items():
            counters[k] = counters.get(k, 0) + v
        bumps += s.zero_one_bumps
        if s.censored:
            censored += 1
        elif s.t0 is not None:
            t0_hist[s.t0] = t0_hist.get(s.t0, 0) + 1
    cp_means = []
    if all_stats[0].avgs:
        k = len(all_stats[0].avgs)
        cp_means = [sum(s.avgs[i] for s in all_stats) / n for i in range(k)]
    terminal = cp_means[-1] if cp_means else mean / config.horizon
    tail_spread = 0.0
    if cp_means:
        tail = [v for c, v in zip(checkpoints, cp_means) if c >= checkpoints[-1] // 10]
        tail_spread = max(abs(v - terminal) for v in tail) if tail else 0.0
    failures = [
        f"{k}={v}" for k, v in counters.items() if v and k in CHECK_FIELDS
    ]
    return RunSummary(
        config_policy=config.policy,
        replications=n,
        horizon=config.horizon,
        mean_cost=mean,
        stderr=stderr,
        mean_running_avg=terminal,
        checkpoints=checkpoints,
        checkpoint_means=cp_means,
        tail_spread=tail_spread,
        t0_histogram=t0_hist,
        censor_fraction=censored / n,
        zero_one_bumps=bumps,
        counters=counters,
        failures=failures,
    )


def _worker(args):
    config, rep, engine, checkpoints = args
    _, stats = run_replication(config, rep, False, engine, checkpoints)
    return stats


def run_experiment(
    config: ExperimentConfig,
    engine: str = "auto",
    n_jobs: int = 1,
    checkpoints: list[int] | None = None,
) -> RunSummary:
    """Run all replications and aggregate; deterministic for a fixed seed."""
    cps = checkpoints or default_checkpoints(config.horizon)
    if n_jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            all_stats = list(
                pool.map(
                    _worker,
                    [(config, r, engine, cps) for r in range(config.replications)],
                    chunksize=max(1, config.replications // (4 * n_jobs)),
                )
            )
    else:
        all_stats = [
            _worker((config, r, engine, cps)) for r in range(config.replications)
        ]
    all_stats.sort(key=lambda s: s.replication)
    return _merge_stats(config, all_stats, cps)


def measure_t0(config: ExperimentConfig, engine: str = "fast") -> dict:
    """Empirical law of the balancing time under the threshold policy."""
    if config.policy != "ghat":
        raise ParameterError("t0 is defined for the threshold policy only")
    hist: dict = {}
    censored = 0
    post_violations = 0
    for rep in range(config.replications):
        _, stats = run_replication(config, rep, False, engine)
        if stats.censored:
            censored += 1
        else:
            hist[stats.t0] = hist.get(stats.t0, 0) + 1
        post_violations += stats.counters.get("post_t0_violations", 0)
    return {
        "histogram": hist,
        "censor_fraction": censored / config.replications,
        "post_t0_gap_violations": post_violations,
        "replications": config.replications,
        "horizon": config.horizon,
    }


def assert_s_identity(trace: list[TraceRecord], t0: int) -> tuple[bool, int | None]:
    """Replay the total-occupancy recursion from t0+1 against a trace.

    The trace supplies states and primitives; the reconstruction
    s' = s - d1 - d2 + a1 + a2 (+ boundary corrections at s in {0, 1})
    must reproduce x1 + x2 at every step after the balancing time.
    """
    s = None
    for rec in trace:
        if rec.t < t0 + 1:
            continue
        if s is None:
            s = rec.x1 + rec.x2
        elif s != rec.x1 + rec.x2:
            return False, rec.t
        s_next = s - rec.d1 - rec.d2 + rec.a1 + rec.a2
        if s == 1:
            s_next += rec.d1 if rec.x1 == 0 else rec.d2
        elif s == 0:
            s_next += rec.d1 + rec.d2
        s = s_next
    return True, None


def write_trace_csv(path, traces: dict[int, list[TraceRecord]]):
    """Write traces (replication -> records) as versioned CSV; byte-stable."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {TRACE_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(
            [
                "rep", "t", "x1", "x2", "xbar1", "xbar2", "u1", "u2",
                "a1", "a2", "d1", "d2", "lb", "ub", "threshold", "stage_cost",
            ]
        )
        for rep in sorted(traces):
            for r in traces[rep]:
                writer.writerow(
                    [
                        rep, r.t, r.x1, r.x2, r.xbar1, r.xbar2, r.u1, r.u2,
                        r.a1, r.a2, r.d1, r.d2, r.lb, r.ub,
                        str(r.threshold), repr(r.stage_cost),
                    ]
                )


def write_summary_json(path, summary: RunSummary):
    with open(path, "w") as fh:
        json.dump(summary.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
