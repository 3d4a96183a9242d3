"""Exact finite-horizon evaluation: enumeration and the centralized DP bound.

``exact_finite_cost`` computes the expected total holding cost of a policy
with no Monte Carlo error.  The default method walks the tree of action
histories: conditional on past actions the two queue lengths are independent
with known marginal beliefs, so each tree node carries two PMFs and a
weight, and branching is over the at-most-four action pairs.  A raw-path
method that enumerates every primitive sequence is retained as the slow
reference oracle.

``centralized_dp`` runs backward induction for a controller that sees both
queues and both primitive streams; its optimum lower-bounds every
decentralized policy and is the optimality oracle for equal deterministic
starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .belief import (
    CommonInfo,
    condition_dense,
    propagate_dense,
    shift_dense,
    support_bounds,
    threshold,
)
from .costs import CostModel
from .errors import BudgetExceededError, ParameterError
from .model import Convention, ModelParams, joint_arrival_departure_kernel
from .pmf import Pmf
from .policies import Policy, get_policy


@dataclass(frozen=True)
class ExactEvalConfig:
    """Inputs for exact evaluation.

    ``horizon`` counts charged cost epochs: the cost is the expectation of
    sum_{t=0}^{horizon-1} c_t(X1_t) + c_t(X2_t), so ``horizon`` epochs mean
    ``horizon - 1`` simulated slots and decision times 0..horizon-2.  (The
    two-epoch case is the classic one-decision problem: c_0 on the initial
    state, c_1 on the state after a single routing decision.)
    """

    horizon: int
    params: ModelParams
    pi1: Pmf
    pi2: Pmf
    cost: CostModel
    convention: Convention = Convention.INDEPENDENT
    state_cap: int | None = None
    budget: int = 10**9

    def __post_init__(self):
        if self.horizon < 1:
            raise ParameterError("horizon must be >= 1")
        cap = self.required_cap()
        if self.state_cap is not None and self.state_cap < cap:
            raise ParameterError(
                f"state cap {self.state_cap} would truncate reachable states "
                f"(need >= {cap})"
            )

    def required_cap(self) -> int:
        """Largest reachable length: one arrival per slot above the初 support."""
        return max(self.pi1.support_max, self.pi2.support_max) + self.horizon + 1

    def cap(self) -> int:
        return self.state_cap if self.state_cap is not None else self.required_cap()

    def raw_size(self) -> int:
        n_slots = self.horizon - 1
        return (
            len(self.pi1.support())
            * len(self.pi2.support())
            * 16**n_slots
        )

    def check_budget(self):
        size = self.raw_size()
        if size > self.budget:
            raise BudgetExceededError(size, self.budget)


def _expected_stage_cost(p: np.ndarray, cost: CostModel, t: int) -> float:
    return float(sum(p[x] * cost(t, x) for x in range(len(p)) if p[x]))


def _event_mass(pibar: np.ndarray, cut: int | None) -> float:
    """Probability that this queue routes (its length reaches the cut)."""
    if cut is None:
        return 0.0
    if cut <= 0:
        return 1.0
    return float(pibar[cut:].sum()) if cut < len(pibar) else 0.0


def exact_finite_cost(
    policy: Policy | str, config: ExactEvalConfig, method: str = "layered"
) -> float:
    """Exact expected total cost of a catalog policy."""
    if isinstance(policy, str):
        policy = get_policy(policy)
    config.check_budget()
    if method == "layered":
        return _layered_cost(policy, config)
    if method == "paths":
        return _raw_path_cost(policy, config)
    raise ParameterError(f"unknown method {method!r}")


def _policy_cuts(policy: Policy, pibar1: np.ndarray, pibar2: np.ndarray):
    info = CommonInfo.from_pre_decision(Pmf(pibar1), Pmf(pibar2))
    return policy.cut(info, 1), policy.cut(info, 2)


def _layered_cost(policy: Policy, config: ExactEvalConfig) -> float:
    kernel = joint_arrival_departure_kernel(config.params, config.convention)
    # node: (weight, post-action belief arrays for both queues)
    nodes = [(1.0, config.pi1.probs, config.pi2.probs)]
    total = 0.0
    for t in range(config.horizon):
        layer_mass = math.fsum(w for w, _, _ in nodes)
        if abs(layer_mass - 1.0) > 1e-12:
            raise ParameterError(
                f"enumeration weights sum to {layer_mass} at epoch {t}"
            )
        for w, p1, p2 in nodes:
            total += w * (
                _expected_stage_cost(p1, config.cost, t)
                + _expected_stage_cost(p2, config.cost, t)
            )
        if t == config.horizon - 1:
            break
        children = []
        for w, p1, p2 in nodes:
            b1 = propagate_dense(p1, kernel)
            b2 = propagate_dense(p2, kernel)
            cut1, cut2 = _policy_cuts(policy, b1, b2)
            m1 = _event_mass(b1, cut1)
            m2 = _event_mass(b2, cut2)
            for u1, q1 in ((0, 1.0 - m1), (1, m1)):
                if q1 <= 0.0:
                    continue
                for u2, q2 in ((0, 1.0 - m2), (1, m2)):
                    if q2 <= 0.0:
                        continue
                    c1 = condition_dense(b1, u1, cut1) if cut1 is not None else b1
                    c2 = condition_dense(b2, u2, cut2) if cut2 is not None else b2
                    children.append(
                        (
                            w * q1 * q2,
                            shift_dense(c1, u2 - u1),
                            shift_dense(c2, u1 - u2),
                        )
                    )
        nodes = children
    return total


def _raw_path_cost(policy: Policy, config: ExactEvalConfig) -> float:
    """Reference oracle: enumerate initial states and primitive sequences."""
    kernel = joint_arrival_departure_kernel(config.params, config.convention)
    # per-queue slot outcomes (a, d, prob)
    combos = [
        (a, d, p)
        for (a, d), p in zip(((0, 0), (0, 1), (1, 0), (1, 1)), kernel)
        if p > 0.0
    ]

    total = 0.0

    def walk(t, w, x1, x2, p1, p2):
        nonlocal total
        total += w * (config.cost(t, x1) + config.cost(t, x2))
        if t == config.horizon - 1:
            return
        b1 = propagate_dense(p1, kernel)
        b2 = propagate_dense(p2, kernel)
        cut1, cut2 = _policy_cuts(policy, b1, b2)
        info = CommonInfo.from_pre_decision(Pmf(b1), Pmf(b2))
        for a1, d1, q1 in combos:
            for a2, d2, q2 in combos:
                xb1 = max(0, x1 - d1) + a1
                xb2 = max(0, x2 - d2) + a2
                u1 = policy.decide(xb1, info, 1)
                u2 = policy.decide(xb2, info, 2)
                c1 = condition_dense(b1, u1, cut1) if cut1 is not None else b1
                c2 = condition_dense(b2, u2, cut2) if cut2 is not None else b2
                walk(
                    t + 1,
                    w * q1 * q2,
                    xb1 - u1 + u2,
                    xb2 - u2 + u1,
                    shift_dense(c1, u2 - u1),
                    shift_dense(c2, u1 - u2),
                )

    # beliefs are common information: they start at the initial PMFs no
    # matter which true lengths the path enumeration picks
    for x1 in config.pi1.support():
        for x2 in config.pi2.support():
            walk(0, config.pi1[x1] * config.pi2[x2], x1, x2,
                 config.pi1.probs, config.pi2.probs)
    return total


ACTION_ORDER = ((0, 0), (1, 0), (0, 1), (1, 1))


@dataclass
class DpResult:
    optimal_cost: float
    # action_table[t][(xbar1, xbar2)] -> (u1, u2) chosen at decision time t
    action_table: list[dict] = field(repr=False, default_factory=list)


def centralized_dp(config: ExactEvalConfig) -> DpResult:
    """Backward induction for the all-seeing controller (a true lower bound)."""
    cap = config.cap()
    T = config.horizon
    kernel = joint_arrival_departure_kernel(config.params, config.convention)
    combos = [
        (a, d, p)
        for (a, d), p in zip(((0, 0), (0, 1), (1, 0), (1, 1)), kernel)
        if p > 0.0
    ]
    size = (cap + 1) * (cap + 1) * max(T - 1, 1) * 16
    if size > config.budget:
        raise BudgetExceededError(size, config.budget)

    n = cap + 1
    xs = np.arange(n)
    stage = lambda t: (
        np.array([config.cost(t, int(x)) for x in xs])[:, None]
        + np.array([config.cost(t, int(x)) for x in xs])[None, :]
    )
    V = stage(T - 1)
    tables: list[dict] = []
    for t in range(T - 2, -1, -1):
        # W(xbar1, xbar2) = min over feasible routing pairs of V at routed state
        W = np.full((n, n), np.inf)
        table: dict = {}
        for xb1 in range(n):
            for xb2 in range(n):
                best = math.inf
                best_u = None
                for u1, u2 in ACTION_ORDER:
                    if (u1 and xb1 == 0) or (u2 and xb2 == 0):
                        continue
                    y1 = xb1 - u1 + u2
                    y2 = xb2 - u2 + u1
                    if y1 > cap or y2 > cap:
                        continue
                    v = V[y1, y2]
                    if v < best - 1e-15:
                        best = v
                        best_u = (u1, u2)
                W[xb1, xb2] = best
                table[(xb1, xb2)] = best_u
        tables.append(table)
        Vn = stage(t).astype(float)
        EW = np.zeros((n, n))
        for a1, d1, q1 in combos:
            for a2, d2, q2 in combos:
                xb1 = np.minimum(np.maximum(xs - d1, 0) + a1, cap)
                xb2 = np.minimum(np.maximum(xs - d2, 0) + a2, cap)
                EW += q1 * q2 * W[np.ix_(xb1, xb2)]
        V = Vn + EW
    tables.reverse()
    opt = 0.0
    for x1 in config.pi1.support():
        for x2 in config.pi2.support():
            opt += config.pi1[x1] * config.pi2[x2] * float(V[x1, x2])
    return DpResult(optimal_cost=opt, action_table=tables)


@dataclass
class DominanceReport:
    """Tail-mass comparison of the total-queue-length laws per policy."""

    horizon: int
    baseline: str
    comparisons: dict
    ok: bool


def _sum_laws(policy: Policy, config: ExactEvalConfig) -> list[np.ndarray]:
    """Exact law of X1_t + X2_t for each epoch t, via the action-history tree."""
    kernel = joint_arrival_departure_kernel(config.params, config.convention)
    nodes = [(1.0, config.pi1.probs, config.pi2.probs)]
    laws = []
    for t in range(config.horizon):
        acc = np.zeros(1)
        for w, p1, p2 in nodes:
            conv = np.convolve(p1, p2) * w
            if len(conv) > len(acc):
                acc = np.pad(acc, (0, len(conv) - len(acc)))
            acc[: len(conv)] += conv
        laws.append(acc)
        if t == config.horizon - 1:
            break
        children = []
        for w, p1, p2 in nodes:
            b1 = propagate_dense(p1, kernel)
            b2 = propagate_dense(p2, kernel)
            cut1, cut2 = _policy_cuts(policy, b1, b2)
            m1 = _event_mass(b1, cut1)
            m2 = _event_mass(b2, cut2)
            for u1, q1 in ((0, 1.0 - m1), (1, m1)):
                if q1 <= 0.0:
                    continue
                for u2, q2 in ((0, 1.0 - m2), (1, m2)):
                    if q2 <= 0.0:
                        continue
                    c1 = condition_dense(b1, u1, cut1) if cut1 is not None else b1
                    c2 = condition_dense(b2, u2, cut2) if cut2 is not None else b2
                    children.append(
                        (w * q1 * q2, shift_dense(c1, u2 - u1), shift_dense(c2, u1 - u2))
                    )
        nodes = children
    return laws


def verify_dominance_smallcase(
    policies: list[Policy | str], config: ExactEvalConfig, tol: float = 1e-12
) -> DominanceReport:
    """Check the threshold policy's total length is stochastically smallest.

    For each comparison policy and every epoch t, asserts that the tail mass
    P(X1_t + X2_t >= a) under the threshold policy is no larger, for every a.
    """
    config.check_budget()
    base = get_policy("ghat")
    base_laws = _sum_laws(base, config)

    def tails(law: np.ndarray) -> np.ndarray:
        return law[::-1].cumsum()[::-1]

    comparisons = {}
    all_ok = True
    for p in policies:
        pol = get_policy(p) if isinstance(p, str) else p
        laws = _sum_laws(pol, config)
        worst = 0.0
        for t, (bl, cl) in enumerate(zip(base_laws, laws)):
            n = max(len(bl), len(cl))
            tb = tails(np.pad(bl, (0, n - len(bl))))
            tc = tails(np.pad(cl, (0, n - len(cl))))
            worst = max(worst, float((tb - tc).max()))
        ok = worst <= tol
        all_ok &= ok
        comparisons[pol.name] = {"max_tail_excess": worst, "ok": ok}
    return DominanceReport(
        horizon=config.horizon, baseline=base.name, comparisons=comparisons, ok=all_ok
    )
