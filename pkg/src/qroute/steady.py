"""Infinite-horizon machinery: truncated chains, stationary laws, average costs.

Two chains matter here.  The total-occupancy chain tracks the summed length
of both queues once the threshold policy has balanced them: two departure
attempts while at least two customers are present, one while exactly one is
present, none when empty.  The uncontrolled single-queue chain underlies the
never-route baseline.  Both are truncated at a cap with reflection, with the
reflected mass reported as a diagnostic (tails are geometric when mu >
lambda, so the default cap of 500 is far more than enough at desk scale).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import CostModel, PolyCost
from .errors import (
    ConvergenceError,
    DivergingCostError,
    ParameterError,
    ReducibleChainError,
)
from .model import Convention, ModelParams, joint_arrival_departure_kernel
from .pmf import Pmf

DEFAULT_CAP = 500
DENSE_SOLVE_LIMIT = 2000
RESIDUAL_TOL = 1e-10
TAIL_MASS_BOUND = 1e-6


@dataclass
class ChainSpec:
    """Row-stochastic transition kernel on {0..cap} with reflected tail."""

    rows: np.ndarray
    cap: int
    tail_mass: float

    def __post_init__(self):
        sums = self.rows.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-12):
            raise ParameterError("chain rows must each sum to 1 within 1e-12")
        if self.tail_mass > TAIL_MASS_BOUND:
            raise ParameterError(
                f"reflected tail mass {self.tail_mass} exceeds bound {TAIL_MASS_BOUND}; "
                "raise the cap"
            )


def _per_queue_combos(params: ModelParams, convention: Convention):
    kernel = joint_arrival_departure_kernel(params, convention)
    return [
        (a, d, p)
        for (a, d), p in zip(((0, 0), (0, 1), (1, 0), (1, 1)), kernel)
        if p > 0.0
    ]


def build_s_chain(
    params: ModelParams,
    cap: int = DEFAULT_CAP,
    convention: Convention = Convention.INDEPENDENT,
) -> ChainSpec:
    """Total-occupancy chain of the balanced two-queue system.

    From s >= 2 both servers work: s' = s - d1 - d2 + a1 + a2.  From s = 1
    exactly one server works, and which queue holds the customer is
    distributionally irrelevant, so a single departure attempt is exact.
    From s = 0 only arrivals act.
    """
    params.require_stable()
    if params.lam <= 0.0:
        raise ParameterError("total-occupancy chain needs lambda > 0 (irreducibility)")
    combos = _per_queue_combos(params, convention)
    n = cap + 1
    rows = np.zeros((n, n))
    tail = 0.0
    # s = 0: arrivals only
    for a1, _, p1 in combos:
        for a2, _, p2 in combos:
            rows[0, min(a1 + a2, cap)] += p1 * p2
    # s = 1: one effective departure attempt plus both arrival streams.
    # The busy queue's (a, d) pair is drawn jointly; the idle queue only
    # contributes its arrival.
    arrival_marginal = {0: 0.0, 1: 0.0}
    for a, _, p in combos:
        arrival_marginal[a] += p
    if cap >= 1:
        for a1, d1, p1 in combos:
            for a2, pa2 in arrival_marginal.items():
                if pa2 <= 0.0:
                    continue
                s_next = 1 - d1 + a1 + a2
                rows[1, min(s_next, cap)] += p1 * pa2
    # s >= 2: both queues serve
    for s in range(2, n):
        for a1, d1, p1 in combos:
            for a2, d2, p2 in combos:
                s_next = s - d1 - d2 + a1 + a2
                if s_next > cap:
                    tail += p1 * p2
                    s_next = cap
                rows[s, s_next] += p1 * p2
    return ChainSpec(rows=rows, cap=cap, tail_mass=tail)


def build_g0_chain(
    params: ModelParams,
    cap: int = DEFAULT_CAP,
    convention: Convention = Convention.INDEPENDENT,
) -> ChainSpec:
    """Single uncontrolled queue: x' = (x - d)+ + a, truncated at cap."""
    combos = _per_queue_combos(params, convention)
    n = cap + 1
    rows = np.zeros((n, n))
    tail = 0.0
    for x in range(n):
        for a, d, p in combos:
            x_next = max(0, x - d) + a
            if x_next > cap:
                tail += p
                x_next = cap
            rows[x, x_next] += p
    return ChainSpec(rows=rows, cap=cap, tail_mass=tail)


def stationary_distribution(
    chain: ChainSpec, max_iter: int = 200_000
) -> Pmf:
    """Unique stationary law on the truncated chain.

    Dense least-squares solve up to DENSE_SOLVE_LIMIT states, power
    iteration beyond.  The defining property is asserted after the solve:
    ||pi P - pi||_1 <= 1e-10.
    """
    P = chain.rows
    n = P.shape[0]
    if n <= DENSE_SOLVE_LIMIT:
        if np.linalg.matrix_rank(P - np.eye(n), tol=1e-9) < n - 1:
            raise ReducibleChainError(
                "stationary distribution is not unique on the truncated chain"
            )
        A = np.vstack([P.T - np.eye(n), np.ones((1, n))])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(A, b, rcond=None)
        pi = np.where(np.abs(pi) < 1e-14, 0.0, pi)
        if np.any(pi < 0):
            raise ConvergenceError("stationary solve produced negative mass")
    else:
        pi = np.full(n, 1.0 / n)
        for _ in range(max_iter):
            nxt = pi @ P
            if np.abs(nxt - pi).sum() <= 1e-12:
                pi = nxt
                break
            pi = nxt
        else:
            raise ConvergenceError(
                f"power iteration did not reach 1e-12 in {max_iter} steps"
            )
    residual = float(np.abs(pi @ P - pi).sum())
    if residual > RESIDUAL_TOL:
        raise ConvergenceError(f"stationary residual {residual} above {RESIDUAL_TOL}")
    return Pmf(pi / pi.sum())


def _tail_cauchy_check(pi: Pmf, values: np.ndarray):
    """Cost must have converged well inside the cap: the last decade of the
    truncated sum has to be negligible next to the total."""
    contrib = pi.probs * values[: len(pi.probs)]
    total = float(contrib.sum())
    k = max(1, int(0.9 * len(contrib)))
    tail = float(contrib[k:].sum())
    if tail > max(1e-9, 1e-9 * abs(total)):
        raise DivergingCostError(
            f"stationary cost tail {tail} at cap suggests divergence (total {total})"
        )


def infinite_cost_ghat(
    params: ModelParams,
    cost: CostModel,
    cap: int = DEFAULT_CAP,
    convention: Convention = Convention.INDEPENDENT,
) -> float:
    """Long-run average cost of the threshold policy.

    Balanced queues split any total s as floor/ceil halves, so the average
    cost is the stationary expectation of c(floor(s/2)) + c(ceil(s/2)) under
    the total-occupancy chain.  The value involves no initial condition.
    """
    c = cost.stationary()
    chain = build_s_chain(params, cap, convention)
    pi = stationary_distribution(chain)
    values = np.array([c(s // 2) + c((s + 1) // 2) for s in range(cap + 1)])
    _tail_cauchy_check(pi, values)
    return float((pi.probs * values[: len(pi.probs)]).sum())


def infinite_cost_g0(
    params: ModelParams,
    cost: CostModel,
    cap: int = DEFAULT_CAP,
    convention: Convention = Convention.INDEPENDENT,
) -> float:
    """Long-run average cost of never routing: two i.i.d. uncontrolled queues."""
    params.require_stable()
    c = cost.stationary()
    chain = build_g0_chain(params, cap, convention)
    pi = stationary_distribution(chain)
    values = np.array([c(x) for x in range(cap + 1)])
    _tail_cauchy_check(pi, values)
    return 2.0 * float((pi.probs * values[: len(pi.probs)]).sum())


def g0_stationary_closed_form(params: ModelParams, cap: int) -> Pmf:
    """Birth-death balance solution of the uncontrolled queue (test oracle)."""
    lam, mu = params.lam, params.mu
    params.require_stable()
    up0 = lam
    up = lam * (1 - mu)
    down = mu * (1 - lam)
    w = np.zeros(cap + 1)
    w[0] = 1.0
    if cap >= 1:
        w[1] = up0 / down
    for x in range(2, cap + 1):
        w[x] = w[x - 1] * (up / down)
    return Pmf(w / w.sum())


def drift(chain: ChainSpec, s: int) -> float:
    """One-step expected change E[s' - s] from state s."""
    return float(np.dot(chain.rows[s], np.arange(chain.cap + 1))) - s
