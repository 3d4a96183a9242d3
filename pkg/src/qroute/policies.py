"""Decision rules: the signaling threshold policy and its baselines.

Every policy maps (own pre-decision length, shared CommonInfo) to a routing
indicator and never routes from an empty queue.  Policies whose action is a
threshold test on the own queue length also expose the integer cut point of
that event, which is what Bayes conditioning and exact enumeration need.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .belief import (
    CommonInfo,
    condition_dense,
    event_cut,
    propagate_dense,
    shift_dense,
)
from .errors import ParameterError, UnsupportedPolicyError
from .model import Convention, ModelParams, joint_arrival_departure_kernel
from .pmf import Pmf


class Policy:
    """Stateless decision rule of the separated form.

    ``decide`` may look only at the controller's own pre-decision length and
    the common information; ``cut`` returns the integer cut point c of the
    routing event {xbar >= c} for the given queue, or None when the action
    reveals nothing (open-loop policies).
    """

    name: str = "abstract"

    def decide(self, xbar: int, info: CommonInfo, queue: int = 1) -> int:
        raise NotImplementedError

    def cut(self, info: CommonInfo, queue: int) -> int | None:
        raise NotImplementedError


class GhatPolicy(Policy):
    """Route iff own pre-decision length reaches the support-midpoint threshold."""

    name = "ghat"

    def decide(self, xbar: int, info: CommonInfo, queue: int = 1) -> int:
        return int(xbar >= self.cut(info, queue))

    def cut(self, info: CommonInfo, queue: int) -> int:
        return event_cut(info.threshold)


class G0Policy(Policy):
    """Open-loop baseline: never route."""

    name = "g0"

    def decide(self, xbar: int, info: CommonInfo, queue: int = 1) -> int:
        return 0

    def cut(self, info: CommonInfo, queue: int) -> None:
        return None


class GtildePolicy(Policy):
    """Route iff own length reaches the mean of the other queue's belief.

    The mean comparison is exact: the belief mean is formed as a rational
    number from the float entries, so ties like 'length 1 versus mean 1'
    resolve the same way every time.
    """

    name = "gtilde"

    def decide(self, xbar: int, info: CommonInfo, queue: int = 1) -> int:
        return int(xbar >= self.cut(info, queue))

    def cut(self, info: CommonInfo, queue: int) -> int:
        other = info.pibar2 if queue == 1 else info.pibar1
        return event_cut(other.mean_fraction())


_REGISTRY = {p.name: p for p in (GhatPolicy(), G0Policy(), GtildePolicy())}


def get_policy(name: str) -> Policy:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ParameterError(
            f"unknown policy {name!r}; available: {sorted(_REGISTRY)}"
        ) from None


def advance_common_info(
    info: CommonInfo,
    u1: int,
    u2: int,
    params: ModelParams,
    policy: Policy,
    convention: Convention = Convention.INDEPENDENT,
) -> tuple[CommonInfo, Pmf, Pmf]:
    """One-slot common-information update given the policy's actions.

    Conditions each queue's pre-decision belief on its own action event,
    applies the routing shift, then propagates through the next slot's
    arrivals/departures.  Returns the next CommonInfo together with the
    intermediate post-action beliefs (whose bounds drive balancing checks).
    """
    cuts = (policy.cut(info, 1), policy.cut(info, 2))
    if not isinstance(policy, (GhatPolicy, G0Policy, GtildePolicy)):
        raise UnsupportedPolicyError(
            f"no conditioning event geometry declared for policy {policy.name!r}"
        )
    if isinstance(policy, G0Policy) and (u1 or u2):
        raise ParameterError("g0 cannot have produced a routing action")
    kernel = joint_arrival_departure_kernel(params, convention)
    posts = []
    for pibar, u, u_other, cut in (
        (info.pibar1, u1, u2, cuts[0]),
        (info.pibar2, u2, u1, cuts[1]),
    ):
        arr = pibar.probs
        if cut is not None:
            arr = condition_dense(arr, u, cut)
        arr = shift_dense(arr, u_other - u)
        posts.append(Pmf(arr))
    nxt1 = Pmf(propagate_dense(posts[0].probs, kernel))
    nxt2 = Pmf(propagate_dense(posts[1].probs, kernel))
    return CommonInfo.from_pre_decision(nxt1, nxt2), posts[0], posts[1]


def ghat_decide(xbar: int, info: CommonInfo) -> int:
    """Threshold rule: 1 iff xbar >= threshold and the queue is non-empty."""
    return GhatPolicy().decide(xbar, info)


def g0_decide(xbar: int, info: CommonInfo | None = None) -> int:
    return 0


def gtilde_decide(xbar: int, info: CommonInfo, queue: int) -> int:
    return GtildePolicy().decide(xbar, info, queue)


def threshold_fraction(info: CommonInfo) -> Fraction:
    return info.threshold


def ceil_threshold(info: CommonInfo) -> int:
    return math.ceil(info.threshold)
