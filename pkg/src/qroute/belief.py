"""Common-information state: conditional PMFs, support bounds, thresholds.

Two layers compute the same support information:

* the exact Bayes filter on full PMFs (ground truth for probabilities and
  supports), and
* a support-only recursion on bitmasks, which evolves supports without
  touching probabilities.  Supports depend only on event geometry, so the
  two must agree index-for-index; the harness cross-checks them on every
  step of every run.

The classical interval recursion (``update_bounds_lemma1``) is kept as a
third, O(1) view.  Its output always contains the exact bounds but is not
always tight: when a support has a hole exactly at the threshold cut, the
interval arithmetic cannot see it (e.g. supports {2,3,4} and {0,1,2,4,5,6}
with threshold 3: after actions (0,1) the exact joint lower bound is 3, the
interval formula gives 2).  Containment is asserted; equality is not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    NegativeSupportError,
    ParameterError,
    ZeroProbabilityEventError,
)
from .model import Convention, ModelParams, joint_arrival_departure_kernel
from .pmf import Pmf, _trim


# ---------------------------------------------------------------------------
# dense-array core (shared by the public Pmf ops and the trace engine)
# ---------------------------------------------------------------------------

def propagate_dense(p: np.ndarray, kernel: tuple[float, float, float, float]) -> np.ndarray:
    """Law of ``(X - D)+ + A`` for X ~ p and (A, D) ~ kernel."""
    k00, k01, k10, k11 = kernel
    n = len(p)
    out = np.zeros(n + 1)
    stay = k00 + k11
    if n > 1:
        body = p[1:]
        out[0 : n - 1] += body * k01
        out[1:n] += body * stay
        out[2 : n + 1] += body * k10
    out[0] += p[0] * (k00 + k01)
    out[1] += p[0] * (k10 + k11)
    return _trim(out)


def condition_dense(p: np.ndarray, u: int, cut: int) -> np.ndarray:
    """Restrict to {x >= cut} (u=1) or {x < cut} (u=0) and renormalize.

    Conditioning on a sure event returns ``p`` unchanged, bit for bit.
    """
    if u:
        if cut <= 0:
            return p
        if cut > len(p) - 1:
            raise ZeroProbabilityEventError(
                f"routing event {{x >= {cut}}} has zero mass (support max {len(p) - 1})"
            )
        removed = float(p[:cut].sum())
        if removed == 0.0:
            return p
        q = p.copy()
        q[:cut] = 0.0
    else:
        if cut > len(p) - 1:
            return p
        q = p[:cut].copy() if cut > 0 else np.zeros(0)
        removed = 1.0
    mass = float(q.sum())
    if len(q) == 0 or mass <= 0.0 or not q.any():
        side = f"{{x >= {cut}}}" if u else f"{{x < {cut}}}"
        raise ZeroProbabilityEventError(f"conditioning event {side} has zero mass")
    return _trim(q / mass)


def shift_dense(p: np.ndarray, delta: int) -> np.ndarray:
    """Translate support by ``delta`` (law of X + delta)."""
    if delta == 0:
        return p
    if delta > 0:
        return np.concatenate([np.zeros(delta), p])
    k = -delta
    if len(p) <= k or p[:k].any():
        raise NegativeSupportError(f"shift by {delta} puts mass below zero")
    return p[k:]


# ---------------------------------------------------------------------------
# public PMF operations
# ---------------------------------------------------------------------------

def propagate_arrivals_departures(
    pi: Pmf, params: ModelParams, convention: Convention = Convention.INDEPENDENT
) -> Pmf:
    """Pre-decision belief: push ``pi`` through one slot of arrivals/departures."""
    return Pmf(propagate_dense(pi.probs, joint_arrival_departure_kernel(params, convention)))


def event_cut(threshold) -> int:
    """Integer cut point of the routing event {x >= threshold, x >= 1}.

    On integers, {x >= th} equals {x >= ceil(th)}; the max with 1 folds in
    the empty-queue action constraint (a threshold of 0 still cannot make an
    empty queue route).
    """
    return max(1, math.ceil(threshold))


def condition_on_action(pibar: Pmf, u: int, threshold) -> Pmf:
    """Bayes update of a pre-decision belief given a threshold-rule action."""
    return Pmf(condition_dense(pibar.probs, u, event_cut(threshold)))


def shift_by_routing(pi: Pmf, u_own: int, u_other: int) -> Pmf:
    """Deterministic translation by the net routing flow."""
    if u_own and pi[0] > 0:
        raise NegativeSupportError("routing away from a possibly-empty queue")
    return Pmf(shift_dense(pi.probs, u_other - u_own))


# ---------------------------------------------------------------------------
# support bounds and thresholds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SupportBounds:
    """Per-queue and joint support extremes of a belief pair."""

    lb1: int
    ub1: int
    lb2: int
    ub2: int

    def __post_init__(self):
        if not (0 <= self.lb1 <= self.ub1 and 0 <= self.lb2 <= self.ub2):
            raise ParameterError(f"invalid support bounds {self}")

    @property
    def lb(self) -> int:
        return min(self.lb1, self.lb2)

    @property
    def ub(self) -> int:
        return max(self.ub1, self.ub2)

    @property
    def gap(self) -> int:
        return self.ub - self.lb


def support_bounds(pibar1: Pmf, pibar2: Pmf) -> SupportBounds:
    return SupportBounds(
        lb1=pibar1.support_min,
        ub1=pibar1.support_max,
        lb2=pibar2.support_min,
        ub2=pibar2.support_max,
    )


def threshold(bounds: SupportBounds) -> Fraction:
    """Routing threshold: the midpoint of the joint support range, exact."""
    return Fraction(bounds.ub + bounds.lb, 2)


def update_bounds_lemma1(
    bounds: SupportBounds, u1: int, u2: int, th
) -> tuple[int, int]:
    """Classical interval recursion for the next joint (lb, ub).

    ``bounds`` are the pre-decision bounds, ``th`` the threshold the actions
    were generated against.  Output is guaranteed to contain the exact next
    joint bounds; it equals them whenever the supports have no hole at the
    threshold cut.
    """
    cth = math.ceil(th)
    if (u1, u2) == (0, 0):
        return bounds.lb, cth - 1
    if (u1, u2) == (1, 1):
        return cth, bounds.ub
    if (u1, u2) == (1, 0):
        return min(bounds.lb2 + 1, cth - 1), max(bounds.ub1 - 1, cth)
    return min(bounds.lb1 + 1, cth - 1), max(bounds.ub2 - 1, cth)


@dataclass(frozen=True)
class CommonInfo:
    """Both controllers' shared decision-time knowledge.

    Pre-decision beliefs for both queues, their support bounds, and the
    routing threshold.  Everything here is computable from the action
    history alone, so both controllers hold identical copies.
    """

    pibar1: Pmf
    pibar2: Pmf
    bounds: SupportBounds
    threshold: Fraction

    def __post_init__(self):
        if self.bounds != support_bounds(self.pibar1, self.pibar2):
            raise ParameterError("CommonInfo bounds do not match the beliefs")
        if self.threshold != threshold(self.bounds):
            raise ParameterError("CommonInfo threshold does not match the bounds")

    @classmethod
    def from_pre_decision(cls, pibar1: Pmf, pibar2: Pmf) -> "CommonInfo":
        b = support_bounds(pibar1, pibar2)
        return cls(pibar1=pibar1, pibar2=pibar2, bounds=b, threshold=threshold(b))


# ---------------------------------------------------------------------------
# support-only recursion (bitmask twin of the filter's support logic)
# ---------------------------------------------------------------------------

def support_mask(pmf: Pmf) -> int:
    """Bitmask with bit x set iff x is in the support."""
    m = 0
    for x in np.flatnonzero(pmf.probs):
        m |= 1 << int(x)
    return m


def mask_bounds(mask: int) -> tuple[int, int]:
    if mask <= 0:
        raise ZeroProbabilityEventError("empty support mask")
    lb = (mask & -mask).bit_length() - 1
    return lb, mask.bit_length() - 1


def propagate_mask(mask: int, kernel: tuple[float, float, float, float]) -> int:
    """Support image of one slot of arrivals/departures."""
    k00, k01, k10, k11 = kernel
    body = mask & ~1
    out = 0
    if body:
        if k01 > 0:
            out |= body >> 1
        if k00 + k11 > 0:
            out |= body
        if k10 > 0:
            out |= body << 1
    if mask & 1:
        if k00 + k01 > 0:
            out |= 1
        if k10 + k11 > 0:
            out |= 2
    return out


def condition_mask(mask: int, u: int, cut: int) -> int:
    low = (1 << max(cut, 0)) - 1
    out = mask & ~low if u else mask & low
    if out == 0:
        raise ZeroProbabilityEventError(
            f"support conditioning on u={u} at cut {cut} leaves nothing"
        )
    return out


def shift_mask(mask: int, delta: int) -> int:
    if delta >= 0:
        return mask << delta
    if mask & ((1 << -delta) - 1):
        raise NegativeSupportError(f"support shift by {delta} crosses zero")
    return mask >> -delta
