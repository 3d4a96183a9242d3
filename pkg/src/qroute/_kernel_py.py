"""Pure-Python twin of the compiled per-slot simulation kernels.

``qroute.kernels`` selects this module when the compiled extension is not
importable (or QROUTE_FORCE_PURE=1).  Draw order, integer logic, and float
accumulation order are identical to the compiled version, so the two
backends produce bit-identical results; only throughput differs.

Belief supports are carried as (base, rel) pairs: bit k of ``rel`` set means
queue length ``base + k`` is possible, and bit 0 is always set (base is the
support minimum).  Supports evolve by pure event geometry and therefore
match the full Bayes filter's structural supports index-for-index.
"""

from __future__ import annotations

import numpy as np

from .errors import InvariantViolationError

_WIDTH_LIMIT = 60


def _normalize(base: int, rel: int) -> tuple[int, int]:
    if rel == 0:
        raise InvariantViolationError("support became empty")
    tz = (rel & -rel).bit_length() - 1
    return base + tz, rel >> tz


def support_from_mask(absolute_mask: int) -> tuple[int, int]:
    """Absolute bitmask (bit x <-> length x) to normalized (base, rel)."""
    return _normalize(0, absolute_mask)


def _propagate_support(base, rel, down, stay, up, z_stay, z_up):
    """Support image of one slot of arrivals/departures, normalized."""
    if base == 0:
        body = rel & ~1
        zero = rel & 1
    else:
        body = rel
        zero = 0
    out = 0  # positions relative to base - 1
    if body:
        if down:
            out |= body
        if stay:
            out |= body << 1
        if up:
            out |= body << 2
    if zero:
        if z_stay:
            out |= 2
        if z_up:
            out |= 4
    nb, nr = _normalize(base - 1, out)
    if nr.bit_length() > _WIDTH_LIMIT:
        raise InvariantViolationError(
            f"support width {nr.bit_length()} exceeds kernel limit {_WIDTH_LIMIT}"
        )
    return nb, nr


def _condition_support(base, rel, u, cut):
    if u:
        drop = cut - base
        if drop > 0:
            rel &= ~((1 << drop) - 1)
            if rel == 0:
                raise InvariantViolationError("routing event support is empty")
            return _normalize(base, rel)
        return base, rel
    keep = cut - base
    if keep <= 0:
        raise InvariantViolationError("hold event support is empty")
    if keep < rel.bit_length():
        rel &= (1 << keep) - 1
    return base, rel


def _slot_primitives(t, lam, mu, exclusive, ua1, ud1, ua2, ud2):
    if exclusive:
        u1, u2 = ua1[t], ua2[t]
        a1 = 1 if u1 < lam else 0
        d1 = 1 if (not a1 and u1 < lam + mu) else 0
        a2 = 1 if u2 < lam else 0
        d2 = 1 if (not a2 and u2 < lam + mu) else 0
    else:
        a1 = 1 if ua1[t] < lam else 0
        a2 = 1 if ua2[t] < lam else 0
        d1 = 1 if ud1[t] < mu else 0
        d2 = 1 if ud2[t] < mu else 0
    return a1, a2, d1, d2


def _support_flags(lam, mu, exclusive):
    if exclusive:
        k00, k01, k10, k11 = 1.0 - lam - mu, mu, lam, 0.0
    else:
        k00 = (1.0 - lam) * (1.0 - mu)
        k01 = (1.0 - lam) * mu
        k10 = lam * (1.0 - mu)
        k11 = lam * mu
    return (
        k01 > 0.0,
        (k00 + k11) > 0.0,
        k10 > 0.0,
        (k00 + k01) > 0.0,
        (k10 + k11) > 0.0,
    )


def ghat_path(
    x1: int,
    x2: int,
    base1: int,
    rel1: int,
    base2: int,
    rel2: int,
    lam: float,
    mu: float,
    exclusive: int,
    horizon: int,
    ua1,
    ud1,
    ua2,
    ud2,
    cost_table=None,
    checkpoints=None,
    record: bool = False,
) -> dict:
    """One threshold-policy replication with support tracking and checks.

    Returns per-path statistics: total cost, running-average checkpoints,
    the balancing time t0, and counters for every invariant the policy is
    supposed to satisfy (all zero on healthy runs except ``zero_one_bumps``,
    which counts the benign 0->1 support-gap widenings at empty-system
    routing steps, and ``n00``, which counts no-routing slots).
    """
    ua1 = list(ua1)
    ud1 = list(ud1)
    ua2 = list(ua2)
    ud2 = list(ud2)
    ct = list(cost_table) if cost_table is not None else None
    cps = [int(c) for c in checkpoints] if checkpoints is not None else []
    down, stay, up, z_stay, z_up = _support_flags(lam, mu, exclusive)

    ub = max(base1 + rel1.bit_length() - 1, base2 + rel2.bit_length() - 1)
    lb = min(base1, base2)
    prev_gap = ub - lb
    t0 = 0 if prev_gap <= 1 else -1
    s_track = -1

    cost_total = 0.0
    avgs = []
    ci = 0
    truth_v = lemma_v = halving_v = noninc_v = bumps = post_t0_v = 0
    balance_v = s_mismatch = n00 = 0
    if t0 == 0 and abs(x1 - x2) > 1:
        balance_v += 1

    if record:
        rec = {
            k: np.empty(horizon, dtype=np.int64)
            for k in (
                "x1",
                "x2",
                "xbar1",
                "xbar2",
                "u1",
                "u2",
                "a1",
                "a2",
                "d1",
                "d2",
                "lb",
                "ub",
                "th2",
            )
        }

    for t in range(horizon):
        if ct is not None:
            cost_total += ct[x1] + ct[x2]
        if ci < len(cps) and t + 1 == cps[ci]:
            avgs.append(cost_total / (t + 1))
            ci += 1

        a1, a2, d1, d2 = _slot_primitives(t, lam, mu, exclusive, ua1, ud1, ua2, ud2)
        xb1 = (x1 - d1 if x1 > d1 else 0) + a1
        xb2 = (x2 - d2 if x2 > d2 else 0) + a2

        bb1, mm1 = _propagate_support(base1, rel1, down, stay, up, z_stay, z_up)
        bb2, mm2 = _propagate_support(base2, rel2, down, stay, up, z_stay, z_up)
        ub1b = bb1 + mm1.bit_length() - 1
        ub2b = bb2 + mm2.bit_length() - 1
        lbb = bb1 if bb1 < bb2 else bb2
        ubb = ub1b if ub1b > ub2b else ub2b
        cth = (ubb + lbb + 1) // 2
        cut = cth if cth > 1 else 1
        u1 = 1 if xb1 >= cut else 0
        u2 = 1 if xb2 >= cut else 0

        if not (bb1 <= xb1 <= ub1b and bb2 <= xb2 <= ub2b):
            truth_v += 1

        # classical interval prediction of the next joint bounds
        if u1 == 0 and u2 == 0:
            rlb, rub = lbb, cth - 1
        elif u1 == 1 and u2 == 1:
            rlb, rub = cth, ubb
        elif u1 == 1:
            rlb = bb2 + 1 if bb2 + 1 < cth - 1 else cth - 1
            rub = ub1b - 1 if ub1b - 1 > cth else cth
        else:
            rlb = bb1 + 1 if bb1 + 1 < cth - 1 else cth - 1
            rub = ub2b - 1 if ub2b - 1 > cth else cth

        base1, rel1 = _condition_support(bb1, mm1, u1, cut)
        base1 += u2 - u1
        base2, rel2 = _condition_support(bb2, mm2, u2, cut)
        base2 += u1 - u2

        nx1 = xb1 - u1 + u2
        nx2 = xb2 - u2 + u1

        ub1n = base1 + rel1.bit_length() - 1
        ub2n = base2 + rel2.bit_length() - 1
        lb = base1 if base1 < base2 else base2
        ub = ub1n if ub1n > ub2n else ub2n
        gap = ub - lb

        # the interval formulas presume a non-degenerate threshold; a zero
        # threshold (both beliefs pinned at empty) carries no information
        if cth >= 1 and (rlb > lb or rub < ub):
            lemma_v += 1
        if u1 == 0 and u2 == 0:
            n00 += 1
            if gap > (prev_gap + 1) // 2:
                halving_v += 1
        if prev_gap >= 1 and gap > prev_gap:
            noninc_v += 1
        if prev_gap == 0 and gap > 0:
            if gap == 1:
                bumps += 1
            else:
                noninc_v += 1

        if t0 < 0:
            if gap <= 1:
                t0 = t + 1
        elif gap > 1:
            post_t0_v += 1

        if t0 >= 0 and t + 1 >= t0 and abs(nx1 - nx2) > 1:
            balance_v += 1
        if t0 >= 0 and t + 1 > t0:
            if s_track < 0:
                s_track = nx1 + nx2
            else:
                s_next = s_track - d1 - d2 + a1 + a2
                if s_track == 1:
                    s_next += d1 if x1 == 0 else d2
                elif s_track == 0:
                    s_next += d1 + d2
                if s_next != nx1 + nx2:
                    s_mismatch += 1
                    s_next = nx1 + nx2
                s_track = s_next

        if record:
            rec["x1"][t] = x1
            rec["x2"][t] = x2
            rec["xbar1"][t] = xb1
            rec["xbar2"][t] = xb2
            rec["u1"][t] = u1
            rec["u2"][t] = u2
            rec["a1"][t] = a1
            rec["a2"][t] = a2
            rec["d1"][t] = d1
            rec["d2"][t] = d2
            rec["lb"][t] = lbb
            rec["ub"][t] = ubb
            rec["th2"][t] = ubb + lbb

        x1, x2 = nx1, nx2
        prev_gap = gap

    out = {
        "x1": x1,
        "x2": x2,
        "cost_total": cost_total,
        "avgs": np.array(avgs),
        "t0": t0,
        "censored": 1 if t0 < 0 else 0,
        "truth_violations": truth_v,
        "lemma_violations": lemma_v,
        "halving_violations": halving_v,
        "nonincrease_violations": noninc_v,
        "zero_one_bumps": bumps,
        "post_t0_violations": post_t0_v,
        "balance_violations": balance_v,
        "s_mismatches": s_mismatch,
        "n00": n00,
        "final_lb": lb,
        "final_ub": ub,
    }
    if record:
        out["trace"] = rec
    return out


def g0_pair_path(
    x1: int,
    x2: int,
    lam: float,
    mu: float,
    exclusive: int,
    horizon: int,
    ua1,
    ud1,
    ua2,
    ud2,
    cost_table=None,
    checkpoints=None,
    snapshot_ts=None,
) -> dict:
    """Two uncontrolled queues; optional state snapshots after k slots."""
    ua1 = list(ua1)
    ud1 = list(ud1)
    ua2 = list(ua2)
    ud2 = list(ud2)
    ct = list(cost_table) if cost_table is not None else None
    cps = [int(c) for c in checkpoints] if checkpoints is not None else []
    snaps = [int(s) for s in snapshot_ts] if snapshot_ts is not None else []
    snap_out = []
    si = 0
    if si < len(snaps) and snaps[si] == 0:
        snap_out.append((x1, x2))
        si += 1
    cost_total = 0.0
    avgs = []
    ci = 0
    for t in range(horizon):
        if ct is not None:
            cost_total += ct[x1] + ct[x2]
        if ci < len(cps) and t + 1 == cps[ci]:
            avgs.append(cost_total / (t + 1))
            ci += 1
        a1, a2, d1, d2 = _slot_primitives(t, lam, mu, exclusive, ua1, ud1, ua2, ud2)
        x1 = (x1 - d1 if x1 > d1 else 0) + a1
        x2 = (x2 - d2 if x2 > d2 else 0) + a2
        if si < len(snaps) and snaps[si] == t + 1:
            snap_out.append((x1, x2))
            si += 1
    return {
        "x1": x1,
        "x2": x2,
        "cost_total": cost_total,
        "avgs": np.array(avgs),
        "snapshots": snap_out,
    }


def coupled_path(
    x1: int,
    x2: int,
    base1: int,
    rel1: int,
    base2: int,
    rel2: int,
    lam: float,
    mu: float,
    exclusive: int,
    horizon: int,
    ua1,
    ud1,
    ua2,
    ud2,
    cost_table=None,
    snapshot_ts=None,
) -> dict:
    """Threshold-policy system plus its coupled uncontrolled shadow.

    Both systems consume the same primitive draws.  The shadow's arrivals
    and departures are re-associated between its longer/shorter queue and
    the controlled system's longer/shorter queue; on the knife-edge state
    where the shadow's longer queue is exactly one above the two equal
    controlled queues, the two departure draws are swapped for the
    primitive patterns that would otherwise let the controlled maximum
    overtake.  Pathwise sum/max/cost dominance counters must stay zero.
    """
    ua1 = list(ua1)
    ud1 = list(ud1)
    ua2 = list(ua2)
    ud2 = list(ud2)
    ct = list(cost_table) if cost_table is not None else None
    snaps = [int(s) for s in snapshot_ts] if snapshot_ts is not None else []
    down, stay, up, z_stay, z_up = _support_flags(lam, mu, exclusive)

    y1, y2 = x1, x2
    snap_out = []
    si = 0
    if si < len(snaps) and snaps[si] == 0:
        snap_out.append((y1, y2))
        si += 1
    case1 = 0
    sum_v = max_v = cost_v = 0
    first_violation = -1

    for t in range(horizon):
        if ct is not None and ct[x1] + ct[x2] > ct[y1] + ct[y2] + 0.0:
            cost_v += 1
            if first_violation < 0:
                first_violation = t
        a1, a2, d1, d2 = _slot_primitives(t, lam, mu, exclusive, ua1, ud1, ua2, ud2)

        # controlled system: one full slot under the threshold policy
        xb1 = (x1 - d1 if x1 > d1 else 0) + a1
        xb2 = (x2 - d2 if x2 > d2 else 0) + a2
        bb1, mm1 = _propagate_support(base1, rel1, down, stay, up, z_stay, z_up)
        bb2, mm2 = _propagate_support(base2, rel2, down, stay, up, z_stay, z_up)
        ub1b = bb1 + mm1.bit_length() - 1
        ub2b = bb2 + mm2.bit_length() - 1
        lbb = bb1 if bb1 < bb2 else bb2
        ubb = ub1b if ub1b > ub2b else ub2b
        cut = (ubb + lbb + 1) // 2
        if cut < 1:
            cut = 1
        u1 = 1 if xb1 >= cut else 0
        u2 = 1 if xb2 >= cut else 0
        base1, rel1 = _condition_support(bb1, mm1, u1, cut)
        base1 += u2 - u1
        base2, rel2 = _condition_support(bb2, mm2, u2, cut)
        base2 += u1 - u2
        nx1 = xb1 - u1 + u2
        nx2 = xb2 - u2 + u1

        # shadow system: re-associate draws by longer/shorter queue
        if x1 >= x2:
            amx, dmx_, amn, dmn = a1, d1, a2, d2
        else:
            amx, dmx_, amn, dmn = a2, d2, a1, d1
        if y1 >= y2:
            ymax, ymin = y1, y2
        else:
            ymax, ymin = y2, y1
        swap = (
            ymax - 1 == x1 == x2
            and (
                (amx, dmx_, amn, dmn) == (0, 1, 1, 0)
                or (amx, dmx_, amn, dmn) == (0, 0, 1, 1)
            )
        )
        if swap:
            case1 += 1
            a_max, d_max, a_min, d_min = amx, dmn, amn, dmx_
        else:
            a_max, d_max, a_min, d_min = amx, dmx_, amn, dmn
        nymax = (ymax - d_max if ymax > d_max else 0) + a_max
        nymin = (ymin - d_min if ymin > d_min else 0) + a_min
        if y1 >= y2:
            y1, y2 = nymax, nymin
        else:
            y1, y2 = nymin, nymax

        x1, x2 = nx1, nx2
        if x1 + x2 > y1 + y2:
            sum_v += 1
            if first_violation < 0:
                first_violation = t
        if max(x1, x2) > max(y1, y2):
            max_v += 1
            if first_violation < 0:
                first_violation = t
        if si < len(snaps) and snaps[si] == t + 1:
            snap_out.append((y1, y2))
            si += 1

    if ct is not None and ct[x1] + ct[x2] > ct[y1] + ct[y2]:
        cost_v += 1
        if first_violation < 0:
            first_violation = horizon

    return {
        "x1": x1,
        "x2": x2,
        "y1": y1,
        "y2": y2,
        "case1": case1,
        "sum_violations": sum_v,
        "max_violations": max_v,
        "cost_violations": cost_v,
        "first_violation": first_violation,
        "snapshots": snap_out,
    }
