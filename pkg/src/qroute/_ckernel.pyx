# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-slot simulation kernels.

Line-for-line mirror of ``qroute._kernel_py``: same draw order, same integer
logic, same float accumulation order, so results are bit-identical across
backends.  See the pure module for the algorithm commentary.
"""

import numpy as np

from .errors import InvariantViolationError

cdef extern from *:
    int __builtin_clzll(unsigned long long)
    int __builtin_ctzll(unsigned long long)

DEF WIDTH_LIMIT = 60

cdef inline int _bitlen(unsigned long long x) nogil:
    if x == 0:
        return 0
    return 64 - __builtin_clzll(x)


cdef inline int _imin(int a, int b) nogil:
    return a if a < b else b


cdef inline int _imax(int a, int b) nogil:
    return a if a > b else b


cdef struct Support:
    long base
    unsigned long long rel


cdef struct Flags:
    bint down
    bint stay
    bint up
    bint z_stay
    bint z_up


cdef Flags _support_flags(double lam, double mu, bint exclusive):
    cdef double k00, k01, k10, k11
    cdef Flags f
    if exclusive:
        k00 = 1.0 - lam - mu
        k01 = mu
        k10 = lam
        k11 = 0.0
    else:
        k00 = (1.0 - lam) * (1.0 - mu)
        k01 = (1.0 - lam) * mu
        k10 = lam * (1.0 - mu)
        k11 = lam * mu
    f.down = k01 > 0.0
    f.stay = (k00 + k11) > 0.0
    f.up = k10 > 0.0
    f.z_stay = (k00 + k01) > 0.0
    f.z_up = (k10 + k11) > 0.0
    return f


cdef inline int _normalize(Support* s) except -1:
    cdef int tz
    if s.rel == 0:
        raise InvariantViolationError("support became empty")
    tz = __builtin_ctzll(s.rel)
    s.base += tz
    s.rel >>= tz
    return 0


cdef inline int _propagate_support(Support* s, Flags f) except -1:
    cdef unsigned long long body, out
    cdef bint zero
    if s.base == 0:
        body = s.rel & ~(<unsigned long long>1)
        zero = s.rel & 1
    else:
        body = s.rel
        zero = 0
    out = 0
    if body:
        if f.down:
            out |= body
        if f.stay:
            out |= body << 1
        if f.up:
            out |= body << 2
    if zero:
        if f.z_stay:
            out |= 2
        if f.z_up:
            out |= 4
    s.base -= 1
    s.rel = out
    _normalize(s)
    if _bitlen(s.rel) > WIDTH_LIMIT:
        raise InvariantViolationError(
            f"support width {_bitlen(s.rel)} exceeds kernel limit {WIDTH_LIMIT}"
        )
    return 0


cdef inline int _condition_support(Support* s, int u, long cut) except -1:
    cdef long drop, keep
    if u:
        drop = cut - s.base
        if drop > 0:
            s.rel &= ~(((<unsigned long long>1) << drop) - 1)
            if s.rel == 0:
                raise InvariantViolationError("routing event support is empty")
            _normalize(s)
        return 0
    keep = cut - s.base
    if keep <= 0:
        raise InvariantViolationError("hold event support is empty")
    if keep < _bitlen(s.rel):
        s.rel &= (((<unsigned long long>1) << keep) - 1)
    return 0


def ghat_path(
    long x1,
    long x2,
    long base1,
    object rel1_obj,
    long base2,
    object rel2_obj,
    double lam,
    double mu,
    int exclusive,
    long horizon,
    ua1,
    ud1,
    ua2,
    ud2,
    cost_table=None,
    checkpoints=None,
    record=False,
):
    cdef double[::1] u_a1 = np.ascontiguousarray(ua1, dtype=np.float64)
    cdef double[::1] u_d1 = np.ascontiguousarray(ud1, dtype=np.float64)
    cdef double[::1] u_a2 = np.ascontiguousarray(ua2, dtype=np.float64)
    cdef double[::1] u_d2 = np.ascontiguousarray(ud2, dtype=np.float64)
    cdef bint has_cost = cost_table is not None
    cdef double[::1] ct = (
        np.ascontiguousarray(cost_table, dtype=np.float64)
        if has_cost
        else np.zeros(1)
    )
    cdef long long[::1] cps = (
        np.ascontiguousarray(checkpoints, dtype=np.int64)
        if checkpoints is not None
        else np.zeros(0, dtype=np.int64)
    )
    cdef bint rec = bool(record)

    cdef Support s1, s2, b1, b2
    s1.base = base1
    s1.rel = <unsigned long long>rel1_obj
    s2.base = base2
    s2.rel = <unsigned long long>rel2_obj
    cdef Flags f = _support_flags(lam, mu, exclusive)
    cdef double lam_mu = lam + mu

    cdef long ub = _imax(
        s1.base + _bitlen(s1.rel) - 1, s2.base + _bitlen(s2.rel) - 1
    )
    cdef long lb = _imin(s1.base, s2.base)
    cdef long prev_gap = ub - lb
    cdef long t0 = 0 if prev_gap <= 1 else -1
    cdef long s_track = -1

    cdef double cost_total = 0.0
    avgs = []
    cdef Py_ssize_t ci = 0
    cdef long truth_v = 0, lemma_v = 0, halving_v = 0, noninc_v = 0
    cdef long bumps = 0, post_t0_v = 0, balance_v = 0, s_mismatch = 0, n00 = 0
    if t0 == 0 and (x1 - x2 > 1 or x2 - x1 > 1):
        balance_v += 1

    cdef long long[::1] r_x1, r_x2, r_xb1, r_xb2, r_u1, r_u2
    cdef long long[::1] r_a1, r_a2, r_d1, r_d2, r_lb, r_ub, r_th2
    rec_arrays = None
    if rec:
        rec_arrays = {
            k: np.empty(horizon, dtype=np.int64)
            for k in (
                "x1", "x2", "xbar1", "xbar2", "u1", "u2",
                "a1", "a2", "d1", "d2", "lb", "ub", "th2",
            )
        }
        r_x1 = rec_arrays["x1"]
        r_x2 = rec_arrays["x2"]
        r_xb1 = rec_arrays["xbar1"]
        r_xb2 = rec_arrays["xbar2"]
        r_u1 = rec_arrays["u1"]
        r_u2 = rec_arrays["u2"]
        r_a1 = rec_arrays["a1"]
        r_a2 = rec_arrays["a2"]
        r_d1 = rec_arrays["d1"]
        r_d2 = rec_arrays["d2"]
        r_lb = rec_arrays["lb"]
        r_ub = rec_arrays["ub"]
        r_th2 = rec_arrays["th2"]

    cdef long t, a1, a2, d1, d2, xb1, xb2, u1, u2, nx1, nx2
    cdef long ub1b, ub2b, lbb, ubb, cth, cut, rlb, rub, gap, s_next
    cdef long ub1n, ub2n, diff
    cdef double u_val1, u_val2

    for t in range(horizon):
        if has_cost:
            cost_total += ct[x1] + ct[x2]
        if ci < cps.shape[0] and t + 1 == cps[ci]:
            avgs.append(cost_total / (t + 1))
            ci += 1

        if exclusive:
            u_val1 = u_a1[t]
            u_val2 = u_a2[t]
            a1 = 1 if u_val1 < lam else 0
            d1 = 1 if (a1 == 0 and u_val1 < lam_mu) else 0
            a2 = 1 if u_val2 < lam else 0
            d2 = 1 if (a2 == 0 and u_val2 < lam_mu) else 0
        else:
            a1 = 1 if u_a1[t] < lam else 0
            a2 = 1 if u_a2[t] < lam else 0
            d1 = 1 if u_d1[t] < mu else 0
            d2 = 1 if u_d2[t] < mu else 0

        xb1 = (x1 - d1 if x1 > d1 else 0) + a1
        xb2 = (x2 - d2 if x2 > d2 else 0) + a2

        b1 = s1
        b2 = s2
        _propagate_support(&b1, f)
        _propagate_support(&b2, f)
        ub1b = b1.base + _bitlen(b1.rel) - 1
        ub2b = b2.base + _bitlen(b2.rel) - 1
        lbb = _imin(b1.base, b2.base)
        ubb = _imax(ub1b, ub2b)
        cth = (ubb + lbb + 1) >> 1
        cut = cth if cth > 1 else 1
        u1 = 1 if xb1 >= cut else 0
        u2 = 1 if xb2 >= cut else 0

        if not (b1.base <= xb1 <= ub1b and b2.base <= xb2 <= ub2b):
            truth_v += 1

        if u1 == 0 and u2 == 0:
            rlb = lbb
            rub = cth - 1
        elif u1 == 1 and u2 == 1:
            rlb = cth
            rub = ubb
        elif u1 == 1:
            rlb = b2.base + 1 if b2.base + 1 < cth - 1 else cth - 1
            rub = ub1b - 1 if ub1b - 1 > cth else cth
        else:
            rlb = b1.base + 1 if b1.base + 1 < cth - 1 else cth - 1
            rub = ub2b - 1 if ub2b - 1 > cth else cth

        s1 = b1
        _condition_support(&s1, u1, cut)
        s1.base += u2 - u1
        s2 = b2
        _condition_support(&s2, u2, cut)
        s2.base += u1 - u2

        nx1 = xb1 - u1 + u2
        nx2 = xb2 - u2 + u1

        ub1n = s1.base + _bitlen(s1.rel) - 1
        ub2n = s2.base + _bitlen(s2.rel) - 1
        lb = _imin(s1.base, s2.base)
        ub = _imax(ub1n, ub2n)
        gap = ub - lb

        if cth >= 1 and (rlb > lb or rub < ub):
            lemma_v += 1
        if u1 == 0 and u2 == 0:
            n00 += 1
            if gap > (prev_gap + 1) >> 1:
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

        diff = nx1 - nx2 if nx1 > nx2 else nx2 - nx1
        if t0 >= 0 and t + 1 >= t0 and diff > 1:
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

        if rec:
            r_x1[t] = x1
            r_x2[t] = x2
            r_xb1[t] = xb1
            r_xb2[t] = xb2
            r_u1[t] = u1
            r_u2[t] = u2
            r_a1[t] = a1
            r_a2[t] = a2
            r_d1[t] = d1
            r_d2[t] = d2
            r_lb[t] = lbb
            r_ub[t] = ubb
            r_th2[t] = ubb + lbb

        x1 = nx1
        x2 = nx2
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
    if rec:
        out["trace"] = rec_arrays
    return out


def g0_pair_path(
    long x1,
    long x2,
    double lam,
    double mu,
    int exclusive,
    long horizon,
    ua1,
    ud1,
    ua2,
    ud2,
    cost_table=None,
    checkpoints=None,
    snapshot_ts=None,
):
    cdef double[::1] u_a1 = np.ascontiguousarray(ua1, dtype=np.float64)
    cdef double[::1] u_d1 = np.ascontiguousarray(ud1, dtype=np.float64)
    cdef double[::1] u_a2 = np.ascontiguousarray(ua2, dtype=np.float64)
    cdef double[::1] u_d2 = np.ascontiguousarray(ud2, dtype=np.float64)
    cdef bint has_cost = cost_table is not None
    cdef double[::1] ct = (
        np.ascontiguousarray(cost_table, dtype=np.float64)
        if has_cost
        else np.zeros(1)
    )
    cdef long long[::1] cps = (
        np.ascontiguousarray(checkpoints, dtype=np.int64)
        if checkpoints is not None
        else np.zeros(0, dtype=np.int64)
    )
    cdef long long[::1] snaps = (
        np.ascontiguousarray(snapshot_ts, dtype=np.int64)
        if snapshot_ts is not None
        else np.zeros(0, dtype=np.int64)
    )
    snap_out = []
    cdef Py_ssize_t si = 0, ci = 0
    if si < snaps.shape[0] and snaps[si] == 0:
        snap_out.append((x1, x2))
        si += 1
    cdef double cost_total = 0.0
    avgs = []
    cdef long t, a1, a2, d1, d2
    cdef double lam_mu = lam + mu
    cdef double u_val1, u_val2
    for t in range(horizon):
        if has_cost:
            cost_total += ct[x1] + ct[x2]
        if ci < cps.shape[0] and t + 1 == cps[ci]:
            avgs.append(cost_total / (t + 1))
            ci += 1
        if exclusive:
            u_val1 = u_a1[t]
            u_val2 = u_a2[t]
            a1 = 1 if u_val1 < lam else 0
            d1 = 1 if (a1 == 0 and u_val1 < lam_mu) else 0
            a2 = 1 if u_val2 < lam else 0
            d2 = 1 if (a2 == 0 and u_val2 < lam_mu) else 0
        else:
            a1 = 1 if u_a1[t] < lam else 0
            a2 = 1 if u_a2[t] < lam else 0
            d1 = 1 if u_d1[t] < mu else 0
            d2 = 1 if u_d2[t] < mu else 0
        x1 = (x1 - d1 if x1 > d1 else 0) + a1
        x2 = (x2 - d2 if x2 > d2 else 0) + a2
        if si < snaps.shape[0] and snaps[si] == t + 1:
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
    long x1,
    long x2,
    long base1,
    object rel1_obj,
    long base2,
    object rel2_obj,
    double lam,
    double mu,
    int exclusive,
    long horizon,
    ua1,
    ud1,
    ua2,
    ud2,
    cost_table=None,
    snapshot_ts=None,
):
    cdef double[::1] u_a1 = np.ascontiguousarray(ua1, dtype=np.float64)
    cdef double[::1] u_d1 = np.ascontiguousarray(ud1, dtype=np.float64)
    cdef double[::1] u_a2 = np.ascontiguousarray(ua2, dtype=np.float64)
    cdef double[::1] u_d2 = np.ascontiguousarray(ud2, dtype=np.float64)
    cdef bint has_cost = cost_table is not None
    cdef double[::1] ct = (
        np.ascontiguousarray(cost_table, dtype=np.float64)
        if has_cost
        else np.zeros(1)
    )
    cdef long long[::1] snaps = (
        np.ascontiguousarray(snapshot_ts, dtype=np.int64)
        if snapshot_ts is not None
        else np.zeros(0, dtype=np.int64)
    )
    cdef Support s1, s2, b1, b2
    s1.base = base1
    s1.rel = <unsigned long long>rel1_obj
    s2.base = base2
    s2.rel = <unsigned long long>rel2_obj
    cdef Flags f = _support_flags(lam, mu, exclusive)
    cdef double lam_mu = lam + mu

    cdef long y1 = x1, y2 = x2
    snap_out = []
    cdef Py_ssize_t si = 0
    if si < snaps.shape[0] and snaps[si] == 0:
        snap_out.append((y1, y2))
        si += 1
    cdef long case1 = 0, sum_v = 0, max_v = 0, cost_v = 0
    cdef long first_violation = -1

    cdef long t, a1, a2, d1, d2, xb1, xb2, u1, u2, nx1, nx2
    cdef long ub1b, ub2b, lbb, ubb, cut
    cdef long amx, dmx_, amn, dmn, ymax, ymin, nymax, nymin
    cdef long a_max, d_max, a_min, d_min
    cdef bint swap
    cdef double u_val1, u_val2

    for t in range(horizon):
        if has_cost and ct[x1] + ct[x2] > ct[y1] + ct[y2]:
            cost_v += 1
            if first_violation < 0:
                first_violation = t
        if exclusive:
            u_val1 = u_a1[t]
            u_val2 = u_a2[t]
            a1 = 1 if u_val1 < lam else 0
            d1 = 1 if (a1 == 0 and u_val1 < lam_mu) else 0
            a2 = 1 if u_val2 < lam else 0
            d2 = 1 if (a2 == 0 and u_val2 < lam_mu) else 0
        else:
            a1 = 1 if u_a1[t] < lam else 0
            a2 = 1 if u_a2[t] < lam else 0
            d1 = 1 if u_d1[t] < mu else 0
            d2 = 1 if u_d2[t] < mu else 0

        xb1 = (x1 - d1 if x1 > d1 else 0) + a1
        xb2 = (x2 - d2 if x2 > d2 else 0) + a2
        b1 = s1
        b2 = s2
        _propagate_support(&b1, f)
        _propagate_support(&b2, f)
        ub1b = b1.base + _bitlen(b1.rel) - 1
        ub2b = b2.base + _bitlen(b2.rel) - 1
        lbb = _imin(b1.base, b2.base)
        ubb = _imax(ub1b, ub2b)
        cut = (ubb + lbb + 1) >> 1
        if cut < 1:
            cut = 1
        u1 = 1 if xb1 >= cut else 0
        u2 = 1 if xb2 >= cut else 0
        s1 = b1
        _condition_support(&s1, u1, cut)
        s1.base += u2 - u1
        s2 = b2
        _condition_support(&s2, u2, cut)
        s2.base += u1 - u2
        nx1 = xb1 - u1 + u2
        nx2 = xb2 - u2 + u1

        if x1 >= x2:
            amx = a1
            dmx_ = d1
            amn = a2
            dmn = d2
        else:
            amx = a2
            dmx_ = d2
            amn = a1
            dmn = d1
        if y1 >= y2:
            ymax = y1
            ymin = y2
        else:
            ymax = y2
            ymin = y1
        swap = (
            ymax - 1 == x1
            and x1 == x2
            and (
                (amx == 0 and dmx_ == 1 and amn == 1 and dmn == 0)
                or (amx == 0 and dmx_ == 0 and amn == 1 and dmn == 1)
            )
        )
        if swap:
            case1 += 1
            a_max = amx
            d_max = dmn
            a_min = amn
            d_min = dmx_
        else:
            a_max = amx
            d_max = dmx_
            a_min = amn
            d_min = dmn
        nymax = (ymax - d_max if ymax > d_max else 0) + a_max
        nymin = (ymin - d_min if ymin > d_min else 0) + a_min
        if y1 >= y2:
            y1 = nymax
            y2 = nymin
        else:
            y1 = nymin
            y2 = nymax

        x1 = nx1
        x2 = nx2
        if x1 + x2 > y1 + y2:
            sum_v += 1
            if first_violation < 0:
                first_violation = t
        if (x1 if x1 > x2 else x2) > (y1 if y1 > y2 else y2):
            max_v += 1
            if first_violation < 0:
                first_violation = t
        if si < snaps.shape[0] and snaps[si] == t + 1:
            snap_out.append((y1, y2))
            si += 1

    if has_cost and ct[x1] + ct[x2] > ct[y1] + ct[y2]:
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
