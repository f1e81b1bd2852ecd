"""Compiled inner loops: segment distance, the stepper, trajectory checks.

Everything in this module works on plain float64/int64/uint64 arrays so numba
can compile it once (on-disk cache) and the campaign workers can share the
compiled artifacts.  The random stream is a splitmix64 generator advanced in
a documented, fixed draw order; see README for the reproducibility contract.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


# ---------------------------------------------------------------------------
# deterministic RNG (splitmix64)
# ---------------------------------------------------------------------------

@njit(cache=True)
def rand_uniform(state):
    """Uniform double in [0, 1); advances state[0] (one draw)."""
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


# ---------------------------------------------------------------------------
# segment-segment distance (2-D, closed segments)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _pt_seg_dist(px, py, ax, ay, bx, by):
    abx = bx - ax
    aby = by - ay
    ab2 = abx * abx + aby * aby
    if ab2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * abx + (py - ay) * aby) / ab2
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return math.hypot(px - (ax + t * abx), py - (ay + t * aby))


@njit(cache=True)
def _orient_sure(px, py, qx, qy, rx, ry):
    """Orientation sign, or 0 when FP noise could flip it."""
    t1 = (qx - px) * (ry - py)
    t2 = (qy - py) * (rx - px)
    o = t1 - t2
    # conservative bound on rounding error of the two products and the
    # subtraction; anything inside is treated as degenerate
    bound = 1e-14 * (abs(t1) + abs(t2))
    if o > bound:
        return 1
    if o < -bound:
        return -1
    return 0


@njit(cache=True)
def seg_seg_dist(ax, ay, bx, by, cx, cy, dx, dy):
    """Minimum distance between closed segments AB and CD; 0 iff they meet.

    In the plane the minimum between non-crossing segments is attained at an
    endpoint, so four point-segment distances cover every case; a robust
    interior-crossing test catches the remaining zero-distance case.  When an
    orientation is too small to trust, the crossing shortcut is skipped; in
    that regime some endpoint lies on the other segment to within rounding,
    so the endpoint distances are still accurate.
    """
    o1 = _orient_sure(ax, ay, bx, by, cx, cy)
    o2 = _orient_sure(ax, ay, bx, by, dx, dy)
    o3 = _orient_sure(cx, cy, dx, dy, ax, ay)
    o4 = _orient_sure(cx, cy, dx, dy, bx, by)
    if o1 != 0 and o2 != 0 and o3 != 0 and o4 != 0:
        if o1 != o2 and o3 != o4:
            return 0.0
    d = _pt_seg_dist(ax, ay, cx, cy, dx, dy)
    d2 = _pt_seg_dist(bx, by, cx, cy, dx, dy)
    if d2 < d:
        d = d2
    d2 = _pt_seg_dist(cx, cy, ax, ay, bx, by)
    if d2 < d:
        d = d2
    d2 = _pt_seg_dist(dx, dy, ax, ay, bx, by)
    if d2 < d:
        d = d2
    return d


# ---------------------------------------------------------------------------
# beta-arm segment cache helpers
# ---------------------------------------------------------------------------

@njit(cache=True)
def _set_segment(i, xb, yb, alpha, beta, la, lb, ex, ey, fx, fy):
    ar = math.radians(alpha[i])
    abr = math.radians(alpha[i] + beta[i])
    ex[i] = xb[i] + la * math.cos(ar)
    ey[i] = yb[i] + la * math.sin(ar)
    fx[i] = ex[i] + lb * math.cos(abr)
    fy[i] = ey[i] + lb * math.sin(abr)


@njit(cache=True)
def all_segments(xb, yb, alpha, beta, la, lb):
    n = xb.shape[0]
    ex = np.empty(n)
    ey = np.empty(n)
    fx = np.empty(n)
    fy = np.empty(n)
    for i in range(n):
        _set_segment(i, xb, yb, alpha, beta, la, lb, ex, ey, fx, fy)
    return ex, ey, fx, fy


@njit(cache=True)
def robot_min_neighbor_dist(i, ex, ey, fx, fy, nbr_ptr, nbr_idx):
    """Min beta-arm distance from robot i to its neighbors (inf if none)."""
    best = np.inf
    for p in range(nbr_ptr[i], nbr_ptr[i + 1]):
        j = nbr_idx[p]
        d = seg_seg_dist(ex[i], ey[i], fx[i], fy[i], ex[j], ey[j], fx[j], fy[j])
        if d < best:
            best = d
    return best


@njit(cache=True)
def grid_min_pair_dist(ex, ey, fx, fy, nbr_ptr, nbr_idx):
    """Min beta-arm distance over all neighbor pairs (inf if no pairs)."""
    n = ex.shape[0]
    best = np.inf
    for i in range(n):
        for p in range(nbr_ptr[i], nbr_ptr[i + 1]):
            j = nbr_idx[p]
            if j <= i:
                continue
            d = seg_seg_dist(ex[i], ey[i], fx[i], fy[i], ex[j], ey[j], fx[j], fy[j])
            if d < best:
                best = d
    return best


@njit(cache=True)
def robot_energy(i, ex, ey, fx, fy, nbr_ptr, nbr_idx):
    """Sum of inverse-square neighbor distances (inf on contact)."""
    e = 0.0
    for p in range(nbr_ptr[i], nbr_ptr[i + 1]):
        j = nbr_idx[p]
        d = seg_seg_dist(ex[i], ey[i], fx[i], fy[i], ex[j], ey[j], fx[j], fy[j])
        if d == 0.0:
            return np.inf
        e += 1.0 / (d * d)
    return e


@njit(cache=True)
def draw_collides(i, cex, cey, cfx, cfy, ex, ey, fx, fy, active,
                  nbr_ptr, nbr_idx, cbuff):
    """Candidate segment for robot i against active neighbors (contact rule)."""
    thr = 2.0 * cbuff
    for p in range(nbr_ptr[i], nbr_ptr[i + 1]):
        j = nbr_idx[p]
        if not active[j]:
            continue
        if seg_seg_dist(cex, cey, cfx, cfy, ex[j], ey[j], fx[j], fy[j]) <= thr:
            return True
    return False


# ---------------------------------------------------------------------------
# the stepper
# ---------------------------------------------------------------------------

@njit(cache=True)
def _perturb_one(i, xb, yb, alpha, beta, a_dest, b_dest, ex, ey, fx, fy,
                 nbr_ptr, nbr_idx, la, lb, two_cbuff, encroach_thr,
                 step_deg, greed, phobia, state, pert, perm):
    """One stepwise move decision for robot i (updates pose and segment).

    A candidate is rejected when it would put some neighbor's arm within two
    buffer widths (envelope contact).  Per-step arm motion is far smaller
    than the envelope width at supported step sizes, so a step can never
    carry an arm through a contact undetected.

    Draw order per call: nothing while parked with clear neighbors; otherwise
    one metric draw, eight shuffle draws, then one acceptance draw per
    strictly-better candidate and one per tying candidate.
    """
    a0 = alpha[i]
    b0 = beta[i]
    da = a0 - a_dest[i]
    db = b0 - b_dest[i]
    if da == 0.0 and db == 0.0:
        # parked at destination: move only if a neighbor encroaches
        encroached = False
        for p in range(nbr_ptr[i], nbr_ptr[i + 1]):
            j = nbr_idx[p]
            d = seg_seg_dist(ex[i], ey[i], fx[i], fy[i],
                             ex[j], ey[j], fx[j], fy[j])
            if d <= encroach_thr:
                encroached = True
                break
        if not encroached:
            return

    minimize_energy = rand_uniform(state) < phobia

    for k in range(9):
        perm[k] = k
    for k in range(8, 0, -1):
        j = int(rand_uniform(state) * (k + 1))
        t = perm[k]
        perm[k] = perm[j]
        perm[j] = t

    best_a = a0
    best_b = b0
    best_score = 1e16
    for kk in range(9):
        pidx = perm[kk]
        na = a0 + pert[pidx, 0]
        nb = b0 + pert[pidx, 1]
        # travel limits [0, 360)
        if na < 0.0:
            na = 0.0
        elif na >= 360.0:
            na = 359.999
        if nb < 0.0:
            nb = 0.0
        elif nb >= 360.0:
            nb = 359.999
        # never overshoot the destination, per axis
        if a0 > a_dest[i] and na <= a_dest[i]:
            na = a_dest[i]
        if a0 < a_dest[i] and na >= a_dest[i]:
            na = a_dest[i]
        if b0 > b_dest[i] and nb <= b_dest[i]:
            nb = b_dest[i]
        if b0 < b_dest[i] and nb >= b_dest[i]:
            nb = b_dest[i]

        ar = math.radians(na)
        abr = math.radians(na + nb)
        cex = xb[i] + la * math.cos(ar)
        cey = yb[i] + la * math.sin(ar)
        cfx = cex + lb * math.cos(abr)
        cfy = cey + lb * math.sin(abr)

        collided = False
        energy = 0.0
        for p in range(nbr_ptr[i], nbr_ptr[i + 1]):
            j = nbr_idx[p]
            d = seg_seg_dist(cex, cey, cfx, cfy, ex[j], ey[j], fx[j], fy[j])
            if d <= two_cbuff:
                collided = True
                break
            if minimize_energy:
                energy += 1.0 / (d * d)
        if collided:
            continue

        if minimize_energy:
            score = energy
        else:
            score = math.hypot(na - a_dest[i], nb - b_dest[i])

        if score < best_score:
            if rand_uniform(state) < greed:
                best_a = na
                best_b = nb
                best_score = score
        elif score == best_score:
            if rand_uniform(state) < 0.5:
                best_a = na
                best_b = nb
                best_score = score

    if best_a != alpha[i] or best_b != beta[i]:
        alpha[i] = best_a
        beta[i] = best_b
        _set_segment(i, xb, yb, alpha, beta, la, lb, ex, ey, fx, fy)


@njit(cache=True)
def _all_converged(alpha, beta, a_dest, b_dest, offline):
    for i in range(alpha.shape[0]):
        if offline[i]:
            continue
        if alpha[i] != a_dest[i] or beta[i] != b_dest[i]:
            return False
    return True


@njit(cache=True)
def solve_kernel(xb, yb, alpha, beta, a_dest, b_dest, offline,
                 nbr_ptr, nbr_idx, la, lb, cbuff, step_deg, max_steps,
                 greed, phobia, seed, traj_alpha, traj_beta):
    """Sequential sweep stepper; robots see neighbors already moved this sweep.

    alpha/beta are advanced in place; the pose after every sweep is recorded
    into traj_alpha/traj_beta (preallocated (max_steps+1, n), row 0 = start).
    Returns (steps_used, converged).
    """
    n = xb.shape[0]
    state = np.empty(1, np.uint64)
    state[0] = np.uint64(seed)

    md = (la + lb) * math.sin(2.0 * math.radians(step_deg))
    two_cbuff = 2.0 * cbuff
    encroach_thr = 2.0 * cbuff + 3.0 * md

    ex, ey, fx, fy = all_segments(xb, yb, alpha, beta, la, lb)

    pert = np.empty((9, 2))
    k = 0
    for pa in (-1.0, 0.0, 1.0):
        for pb in (-1.0, 0.0, 1.0):
            pert[k, 0] = pa * step_deg
            pert[k, 1] = pb * step_deg
            k += 1
    perm = np.empty(9, np.int64)

    traj_alpha[0, :] = alpha
    traj_beta[0, :] = beta
    if _all_converged(alpha, beta, a_dest, b_dest, offline):
        return 0, True

    steps = 0
    converged = False
    for step in range(1, max_steps + 1):
        for i in range(n):
            if offline[i]:
                continue
            _perturb_one(i, xb, yb, alpha, beta, a_dest, b_dest,
                         ex, ey, fx, fy, nbr_ptr, nbr_idx, la, lb,
                         two_cbuff, encroach_thr, step_deg,
                         greed, phobia, state, pert, perm)
        traj_alpha[step, :] = alpha
        traj_beta[step, :] = beta
        steps = step
        if _all_converged(alpha, beta, a_dest, b_dest, offline):
            converged = True
            break
    return steps, converged


# ---------------------------------------------------------------------------
# trajectory checks
# ---------------------------------------------------------------------------

@njit(cache=True)
def recorded_min_pair_dist(xb, yb, nbr_ptr, nbr_idx, la, lb,
                           traj_alpha, traj_beta):
    """Per recorded sweep, the min neighbor-pair beta-arm distance."""
    n_steps = traj_alpha.shape[0]
    out = np.empty(n_steps)
    for s in range(n_steps):
        ex, ey, fx, fy = all_segments(xb, yb, traj_alpha[s], traj_beta[s],
                                      la, lb)
        out[s] = grid_min_pair_dist(ex, ey, fx, fy, nbr_ptr, nbr_idx)
    return out


@njit(cache=True)
def _interp_axis(t, times, vals, lo, hi, cursor):
    """Piecewise-linear sample at time t; clamps beyond the waypoint range.

    cursor is the last segment index used for this axis (monotone t only).
    """
    m = hi - lo
    if m == 1 or t <= times[lo]:
        return vals[lo], cursor
    if t >= times[hi - 1]:
        return vals[hi - 1], hi - lo - 2 if m > 1 else 0
    k = cursor
    if k < 0:
        k = 0
    while lo + k + 1 < hi and times[lo + k + 1] < t:
        k += 1
    t0 = times[lo + k]
    t1 = times[lo + k + 1]
    v0 = vals[lo + k]
    v1 = vals[lo + k + 1]
    if t1 == t0:
        return v1, k
    w = (t - t0) / (t1 - t0)
    return v0 + w * (v1 - v0), k


@njit(cache=True)
def verify_kernel(xb, yb, nbr_ptr, nbr_idx, la, lb,
                  at, av, a_ptr, bt, bv, b_ptr,
                  check_cbuff, dt, t_end,
                  out_i, out_j, out_t, out_d):
    """Resample all robots on a shared dt lattice and record close pairs.

    Waypoints are CSR-packed per robot: alpha axis in (at, av, a_ptr), beta
    in (bt, bv, b_ptr).  Pairs with distance <= 2*check_cbuff are written to
    the out arrays (up to their capacity); the full count is returned.
    """
    n = xb.shape[0]
    thr = 2.0 * check_cbuff
    n_lattice = int(math.ceil(t_end / dt)) + 1 if t_end > 0 else 1
    cap = out_i.shape[0]

    cur_a = np.zeros(n, np.int64)
    cur_b = np.zeros(n, np.int64)
    alpha = np.empty(n)
    beta = np.empty(n)

    count = 0
    for s in range(n_lattice + 1):
        t = s * dt
        if t > t_end:
            t = t_end
        for i in range(n):
            a, ka = _interp_axis(t, at, av, a_ptr[i], a_ptr[i + 1], cur_a[i])
            b, kb = _interp_axis(t, bt, bv, b_ptr[i], b_ptr[i + 1], cur_b[i])
            cur_a[i] = ka
            cur_b[i] = kb
            alpha[i] = a
            beta[i] = b
        ex, ey, fx, fy = all_segments(xb, yb, alpha, beta, la, lb)
        for i in range(n):
            for p in range(nbr_ptr[i], nbr_ptr[i + 1]):
                j = nbr_idx[p]
                if j <= i:
                    continue
                d = seg_seg_dist(ex[i], ey[i], fx[i], fy[i],
                                 ex[j], ey[j], fx[j], fy[j])
                if d <= thr:
                    if count < cap:
                        out_i[count] = i
                        out_j[count] = j
                        out_t[count] = t
                        out_d[count] = d
                    count += 1
        if t == t_end:
            break
    return count
