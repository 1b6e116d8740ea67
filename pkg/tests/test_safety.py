"""Braking criterion, action bounds, manoeuvre predicate and rescaling.

Oracles: hand-evaluated criterion cases, an independent bisection solve of
the safe-follow-speed inequality, a step-by-step worst-case rollout of the
discrete closed loop (extreme in-bounds action against a hard-braking
leader), and a dense K=100 reimplementation of the interpolated manoeuvre
check.
"""

import math

import numpy as np
import pytest

from optiondrive.road import default_road, lane_offsets
from optiondrive.safety import (INF, ActionBounds, BoundsInverted,
                                LaneNeighbours, SafetyParams, action_bounds,
                                action_bounds_multi, braking_criterion,
                                edge_clamp, manoeuvre_is_safe, pwl_rescale,
                                safe_follow_speed)

from conftest import V_LIMIT, make_probe

A_MAX = 3.0
P = SafetyParams()


def criterion_slack(gap, v_lead, v_follow, p):
    """Worst-case remaining distance above the safe gap (criterion > 0)."""
    if gap == INF:
        return INF
    worst = min(gap, gap + (v_lead * v_lead - v_follow * v_follow) / (2 * p.b))
    return worst - p.gap_safe


def follow_budget(v, gap, v_lead, p):
    """Stopping-distance budget left after the follower adopts speed v.

    Independent restatement of the reaction model: hold v for t_react plus
    half an Euler step, brake at b down to v_b = b / k_v, then decay
    exponentially (travel v_b / k_v); the leader contributes its own
    stopping distance v_lead^2 / 2b.
    """
    vb = p.b / p.k_v
    if v >= vb:
        brake = (v * v - vb * vb) / (2 * p.b) + vb / p.k_v
    else:
        brake = v / p.k_v
    travel = v * (p.t_react + 0.5 * p.dt) + brake
    return gap + v_lead * v_lead / (2 * p.b) - p.gap_safe - p.margin - travel


def bisect_safe_speed(gap, v_lead, p, hi=200.0, iters=80):
    """Largest v with non-negative budget, found by bisection."""
    if gap == INF:
        return INF
    if follow_budget(0.0, gap, v_lead, p) <= 0.0:
        return 0.0
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if follow_budget(mid, gap, v_lead, p) >= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def rollout_extreme(gap, v_lead, v_follow, p, n=600):
    """Minimum criterion slack when the follower always takes the extreme
    allowed action while the leader brakes at b throughout.

    Mirrors the simulator loop: the speed controller applies
    a = clip(k_v * dv, -b, a_max) toward the commanded reference and
    positions advance at the pre-update speeds (explicit Euler).
    """
    min_slack = INF
    for _ in range(n):
        min_slack = min(min_slack, criterion_slack(gap, v_lead, v_follow, p))
        if min_slack <= 0.0 or (v_lead == 0.0 and v_follow == 0.0):
            break
        b = action_bounds(v_follow, LaneNeighbours(lead_gap=gap, lead_v=v_lead),
                          None, None, 0.0, 0.0, 0.0, V_LIMIT, A_MAX, p)
        a = min(max(p.k_v * b.dv_hi, -p.b), A_MAX)
        gap += (v_lead - v_follow) * p.dt
        v_lead = max(0.0, v_lead - p.b * p.dt)
        v_follow = max(0.0, v_follow + a * p.dt)
    return min_slack


def dense_manoeuvre(v, d, v_t, d_t, bounds, probe, p, k=100):
    """Reference manoeuvre check with a dense interpolation grid."""
    tol = 1e-9
    if not (bounds.dv_lo - tol <= v_t - v <= bounds.dv_hi + tol):
        return False
    if not (bounds.dd_lo - tol <= d_t - d <= bounds.dd_hi + tol):
        return False
    for j in range(k):
        lam = j / (k - 1)
        v_j = v + lam * (v_t - v)
        d_j = d + lam * (d_t - d)
        for lane in probe(d_j):
            if not braking_criterion(lane.lead_gap, lane.lead_v, v_j, p):
                return False
            if not braking_criterion(lane.follow_gap, v_j, lane.follow_v, p):
                return False
    return True


def sample_manoeuvre_scene(road, rng):
    """Random scene plus a target drawn from the patterns options issue:
    velocity steps holding the lane, a full stop, and lane-centre changes."""
    table = {}
    for k in range(road.lane_count):
        if rng.random() < 0.75:
            kw = {}
            if rng.random() < 0.8:
                kw["lead_gap"] = float(rng.uniform(0.0, 120.0))
                kw["lead_v"] = float(rng.uniform(0.0, V_LIMIT))
            if rng.random() < 0.8:
                kw["follow_gap"] = float(rng.uniform(0.0, 120.0))
                kw["follow_v"] = float(rng.uniform(0.0, V_LIMIT))
            table[k] = LaneNeighbours(**kw)
    lane = int(rng.integers(0, road.lane_count))
    d = road.lane_center(lane) + float(rng.uniform(-0.6, 0.6))
    v = float(rng.uniform(0.0, V_LIMIT))
    off = lane_offsets(road, d)
    probe = make_probe(road, 1.8, table)
    left = (table.get(off.lane + 1, LaneNeighbours())
            if off.lane + 1 < road.lane_count else None)
    right = (table.get(off.lane - 1, LaneNeighbours())
             if off.lane - 1 >= 0 else None)
    bounds = action_bounds_multi(v, probe(d), left, right, off.c0,
                                 off.c_left_near, off.c_right_near,
                                 V_LIMIT, A_MAX, P)
    r = rng.random()
    if r < 0.3:
        v_t, d_t = v + float(rng.choice([-2.0, 2.0])), d + off.c0
    elif r < 0.45:
        v_t, d_t = 0.0, d
    elif r < 0.9:
        v_t = v + float(rng.uniform(-3.0, 3.0))
        d_t = d + float(rng.choice([off.c_left_near, off.c_right_near, off.c0]))
    else:
        v_t = v + float(rng.uniform(-8.0, 8.0))
        d_t = d + float(rng.uniform(-4.0, 4.0))
    return v, d, max(0.0, v_t), d_t, bounds, probe


def test_braking_criterion_hand_cases():
    """min(dx, dx + vL^2/2b - vF^2/2b) > 5 evaluated by hand."""
    # equal speeds: worst distance is the gap itself
    assert braking_criterion(50.0, 20.0, 20.0, P)
    # 50 + 400/12 - 900/12 = 50 - 125/3 = 25/3 = 8.33 > 5
    assert 50.0 + (400.0 - 900.0) / 12.0 == pytest.approx(25.0 / 3.0)
    assert braking_criterion(50.0, 20.0, 30.0, P)
    # 45 - 125/3 = 10/3 = 3.33 <= 5
    assert 45.0 + (400.0 - 900.0) / 12.0 == pytest.approx(10.0 / 3.0)
    assert not braking_criterion(45.0, 20.0, 30.0, P)
    # no leader
    assert braking_criterion(INF, 0.0, 36.0, P)
    # strict inequality at the boundary
    assert not braking_criterion(5.0, 10.0, 10.0, P)


def test_braking_criterion_monotone():
    """Larger gaps never hurt; faster followers never help."""
    rng = np.random.default_rng(3)
    for _ in range(200):
        gap = float(rng.uniform(0.0, 80.0))
        vl = float(rng.uniform(0.0, V_LIMIT))
        vf = float(rng.uniform(0.0, V_LIMIT))
        if braking_criterion(gap, vl, vf, P):
            assert braking_criterion(gap + 1.0, vl, vf, P)
            assert braking_criterion(gap, vl + 1.0, vf, P)
        else:
            assert not braking_criterion(gap, vl, vf + 1.0, P)
            assert not braking_criterion(gap - 1.0, vl, vf, P) or gap < 1.0


def test_safe_follow_speed_matches_bisection():
    """Closed-form solve equals the independent bisection oracle."""
    assert safe_follow_speed(INF, 0.0, P) == INF
    assert safe_follow_speed(5.0, 0.0, P) == 0.0   # budget <= 0: stand still
    rng = np.random.default_rng(11)
    for _ in range(400):
        gap = float(rng.uniform(0.0, 200.0))
        vl = float(rng.uniform(0.0, V_LIMIT))
        got = safe_follow_speed(gap, vl, P)
        want = bisect_safe_speed(gap, vl, P)
        assert got == pytest.approx(want, abs=1e-8), (gap, vl)
        if got > 0.0:
            # tight: any faster adoption breaks the reaction budget
            assert follow_budget(got, gap, vl, P) >= -1e-9
            assert follow_budget(got + 1e-3, gap, vl, P) < 0.0


def test_safe_follow_speed_linear_branch():
    """Small budgets land in the proportional-controller tail (v < b/k_v)."""
    got = safe_follow_speed(7.0, 0.0, P)           # budget C = 1.9
    assert 0.0 < got < P.b / P.k_v
    assert got == pytest.approx(1.9 / (P.t_react + 0.5 * P.dt + 1.0 / P.k_v))


def test_action_bounds_empty_road():
    """No neighbours: physical and legal caps only, both lane centres open."""
    b = action_bounds(20.0, LaneNeighbours(), LaneNeighbours(),
                      LaneNeighbours(), 0.0, 3.5, -3.5, V_LIMIT, A_MAX, P)
    assert b.dv_hi == pytest.approx(min(A_MAX * P.t_react, V_LIMIT - 20.0))
    assert b.dv_lo == pytest.approx(-min(20.0, P.b * P.t_react))
    assert b == ActionBounds(b.dv_lo, b.dv_hi, -3.5, 3.5)
    # near the legal limit the speed cap binds instead
    b = action_bounds(V_LIMIT - 1.0, LaneNeighbours(), None, None,
                      0.0, 0.0, 0.0, V_LIMIT, A_MAX, P)
    assert b.dv_hi == pytest.approx(1.0)


def test_action_bounds_leader_at_safe_gap_blocks_acceleration():
    """A leader parked at the minimum gap forbids any speed-up."""
    for v in (2.0, 10.0, 20.0, 36.0):
        lane = LaneNeighbours(lead_gap=P.gap_safe, lead_v=v)
        b = action_bounds(v, lane, None, None, 0.0, 0.0, 0.0,
                          V_LIMIT, A_MAX, P)
        assert b.dv_hi <= 0.0, v
        assert b.dv_lo <= b.dv_hi


def test_action_bounds_full_braking_above_cap():
    """Speeds above the safe-follow cap collapse the bounds to max braking.

    A proportional controller tracking the cap from above would only brake
    at k_v * (v - cap) and can ride the shrinking cap into a criterion
    violation, so the upper bound drops to the lower one.
    """
    lane = LaneNeighbours(lead_gap=20.0, lead_v=5.0)
    cap = safe_follow_speed(20.0, 5.0, P)
    assert cap < 25.0
    b = action_bounds(25.0, lane, None, None, 0.0, 0.0, 0.0,
                      V_LIMIT, A_MAX, P)
    assert b.dv_hi == b.dv_lo == -min(25.0, P.b * P.t_react)


def test_action_bounds_ordering_and_lateral_zero():
    """lo <= hi on both axes and staying put laterally is always allowed."""
    rng = np.random.default_rng(5)
    for _ in range(300):
        def lane():
            if rng.random() < 0.3:
                return LaneNeighbours()
            return LaneNeighbours(float(rng.uniform(0, 60)), float(rng.uniform(0, 36)),
                                  float(rng.uniform(0, 60)), float(rng.uniform(0, 36)))
        v = float(rng.uniform(0.0, V_LIMIT))
        c0 = float(rng.uniform(-1.0, 1.0))
        b = action_bounds_multi(v, (lane(), lane()), lane(), lane(),
                                c0, c0 + 3.5, c0 - 3.5, V_LIMIT, A_MAX, P)
        assert b.dv_lo <= b.dv_hi
        assert b.dv_lo == -min(v, P.b * P.t_react)
        assert b.dd_lo <= 0.0 <= b.dd_hi


def test_action_bounds_most_constraining_lane_wins():
    """When the body straddles two lanes the nearer leader governs dv."""
    tight = LaneNeighbours(lead_gap=12.0, lead_v=3.0)
    loose = LaneNeighbours(lead_gap=80.0, lead_v=30.0)
    v = 10.0
    both = action_bounds_multi(v, (loose, tight), None, None, 0.0, 0.0, 0.0,
                               V_LIMIT, A_MAX, P)
    only_tight = action_bounds_multi(v, (tight,), None, None, 0.0, 0.0, 0.0,
                                     V_LIMIT, A_MAX, P)
    assert both.dv_hi == only_tight.dv_hi


def test_action_bounds_unsafe_side_collapses():
    """Adjacent lanes failing the criterion close their lateral direction."""
    fast_follower = LaneNeighbours(follow_gap=6.0, follow_v=30.0)
    close_leader = LaneNeighbours(lead_gap=3.0, lead_v=10.0)
    v = 20.0
    b = action_bounds(v, LaneNeighbours(), fast_follower, close_leader,
                      0.0, 3.5, -3.5, V_LIMIT, A_MAX, P)
    assert b.dd_hi == 0.0 and b.dd_lo == 0.0
    # off-centre ego: recentering stays allowed even when the side is shut
    b = action_bounds(v, LaneNeighbours(), fast_follower, close_leader,
                      -0.5, 3.0, -4.0, V_LIMIT, A_MAX, P)
    assert b.dd_hi == 0.0          # own-lane offset points the wrong way
    assert b.dd_lo == -0.5         # may still recenter
    # a missing lane (road edge) behaves like an unsafe one
    b = action_bounds(v, LaneNeighbours(), None, None, 0.3, 3.8, -3.2,
                      V_LIMIT, A_MAX, P)
    assert b.dd_hi == 0.3 and b.dd_lo == 0.0


def test_extreme_action_rollout_never_violates_criterion():
    """Worst-case closed loop: extreme allowed action every step while the
    leader brakes to a stop never drives the criterion to zero."""
    rng = np.random.default_rng(7)
    worst = INF
    for _ in range(2000):
        vl = float(rng.uniform(0.0, V_LIMIT))
        gap = P.gap_safe + P.margin + float(rng.uniform(0.0, 1.0)) ** 2 * 150.0
        cap = safe_follow_speed(gap, vl, P)
        vf = min(float(rng.uniform(0.0, V_LIMIT)), cap)
        worst = min(worst, rollout_extreme(gap, vl, vf, P))
        assert worst > 0.0, (gap, vl, vf)
    # the designed floor: a standstill pair at the minimum spacing keeps
    # exactly the additive margin
    assert rollout_extreme(P.gap_safe + P.margin, 0.0, 0.0, P) == \
        pytest.approx(P.margin)


def test_manoeuvre_trivial_cases(road):
    """Maintain on an empty road is safe; a car 3 m ahead in the target
    lane, or a target outside the bounds, is not."""
    d = road.lane_center(0)
    empty = make_probe(road, 1.8, {})
    bounds = ActionBounds(-6.0, 3.0, -3.5, 3.5)
    assert manoeuvre_is_safe(20.0, d, 20.0, d, bounds, empty, P)
    blocked = make_probe(road, 1.8, {1: LaneNeighbours(lead_gap=3.0, lead_v=20.0)})
    assert not manoeuvre_is_safe(20.0, d, 20.0, d + 3.5, bounds, blocked, P)
    assert not manoeuvre_is_safe(20.0, d, 20.0, d + 3.6, bounds, empty, P)
    assert not manoeuvre_is_safe(20.0, d, 24.0, d, bounds, empty, P)


def test_manoeuvre_interpolation_clause_bites(road):
    """A combined speed-up + lane change can fail only through the
    interpolated states even though both bounds admit the deltas.

    Left-lane leader (gap 40, v 10): safe against v=20 (slack 15 - 5) but
    not against v=23 (40 - 429/12 = 4.25 <= 5), so the endpoint state of
    the interpolation rejects the manoeuvre.
    """
    d = road.lane_center(0)
    table = {1: LaneNeighbours(lead_gap=40.0, lead_v=10.0)}
    probe = make_probe(road, 1.8, table)
    off = lane_offsets(road, d)
    bounds = action_bounds_multi(20.0, probe(d), table[1], None, off.c0,
                                 off.c_left_near, off.c_right_near,
                                 V_LIMIT, A_MAX, P)
    assert bounds.dv_hi == pytest.approx(3.0)
    assert bounds.dd_hi == pytest.approx(3.5)
    assert manoeuvre_is_safe(20.0, d, 20.0, d + 3.5, bounds, probe, P)
    assert not manoeuvre_is_safe(20.0, d, 23.0, d + 3.5, bounds, probe, P)


def test_manoeuvre_agrees_with_dense_interpolation(road):
    """K=5 interpolation agrees with a dense K=100 oracle on 10^4 random
    scenes; any disagreement may only be conservative (ours false)."""
    rng = np.random.default_rng(20260815)
    conservative = bad = 0
    for _ in range(10_000):
        v, d, v_t, d_t, bounds, probe = sample_manoeuvre_scene(road, rng)
        ours = manoeuvre_is_safe(v, d, v_t, d_t, bounds, probe, P)
        dense = dense_manoeuvre(v, d, v_t, d_t, bounds, probe, P)
        if ours and not dense:
            bad += 1
        elif dense and not ours:
            conservative += 1
    assert bad == 0
    assert conservative <= 10          # <= 0.1% and one-sided


def test_pwl_rescale_examples():
    """Two linear segments through (-1, lo), (0, clamped zero), (1, hi)."""
    assert pwl_rescale(-1.0, -2.0, 3.0) == -2.0
    assert pwl_rescale(1.0, -2.0, 3.0) == 3.0
    assert pwl_rescale(0.0, -2.0, 3.0) == 0.0
    assert pwl_rescale(0.5, -2.0, 3.0) == pytest.approx(1.5)
    assert pwl_rescale(-0.5, -2.0, 3.0) == pytest.approx(-1.0)
    # knee clamps to the nearest bound when zero is outside [lo, hi]
    assert pwl_rescale(0.0, 1.0, 3.0) == 1.0
    assert pwl_rescale(0.0, -3.0, -1.0) == -1.0
    assert pwl_rescale(0.5, 1.0, 3.0) == pytest.approx(2.0)


def test_pwl_rescale_properties():
    """Monotone, onto [lo, hi], identity on [-1, 1], clamps its input."""
    rng = np.random.default_rng(13)
    for _ in range(100):
        lo = float(rng.uniform(-8.0, 8.0))
        hi = lo + float(rng.uniform(0.0, 10.0))
        us = np.linspace(-1.0, 1.0, 41)
        ys = [pwl_rescale(float(u), lo, hi) for u in us]
        assert ys[0] == lo and ys[-1] == hi
        assert all(a <= b + 1e-12 for a, b in zip(ys, ys[1:]))
        assert all(lo <= y <= hi for y in ys)
    for u in (-1.0, -0.3, 0.0, 0.7, 1.0):
        assert pwl_rescale(u, -1.0, 1.0) == pytest.approx(u)
    assert pwl_rescale(5.0, -2.0, 3.0) == 3.0
    assert pwl_rescale(-5.0, -2.0, 3.0) == -2.0
    assert pwl_rescale(0.7, 2.0, 2.0) == 2.0
    with pytest.raises(BoundsInverted):
        pwl_rescale(0.0, 1.0, -1.0)


def test_edge_clamp_forces_inward_inside_keepout_band():
    """Inside the keep-out band the only admissible lateral moves point back
    onto the road; outside it the bounds pass through untouched."""
    b = ActionBounds(-6.0, 1.0, -0.5, 3.5)
    # interior: identity (same object, no re-allocation)
    assert edge_clamp(b, 5.25, 1.5, 9.0) is b
    assert edge_clamp(b, 1.5, 1.5, 9.0) is b
    # right edge: d = 1.2 in a band starting at 1.5 -> must move >= +0.3
    r = edge_clamp(b, 1.2, 1.5, 9.0)
    assert r.dd_lo == pytest.approx(0.3) and r.dd_hi == 3.5
    assert r.dv_lo == -6.0 and r.dv_hi == 1.0
    assert r.clip(0.0, 0.0) == (0.0, pytest.approx(0.3))
    # left edge: d = 9.3 above 9.0 -> must move <= -0.3
    lft = edge_clamp(ActionBounds(-6.0, 1.0, -0.5, 3.5), 9.3, 1.5, 9.0)
    assert lft.dd_hi == pytest.approx(-0.3) and lft.dd_lo == -0.5
    assert lft.clip(0.0, 0.0) == (0.0, pytest.approx(-0.3))
    # a collapsed lateral interval is pushed whole, never inverted
    z = edge_clamp(ActionBounds(-6.0, -6.0, 0.0, 0.0), 1.2, 1.5, 9.0)
    assert z.dd_lo == pytest.approx(0.3) and z.dd_hi == pytest.approx(0.3)
    zl = edge_clamp(ActionBounds(-6.0, -6.0, 0.0, 0.0), 9.3, 1.5, 9.0)
    assert zl.dd_hi == pytest.approx(-0.3) and zl.dd_lo == pytest.approx(-0.3)
    assert zl.dd_lo <= zl.dd_hi
