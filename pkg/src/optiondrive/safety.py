"""Worst-case braking safety: criterion, action bounds and manoeuvre checks.

The central predicate compares the gap between a follower and its leader with
what remains after both brake to a standstill at the common limit ``b``:

    min(gap, gap + v_lead^2/(2b) - v_follow^2/(2b)) > gap_safe

A follower obeying it can always stop without closing below ``gap_safe``
when the leader brakes as hard as physics allows.  On top of the criterion
this module derives per-step bounds on the relative references (dv, dd): the
velocity upper bound is the largest speed the follower may adopt such that
the criterion still holds when the leader starts braking now and the
follower reacts only after ``t_react`` seconds, including the actual
controller's exponential tail below ``b/k_v`` and the Euler discretisation
bias.  Lateral bounds stop references toward adjacent lanes whose
leader/follower pair fails the criterion at the current speed.

``manoeuvre_is_safe`` extends the point check to a straight-line
interpolation between the current and target (speed, lateral) pair, probing
the neighbours of every lane the interpolated positions touch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

INF = math.inf


class BoundsInverted(Exception):
    """Rescale interval has lower bound above upper bound."""


@dataclass(frozen=True)
class SafetyParams:
    b: float = 6.0            # assumed common braking limit [m/s^2]
    gap_safe: float = 5.0     # minimum standstill gap [m], >= vehicle length
    k_interp: int = 5         # interpolated states per manoeuvre check
    t_react: float = 1.0      # worst-case follower reaction horizon [s]
    margin: float = 0.1       # additive slack on the standstill gap [m]
    k_v: float = 1.0          # speed-controller gain, fixes the braking tail
    dt: float = 0.1           # simulation step, fixes discretisation bias
    edge_margin: float = 0.5  # keep-out band inside each road boundary [m]


@dataclass(frozen=True)
class ActionBounds:
    dv_lo: float
    dv_hi: float
    dd_lo: float
    dd_hi: float

    def clip(self, dv: float, dd: float) -> tuple[float, float]:
        return (min(max(dv, self.dv_lo), self.dv_hi),
                min(max(dd, self.dd_lo), self.dd_hi))


@dataclass(frozen=True)
class LaneNeighbours:
    """Bumper gaps and speeds of the nearest vehicles in one lane.

    Gaps are non-negative bumper-to-bumper distances; absent neighbours carry
    infinite gap (their speed is then irrelevant).
    """

    lead_gap: float = INF
    lead_v: float = 0.0
    follow_gap: float = INF
    follow_v: float = 0.0


# Maps a hypothetical lateral position to the neighbours of every lane the
# vehicle body would touch there.
NeighbourProbe = Callable[[float], Iterable[LaneNeighbours]]


def braking_criterion(gap: float, v_lead: float, v_follow: float,
                      p: SafetyParams) -> bool:
    """True when the follower can stop behind a hard-braking leader."""
    if gap == INF:
        return True
    worst = min(gap, gap + (v_lead * v_lead - v_follow * v_follow) / (2.0 * p.b))
    return worst > p.gap_safe


def _follow_travel(v: float, p: SafetyParams) -> float:
    """Worst-case distance covered by a follower that adopts speed ``v`` now.

    The follower holds ``v`` for ``t_react`` (plus half a step of Euler
    bias), then brakes at ``b`` until the proportional speed controller's
    linear region takes over below v_b = b / k_v, whose exponential decay
    covers a further v_b / k_v metres.
    """
    vb = p.b / p.k_v
    if v >= vb:
        brake = (v * v - vb * vb) / (2.0 * p.b) + vb / p.k_v
    else:
        brake = v / p.k_v
    return v * (p.t_react + 0.5 * p.dt) + brake


def safe_follow_speed(gap: float, v_lead: float, p: SafetyParams) -> float:
    """Largest speed the follower may adopt behind (gap, v_lead).

    Solves  gap + v_lead^2/(2b) - _follow_travel(v) >= gap_safe + margin
    for v; the budget C collects every term independent of v.
    """
    if gap == INF:
        return INF
    C = gap + v_lead * v_lead / (2.0 * p.b) - p.gap_safe - p.margin
    if C <= 0.0:
        return 0.0
    T = p.t_react + 0.5 * p.dt
    vb = p.b / p.k_v
    disc = p.b * p.b * T * T + 2.0 * p.b * (C - vb / p.k_v + vb * vb / (2.0 * p.b))
    if disc >= 0.0:
        v1 = -p.b * T + math.sqrt(disc)
        if v1 >= vb:
            return v1
    return min(C / (T + 1.0 / p.k_v), vb)


def action_bounds(v: float, lane_here: LaneNeighbours,
                  lane_left: LaneNeighbours | None,
                  lane_right: LaneNeighbours | None,
                  c0: float, c_left_near: float, c_right_near: float,
                  v_limit: float, a_max: float, p: SafetyParams) -> ActionBounds:
    """Per-step bounds on the relative references (single current lane)."""
    return action_bounds_multi(v, (lane_here,), lane_left, lane_right, c0,
                               c_left_near, c_right_near, v_limit, a_max, p)


def action_bounds_multi(v: float, lanes_here: Iterable[LaneNeighbours],
                        lane_left: LaneNeighbours | None,
                        lane_right: LaneNeighbours | None,
                        c0: float, c_left_near: float, c_right_near: float,
                        v_limit: float, a_max: float,
                        p: SafetyParams) -> ActionBounds:
    """Per-step bounds on the relative references.

    ``lanes_here`` holds one neighbour view per lane the vehicle currently
    touches (the most constraining leader wins); ``lane_left``/``lane_right``
    are None where no such lane exists.  The bounds may force braking
    (dv_hi < 0) but never demand more than the braking limit, and a zero
    lateral reference is always admissible.
    """
    dv_lo = -min(v, p.b * p.t_react)
    cap = min((safe_follow_speed(lane.lead_gap, lane.lead_v, p)
               for lane in lanes_here), default=INF)
    if cap < v:
        # Above the cap a proportional controller tracking it would only
        # brake at k_v * (v - cap) and ride the shrinking cap with a lag
        # that eventually breaks the criterion; demand full braking until
        # the speed is back below the cap (it dominates the reaction-model
        # trajectory that blessed the last in-bounds state).
        dv_hi = dv_lo
    else:
        dv_hi = min(a_max * p.t_react, v_limit - v, cap - v)
        dv_hi = max(dv_hi, dv_lo)

    def lane_ok(lane: LaneNeighbours | None) -> bool:
        return (lane is not None
                and braking_criterion(lane.lead_gap, lane.lead_v, v, p)
                and braking_criterion(lane.follow_gap, v, lane.follow_v, p))

    dd_hi = max(0.0, c_left_near if lane_ok(lane_left) else c0)
    dd_lo = min(0.0, c_right_near if lane_ok(lane_right) else c0)
    return ActionBounds(dv_lo, dv_hi, dd_lo, dd_hi)


def edge_clamp(bounds: ActionBounds, d: float, d_floor: float,
               d_ceil: float) -> ActionBounds:
    """Force the lateral bounds inward inside the road-edge keep-out band.

    Vehicle-relative bounds always admit holding the current offset, but a
    controller tracking a fixed offset on an arc still creeps sideways a few
    millimetres per step.  Once that creep carries the body into the band
    ``[edge, d_floor)`` (or past ``d_ceil``), holding position is no longer a
    safe reference: the only admissible lateral moves point back onto the
    road.  No lane centre lies inside the band, so references produced by
    lane tracking are unaffected.
    """
    dd_lo, dd_hi = bounds.dd_lo, bounds.dd_hi
    if d < d_floor:
        dd_lo = d_floor - d
        dd_hi = max(dd_hi, dd_lo)
    elif d > d_ceil:
        dd_hi = d_ceil - d
        dd_lo = min(dd_lo, dd_hi)
    else:
        return bounds
    return ActionBounds(bounds.dv_lo, bounds.dv_hi, dd_lo, dd_hi)


def manoeuvre_is_safe(v: float, d: float, v_tgt: float, d_tgt: float,
                      bounds: ActionBounds, probe: NeighbourProbe,
                      p: SafetyParams) -> bool:
    """Safety of adopting (v_tgt, d_tgt) as the current references.

    The target deltas must fit the action bounds, and the braking criterion
    must hold at ``k_interp`` states interpolated linearly in speed and
    lateral position (endpoints included) against the neighbours of every
    lane touched at the interpolated position, in both directions.
    """
    tol = 1e-9
    if not (bounds.dv_lo - tol <= v_tgt - v <= bounds.dv_hi + tol):
        return False
    if not (bounds.dd_lo - tol <= d_tgt - d <= bounds.dd_hi + tol):
        return False
    steps = max(2, p.k_interp)
    for j in range(steps):
        lam = j / (steps - 1)
        v_j = v + lam * (v_tgt - v)
        d_j = d + lam * (d_tgt - d)
        for lane in probe(d_j):
            if not braking_criterion(lane.lead_gap, lane.lead_v, v_j, p):
                return False
            if not braking_criterion(lane.follow_gap, v_j, lane.follow_v, p):
                return False
    return True


def pwl_rescale(u: float, lo: float, hi: float) -> float:
    """Piecewise-linear map of [-1, 1] onto [lo, hi] keeping zero neutral.

    The knee sits at zero's clamped image, so a zero input maps to the
    in-bounds point closest to "no change"; monotone and onto by
    construction.  Raises BoundsInverted when lo > hi.
    """
    if lo > hi:
        raise BoundsInverted(f"lo={lo} > hi={hi}")
    u = min(max(u, -1.0), 1.0)
    z0 = min(max(0.0, lo), hi)
    if u < 0.0:
        return lo + (u + 1.0) * (z0 - lo)
    return z0 + u * (hi - z0)
