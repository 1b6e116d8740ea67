"""Temporally extended driving manoeuvres over the safety layer.

Each option is a deterministic triple (initiation set, policy, termination
set) over the relative-reference action space.  Policies steer toward a
target speed/lateral pair recomputed from the current state every step and
clipped into the safety bounds, so any admissible execution stays inside the
worst-case braking envelope by construction.

Axes: EMERGENCY and MAINTAIN act on both the velocity and lateral axis;
VEL_DOWN / VEL_UP move the speed to the next multiple of ``dv_step``;
LANE_LEFT / LANE_RIGHT move to the nearest lane centre in that direction.
The per-axis sets O_v and O_d drive the factored decision architectures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

from .road import LaneOffsets
from .safety import ActionBounds, NeighbourProbe, SafetyParams, manoeuvre_is_safe


class OptionId(IntEnum):
    EMERGENCY = 0
    MAINTAIN = 1
    VEL_DOWN = 2
    VEL_UP = 3
    LANE_LEFT = 4
    LANE_RIGHT = 5


ALL_OPTIONS = tuple(OptionId)
VEL_OPTIONS = (OptionId.EMERGENCY, OptionId.MAINTAIN, OptionId.VEL_DOWN,
               OptionId.VEL_UP)
LAT_OPTIONS = (OptionId.EMERGENCY, OptionId.MAINTAIN, OptionId.LANE_LEFT,
               OptionId.LANE_RIGHT)


@dataclass(frozen=True)
class OptionParams:
    dv_step: float = 2.0      # velocity lattice spacing [m/s]
    eps_v: float = 0.01       # speed tolerance at termination [m/s]
    eps_d: float = 0.05       # lateral tolerance at termination [m]
    v_lane_min: float = 3.0   # minimum speed for lane changes [m/s]


@dataclass(frozen=True)
class OptionContext:
    """Everything option predicates may look at in the current state."""

    v: float
    d: float
    offsets: LaneOffsets
    bounds: ActionBounds
    probe: NeighbourProbe
    safety: SafetyParams
    params: OptionParams = OptionParams()


def targets(option: OptionId, ctx: OptionContext) -> tuple[float, float]:
    """Target (speed, lateral position) of an option in the current state.

    Every option that is not a lane change keeps the current *lane* by
    targeting its centre: holding the raw offset instead would leave the
    lateral loop open, and the curvature feed-forward alone drifts on
    arcs under the discrete-time controller.
    """
    v, d, op = ctx.v, ctx.d, ctx.params
    keep = d + ctx.offsets.c0
    if option == OptionId.EMERGENCY:
        b = ctx.bounds
        return (min(max(0.0, v + b.dv_lo), v + b.dv_hi),
                min(max(keep, d + b.dd_lo), d + b.dd_hi))
    if option == OptionId.MAINTAIN:
        return v, keep
    if option == OptionId.VEL_DOWN:
        return math.ceil(v / op.dv_step - 1.0) * op.dv_step, keep
    if option == OptionId.VEL_UP:
        return math.floor(v / op.dv_step + 1.0) * op.dv_step, keep
    if option == OptionId.LANE_LEFT:
        return v, d + ctx.offsets.c_left_near
    return v, d + ctx.offsets.c_right_near


def _safe(ctx: OptionContext, v_tgt: float, d_tgt: float) -> bool:
    return manoeuvre_is_safe(ctx.v, ctx.d, v_tgt, d_tgt, ctx.bounds, ctx.probe,
                             ctx.safety)


def can_initiate(option: OptionId, ctx: OptionContext) -> bool:
    if option == OptionId.EMERGENCY:
        return True
    v_tgt, d_tgt = targets(option, ctx)
    if option in (OptionId.LANE_LEFT, OptionId.LANE_RIGHT):
        if abs(d_tgt - ctx.d) < ctx.params.eps_d or ctx.v < ctx.params.v_lane_min:
            return False
    return _safe(ctx, v_tgt, d_tgt)


def should_terminate(option: OptionId, ctx: OptionContext) -> bool:
    """Termination test, evaluated in the state reached after each step."""
    if option in (OptionId.EMERGENCY, OptionId.MAINTAIN):
        return True
    v_tgt, d_tgt = targets(option, ctx)
    if option in (OptionId.VEL_DOWN, OptionId.VEL_UP):
        return abs(v_tgt - ctx.v) < ctx.params.eps_v or not _safe(ctx, v_tgt, d_tgt)
    return (abs(d_tgt - ctx.d) < ctx.params.eps_d
            or ctx.v < ctx.params.v_lane_min
            or not _safe(ctx, v_tgt, d_tgt))


def option_policy(option: OptionId, ctx: OptionContext) -> tuple[float, float]:
    """Relative references of one option, clipped into the action bounds."""
    v_tgt, d_tgt = targets(option, ctx)
    return ctx.bounds.clip(v_tgt - ctx.v, d_tgt - ctx.d)


def combined_policy(o_v: OptionId, o_d: OptionId,
                    ctx: OptionContext) -> tuple[float, float]:
    """Velocity reference from o_v, lateral reference from o_d."""
    dv, _ = option_policy(o_v, ctx)
    _, dd = option_policy(o_d, ctx)
    return dv, dd


def availability(options: tuple[OptionId, ...], ctx: OptionContext) -> list[bool]:
    """Initiation mask over ``options``; EMERGENCY keeps it non-empty."""
    return [can_initiate(o, ctx) for o in options]


def available_after(mask_next: list[bool], active_idx: int,
                    terminated: bool) -> list[bool]:
    """Availability as seen by the next decision.

    While an option keeps running the decision is pinned to it; only on
    termination does the full initiation mask of the new state apply.
    """
    if terminated:
        return mask_next
    pinned = [False] * len(mask_next)
    pinned[active_idx] = True
    return pinned
