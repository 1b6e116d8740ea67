"""Kinematic bicycle model and the low-level reference-tracking controllers.

All vehicles (the controlled one and scripted traffic) share the same motion
layer: a proportional speed controller and a cascaded lateral controller that
shapes a bounded lateral speed toward the reference offset, converts it into
a heading command and steers to track it with curvature feedforward.  The
lateral-speed cap is what fixes the duration of a full lane change (about
5 s at motorway speed, longer at low speed where the heading-angle cap
binds).

States advance with explicit Euler at the simulation step (0.1 s); the test
suite validates the integrator against a fine-step RK4 oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .road import RoadFramePose, RoadSpec, curvature_at


@dataclass(frozen=True)
class VehicleParams:
    lf: float = 1.5          # centre of mass to front axle [m]
    lr: float = 1.5          # centre of mass to rear axle [m]
    length: float = 4.5      # footprint [m]
    width: float = 1.8
    a_max: float = 3.0       # acceleration limit [m/s^2]
    b_max: float = 6.0       # braking limit [m/s^2]
    delta_max: float = 0.5   # steering-angle limit [rad]


@dataclass
class VehicleState:
    x: float
    y: float
    psi: float
    v: float


@dataclass(frozen=True)
class ControllerGains:
    k_v: float = 1.0         # speed error -> acceleration [1/s]
    k_d: float = 1.0         # lateral error -> lateral speed command [1/s]
    k_chi: float = 5.0       # heading error -> heading rate [1/s]
    d_rate_max: float = 1.0  # lateral speed cap [m/s]
    chi_max: float = 0.12    # commanded heading offset cap [rad]
    v_floor: float = 0.5     # regularises divisions at standstill [m/s]


@dataclass(frozen=True)
class ActionRef:
    """Relative references: target speed v + dv, target lateral d + dd."""

    dv: float
    dd: float


def kbm_step(state: VehicleState, a: float, delta: float, p: VehicleParams,
             dt: float) -> VehicleState:
    """One explicit-Euler step of the kinematic bicycle model.

    The model is referenced to the centre of mass with slip angle
    zeta = atan(lr / (lf + lr) * tan(delta)); speed never drops below zero.
    """
    zeta = math.atan(p.lr / (p.lf + p.lr) * math.tan(delta))
    x = state.x + dt * state.v * math.cos(state.psi + zeta)
    y = state.y + dt * state.v * math.sin(state.psi + zeta)
    psi = state.psi + dt * (state.v / p.lr) * math.sin(zeta)
    psi = (psi + math.pi) % (2.0 * math.pi) - math.pi
    v = max(0.0, state.v + dt * a / math.cos(zeta))
    return VehicleState(x, y, psi, v)


def long_control(v: float, dv: float, p: VehicleParams,
                 g: ControllerGains) -> float:
    """Acceleration command tracking the speed reference v + dv."""
    return min(max(g.k_v * dv, -p.b_max), p.a_max)


def lat_control(v: float, dd: float, heading_err: float, kappa: float,
                e_center: float, p: VehicleParams, g: ControllerGains) -> float:
    """Steering command tracking the lateral reference d + dd.

    ``kappa`` is the reference-line curvature at the vehicle's arclength and
    ``e_center`` its offset from the reference line (left positive), used for
    the feedforward term of an offset path.
    """
    v_eff = max(v, g.v_floor)
    ddot_cap = min(g.d_rate_max, v_eff * math.sin(g.chi_max))
    ddot_cmd = min(max(g.k_d * dd, -ddot_cap), ddot_cap)
    chi_cmd = math.asin(ddot_cmd / v_eff)
    denom = 1.0 - kappa * e_center
    kappa_local = kappa / denom if abs(denom) > 1e-6 else 0.0
    psi_rate = kappa_local * v * math.cos(heading_err) \
        + g.k_chi * (chi_cmd - heading_err)
    sin_zeta = min(max(psi_rate * p.lr / v_eff, -0.95), 0.95)
    zeta = math.asin(sin_zeta)
    delta = math.atan(math.tan(zeta) * (p.lf + p.lr) / p.lr)
    return min(max(delta, -p.delta_max), p.delta_max)


def track_references(state: VehicleState, pose: RoadFramePose, ref: ActionRef,
                     road: RoadSpec, p: VehicleParams,
                     g: ControllerGains = ControllerGains()) -> tuple[float, float]:
    """Map relative references to one (acceleration, steering) command."""
    a = long_control(state.v, ref.dv, p, g)
    kappa = curvature_at(road, pose.s)
    e_center = pose.d - 0.5 * road.width
    delta = lat_control(state.v, ref.dd, pose.heading_err, kappa, e_center, p, g)
    return a, delta
