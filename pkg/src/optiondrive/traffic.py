"""Scripted traffic: IDM car following, MOBIL lane choice, a rule-based mix,
and the density-controlled spawner.

Scripted vehicles emit the same relative references as the learned policies
and run through the shared motion controllers.  The environment additionally
clamps their speed reference with the worst-case braking bound and gates lane
changes on the braking criterion, so scripted traffic can never be the cause
of an unavoidable collision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .road import RoadSpec
from .safety import INF, LaneNeighbours, SafetyParams, braking_criterion


class DensityInfeasible(Exception):
    """Requested vehicle density cannot be placed with safe gaps."""


class NonPositiveGap(ValueError):
    """IDM was asked about a leader at or behind the follower's bumper."""


@dataclass(frozen=True)
class IdmParams:
    v0: float = 36.11         # desired speed [m/s], set per vehicle
    T: float = 1.5            # desired time headway [s]
    s0: float = 2.0           # standstill jam distance [m]
    a: float = 1.5            # comfortable acceleration [m/s^2]
    b_comf: float = 2.0       # comfortable deceleration [m/s^2]
    exponent: float = 4.0
    brake_cap: float = 3.0    # clamp factor: max braking = brake_cap * b_comf


@dataclass(frozen=True)
class MobilParams:
    politeness: float = 0.3
    a_threshold: float = 0.1  # incentive needed to move [m/s^2]
    b_safe: float = 4.0       # max braking imposed on the new follower


@dataclass(frozen=True)
class RuleParams:
    headway: float = 1.5      # desired time headway [s]
    slack: float = 1.5        # blocked below slack * desired gap
    change_margin: float = 2.0  # extra clearance required in the target lane


def idm_accel(gap: float, v: float, v_lead: float, p: IdmParams) -> float:
    """Intelligent-driver-model acceleration, clamped to
    [-brake_cap * b_comf, a].  Infinite gap gives free-road behaviour."""
    free = 1.0 - (v / p.v0) ** p.exponent if p.v0 > 0 else 0.0
    if gap == INF:
        interact = 0.0
    else:
        if gap <= 0.0:
            raise NonPositiveGap(f"gap={gap}")
        s_star = p.s0 + max(0.0, v * p.T + v * (v - v_lead)
                            / (2.0 * math.sqrt(p.a * p.b_comf)))
        interact = (s_star / gap) ** 2
    acc = p.a * (free - interact)
    return min(max(acc, -p.brake_cap * p.b_comf), p.a)


@dataclass(frozen=True)
class LaneChangeView:
    """Gaps/speeds a deciding vehicle sees toward one candidate lane.

    ``fol_lead_gap``/``fol_lead_v`` describe the candidate-lane follower's
    own current leader, needed for its acceleration before the change.
    """

    lead_gap: float = INF
    lead_v: float = 0.0
    fol_gap: float = INF
    fol_v: float = 0.0
    fol_lead_gap: float = INF
    fol_lead_v: float = 0.0


def mobil_decide(v: float, own: LaneChangeView,
                 left: LaneChangeView | None, right: LaneChangeView | None,
                 idm: IdmParams, p: MobilParams,
                 others: IdmParams | None = None) -> int:
    """Lane decision: -1 right, 0 stay, +1 left.

    A candidate passes the safety criterion when the new follower would not
    have to brake harder than ``b_safe``, and the incentive criterion when
    the deciding vehicle's acceleration gain plus the politeness-weighted
    gains of the two affected followers exceeds ``a_threshold``.  Ties go to
    the right.  Other vehicles' accelerations are evaluated with IDM around
    their current speed (their true desired speed is not observable).
    """
    a_now = idm_accel(own.lead_gap, v, own.lead_v, idm)

    def follower_params(v_f: float) -> IdmParams:
        if others is not None:
            return others
        return IdmParams(v0=max(v_f, 0.1), T=idm.T, s0=idm.s0, a=idm.a,
                         b_comf=idm.b_comf, exponent=idm.exponent,
                         brake_cap=idm.brake_cap)

    def gain(cand: LaneChangeView) -> float | None:
        if cand.lead_gap <= 0 or cand.fol_gap <= 0:
            return None
        fp = follower_params(cand.fol_v)
        a_new_fol = idm_accel(cand.fol_gap, cand.fol_v, v, fp)
        if a_new_fol < -p.b_safe:
            return None
        a_self = idm_accel(cand.lead_gap, v, cand.lead_v, idm)
        a_fol_now = idm_accel(cand.fol_lead_gap, cand.fol_v, cand.fol_lead_v, fp)
        op = follower_params(own.fol_v)
        a_old_fol_now = idm_accel(own.fol_gap, own.fol_v, v, op)
        a_old_fol_new = idm_accel(own.fol_lead_gap, own.fol_v, own.fol_lead_v, op)
        return (a_self - a_now) + p.politeness * (
            (a_new_fol - a_fol_now) + (a_old_fol_new - a_old_fol_now))

    best, best_gain = 0, p.a_threshold
    for direction, cand in ((-1, right), (1, left)):
        if cand is None:
            continue
        g = gain(cand)
        if g is not None and (g > best_gain
                              or (g == best_gain and direction == -1 and best == 1)):
            best, best_gain = direction, g
    return best


def rule_policy(v: float, v_target: float, lane: LaneNeighbours,
                left: LaneNeighbours | None, right: LaneNeighbours | None,
                sp: SafetyParams, p: RuleParams) -> tuple[float, int]:
    """Simple deterministic driver: keep lane, match a near leader, change
    lane only when blocked and the adjacent gaps are generous.

    Returns (dv reference, lane decision -1/0/+1).
    """
    gap_des = max(sp.gap_safe, v * p.headway)
    if not braking_criterion(lane.lead_gap, lane.lead_v, v, sp):
        dv = -min(v, sp.b * sp.t_react)
    elif lane.lead_gap < gap_des:
        dv = min(lane.lead_v, v_target) - v
    else:
        dv = v_target - v

    blocked = (lane.lead_gap < p.slack * gap_des
               and lane.lead_v < v_target - 0.5)
    change = 0
    if blocked:
        for direction, cand in ((1, left), (-1, right)):
            if cand is None:
                continue
            if (cand.lead_gap > v * p.headway + p.change_margin
                    and cand.follow_gap > cand.follow_v * p.headway
                    + p.change_margin):
                change = direction
                break
    return dv, change


@dataclass(frozen=True)
class SpawnedVehicle:
    lane: int
    s: float
    v: float
    v_target: float
    policy: str  # "idm" or "rule"


def spawn_traffic(road: RoadSpec, density: float, rng: np.random.Generator,
                  v_limit: float, sp: SafetyParams, vehicle_length: float,
                  ego_lane: int, ego_s: float, ego_v: float,
                  mix: float = 0.5) -> tuple[list[SpawnedVehicle], float]:
    """Place round(density * length_km) vehicles with safe initial gaps.

    Positions are drawn per lane as sorted uniforms with a minimum clearance,
    then initial speeds are lowered where needed so that every same-lane pair
    (including the pair around the controlled vehicle) satisfies the braking
    criterion at spawn.  Target speeds are uniform in [0.6, 1.0] * v_limit
    and the policy mix is an independent coin flip per vehicle.

    Returns the spawned vehicles and the (possibly lowered) safe initial
    speed for the controlled vehicle.
    """
    n = int(round(density * road.total_length / 1000.0))
    if n == 0:
        return [], ego_v
    min_clear = vehicle_length + sp.gap_safe + 2.0 * sp.margin
    lanes = rng.integers(0, road.lane_count, size=n)
    by_lane: dict[int, list[int]] = {k: [] for k in range(road.lane_count)}
    for i, k in enumerate(lanes):
        by_lane[int(k)].append(i)
    v_target = (0.6 + 0.4 * rng.random(n)) * v_limit
    policy = np.where(rng.random(n) < mix, "idm", "rule")
    s_pos = np.zeros(n)
    v_init = v_target.copy()
    for k, members in by_lane.items():
        if not members:
            continue
        occupied = [(ego_s, ego_v)] if k == ego_lane else []
        room = road.total_length - min_clear * (len(members) + len(occupied))
        if room <= 0:
            raise DensityInfeasible(
                f"lane {k}: {len(members)} vehicles cannot keep safe spacing")
        # sorted uniforms + mandatory clearance gives sorted safe positions
        u = np.sort(rng.random(len(members) + len(occupied))) * room
        base = rng.random() * road.total_length
        slots = [road.wrap_s(base + u[j] + min_clear * j)
                 for j in range(len(u))]
        if occupied:
            # put the controlled vehicle into the nearest slot and shift it
            gaps = [abs(road.signed_gap(sl, ego_s)) for sl in slots]
            ego_slot = int(np.argmin(gaps))
            shift = road.signed_gap(ego_s, slots[ego_slot])
            slots = [road.wrap_s(sl + shift) for sl in slots]
            del slots[ego_slot]
        for i, sl in zip(members, slots):
            s_pos[i] = sl
        # lower initial speeds until each follower satisfies the criterion;
        # caps cascade backwards around the ring, so iterate to a fixpoint
        all_in_lane = sorted([(s_pos[i], i) for i in members])
        if k == ego_lane:
            all_in_lane.append((ego_s, -1))
            all_in_lane.sort()
        m = len(all_in_lane)
        for _ in range(m + 2):
            changed = False
            for j in range(m):
                s_f, i_f = all_in_lane[j]
                s_l, i_l = all_in_lane[(j + 1) % m]
                gap = (s_l - s_f) % road.total_length - vehicle_length
                if m > 1 and gap <= sp.gap_safe + sp.margin:
                    raise DensityInfeasible(f"lane {k}: spacing collapsed")
                if m == 1:
                    continue
                v_l = ego_v if i_l == -1 else v_init[i_l]
                cap = math.sqrt(max(
                    0.0, v_l * v_l
                    + 2.0 * sp.b * (gap - sp.gap_safe - sp.margin)))
                v_f = ego_v if i_f == -1 else v_init[i_f]
                if v_f > cap:
                    changed = True
                    if i_f == -1:
                        ego_v = cap
                    else:
                        v_init[i_f] = cap
            if not changed:
                break
    return ([SpawnedVehicle(int(lanes[i]), float(s_pos[i]), float(v_init[i]),
                            float(v_target[i]), str(policy[i]))
             for i in range(n)], ego_v)
