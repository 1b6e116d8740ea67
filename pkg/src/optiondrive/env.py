"""Closed-loop multi-lane highway environment around one controlled vehicle.

The controlled vehicle (index 0) receives relative references ``(dv, dd)``;
scripted traffic computes its own references from IDM/MOBIL or a rule-based
driver.  All vehicles share the motion controllers and the kinematic bicycle
integrator and live on a closed loop, so arclength wraps and neighbour
relations are cyclic per lane.

Lane membership is predictive: a vehicle occupies every lane its body
touches after extending the footprint by one second of its current lateral
velocity, which makes crossing vehicles visible to safety queries before
their body arrives.  The 26-dimensional observation stacks the controlled
vehicle's own kinematic block with leader/follower blocks for the right,
current and left lane.

An episode terminates on any collision of the controlled vehicle (footprint
overlap or leaving the carriageway) and truncates at the step horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import kernels
from .dynamics import ActionRef, ControllerGains, VehicleParams
from .options import OptionContext, OptionParams
from .road import (LaneOffsets, RoadFramePose, RoadSpec, default_road, embed,
                   lane_offsets, project_batch)
from .safety import (INF, ActionBounds, LaneNeighbours, SafetyParams,
                     action_bounds_multi, braking_criterion, edge_clamp,
                     safe_follow_speed)
from .traffic import (IdmParams, LaneChangeView, MobilParams, RuleParams,
                      idm_accel, mobil_decide, rule_policy, spawn_traffic)


class EpisodeFinished(Exception):
    """step() called after termination or truncation."""


@dataclass(frozen=True)
class RewardWeights:
    w_follow: float = 1.0
    w_speed: float = 1.0
    w_center: float = 1.0
    w_right: float = 1.0
    headway: float = 1.0            # desired time headway for the gap term [s]
    collision_penalty: float = -5.0


@dataclass(frozen=True)
class EnvParams:
    road: RoadSpec = field(default_factory=default_road)
    vehicle: VehicleParams = VehicleParams()
    gains: ControllerGains = ControllerGains()
    safety: SafetyParams = SafetyParams()
    options: OptionParams = OptionParams()
    idm: IdmParams = IdmParams()
    mobil: MobilParams = MobilParams()
    rule: RuleParams = RuleParams()
    reward: RewardWeights = RewardWeights()
    v_limit: float = 130.0 / 3.6
    dt: float = 0.1
    horizon: int = 5000
    density: float = 10.0
    d_max: float = 150.0            # observation gap clamp [m]
    t_pred: float = 1.0             # predictive occupancy horizon [s]
    mobil_period: int = 5           # traffic lane-decision period [steps]
    traffic_mix: float = 0.5

    def with_(self, **kw) -> "EnvParams":
        return replace(self, **kw)


OBS_DIM = 26


def obs_scale(p: EnvParams) -> np.ndarray:
    """Fixed positive per-entry scale bringing observations to about [-1, 1]."""
    kappa_max = max([abs(s.curvature) for s in p.road.segments] + [1e-3])
    w = p.road.width
    lw = p.road.lane_width
    ego = [p.v_limit, p.v_limit, lw, lw, lw, w, w, kappa_max]
    block = [p.d_max, p.v_limit, w]
    return 1.0 / np.array(ego + block * 6, dtype=np.float64)


class StepResult(NamedTuple):
    obs: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    info: dict


@dataclass
class EgoContext:
    """Cached per-step view of the controlled vehicle for decision layers."""

    v: float
    d: float
    s: float
    offsets: LaneOffsets
    bounds: ActionBounds
    option_ctx: OptionContext
    obs: np.ndarray
    obs_scaled: np.ndarray
    lead_gap: float
    lead_v: float


def _rects_overlap(x1, y1, p1, l1, w1, x2, y2, p2, l2, w2) -> bool:
    """Oriented rectangle overlap via the separating-axis theorem."""
    c1, s1 = math.cos(p1), math.sin(p1)
    c2, s2 = math.cos(p2), math.sin(p2)
    dx, dy = x2 - x1, y2 - y1
    axes = ((c1, s1, l1 * 0.5, (c2, s2, l2 * 0.5), (-s2, c2, w2 * 0.5)),
            (-s1, c1, w1 * 0.5, (c2, s2, l2 * 0.5), (-s2, c2, w2 * 0.5)),
            (c2, s2, l2 * 0.5, (c1, s1, l1 * 0.5), (-s1, c1, w1 * 0.5)),
            (-s2, c2, w2 * 0.5, (c1, s1, l1 * 0.5), (-s1, c1, w1 * 0.5)))
    for ax, ay, own_half, (bx, by, bh), (cx, cy, ch) in axes:
        centre = abs(dx * ax + dy * ay)
        reach = own_half + abs((bx * ax + by * ay)) * bh + abs((cx * ax + cy * ay)) * ch
        if centre > reach:
            return False
    return True


class HighwayEnv:
    def __init__(self, p: EnvParams, seed: int = 0):
        self.p = p
        self._base_seed = seed
        self._scale = obs_scale(p)
        self._done = True
        self.t = 0

    # ------------------------------------------------------------------ reset

    def reset(self, seed: int | None = None, density: float | None = None):
        p = self.p
        rng = np.random.default_rng(self._base_seed if seed is None else seed)
        density = p.density if density is None else density
        road = p.road
        ego_lane = int(rng.integers(0, road.lane_count))
        ego_s = float(rng.random() * road.total_length)
        spawned, ego_v = spawn_traffic(
            road, density, rng, p.v_limit, p.safety, p.vehicle.length,
            ego_lane, ego_s, p.v_limit, mix=p.traffic_mix)
        return self._install(spawned, ego_lane, ego_s, ego_v, density)

    def reset_from(self, spawned, ego_lane: int, ego_s: float, ego_v: float,
                   ego_d: float | None = None):
        """Deterministic reset from an explicit vehicle placement."""
        return self._install(list(spawned), ego_lane, ego_s, ego_v, None,
                             ego_d=ego_d)

    def _install(self, spawned, ego_lane, ego_s, ego_v, density, ego_d=None):
        p = self.p
        road = p.road
        n = len(spawned) + 1
        self.n = n
        self.s = np.empty(n)
        self.d = np.empty(n)
        self.chi = np.empty(n)
        self.v = np.empty(n)
        self.v[0] = ego_v
        self.s[0] = ego_s
        self.d[0] = road.lane_center(ego_lane) if ego_d is None else ego_d
        self.chi[0] = 0.0
        self.v_target = np.empty(n)
        self.v_target[0] = p.v_limit
        self.policy = ["ego"] + [sv.policy for sv in spawned]
        self.maneuver = np.full(n, -1, dtype=np.int64)
        for i, sv in enumerate(spawned, start=1):
            self.s[i] = sv.s
            self.d[i] = road.lane_center(sv.lane)
            self.chi[i] = 0.0
            self.v[i] = sv.v
            self.v_target[i] = sv.v_target
        # global states from the road frame
        self.x = np.empty(n)
        self.y = np.empty(n)
        self.psi = np.empty(n)
        for i in range(n):
            xi, yi, psii = embed(road, RoadFramePose(self.s[i], self.d[i],
                                                     self.chi[i]))
            self.x[i], self.y[i], self.psi[i] = xi, yi, psii
        self.t = 0
        self._done = False
        self._collision = False
        self._out_of_road = False
        self._refresh()
        self._ctx = None
        return self.observe(), {"n_vehicles": n, "density": density}

    # ------------------------------------------------------------ world index

    def _refresh(self):
        """Recompute road-frame caches and per-lane neighbour tables."""
        p = self.p
        road = p.road
        self.s, self.d, self.chi = project_batch(road, self.x, self.y, self.psi)
        ddot = self.v * np.sin(self.chi)
        half_w = 0.5 * p.vehicle.width
        lo = self.d - half_w + np.minimum(0.0, ddot) * p.t_pred
        hi = self.d + half_w + np.maximum(0.0, ddot) * p.t_pred
        edges = np.arange(road.lane_count + 1) * road.lane_width
        occupies = (lo[:, None] < edges[None, 1:]) & (hi[:, None] > edges[None, :-1])
        self._lane_tables = []
        for k in range(road.lane_count):
            occ = np.nonzero(occupies[:, k])[0]
            occ = occ[np.argsort(self.s[occ], kind="stable")]
            self._lane_tables.append((self.s[occ], occ))
        self._lanes_of = [np.nonzero(occupies[i])[0] for i in range(self.n)]

    def _neighbours(self, lane: int, s_ref: float, exclude: int) -> LaneNeighbours:
        """Nearest leader/follower around s_ref in one lane (bumper gaps)."""
        road = self.p.road
        length = self.p.vehicle.length
        s_arr, idx = self._lane_tables[lane]
        m = len(idx)
        if m == 0 or (m == 1 and idx[0] == exclude):
            return LaneNeighbours()
        pos = int(np.searchsorted(s_arr, s_ref, side="right"))
        lead_gap, lead_v = INF, 0.0
        for step in range(m):
            j = idx[(pos + step) % m]
            if j == exclude:
                continue
            lead_gap = (self.s[j] - s_ref) % road.total_length - length
            lead_v = self.v[j]
            break
        fol_gap, fol_v = INF, 0.0
        for step in range(m):
            j = idx[(pos - 1 - step) % m]
            if j == exclude:
                continue
            fol_gap = (s_ref - self.s[j]) % road.total_length - length
            fol_v = self.v[j]
            break
        return LaneNeighbours(lead_gap, lead_v, fol_gap, fol_v)

    def _body_lanes(self, d_probe: float) -> range:
        """Lanes a body centred at d_probe touches (no prediction)."""
        road = self.p.road
        half_w = 0.5 * self.p.vehicle.width
        k_lo = int(math.floor((d_probe - half_w) / road.lane_width))
        k_hi = int(math.floor((d_probe + half_w - 1e-9) / road.lane_width))
        return range(max(k_lo, 0), min(k_hi, road.lane_count - 1) + 1)

    # ------------------------------------------------------------ ego context

    def ego_context(self) -> EgoContext:
        if self._ctx is not None:
            return self._ctx
        p = self.p
        road = p.road
        v, d, s = float(self.v[0]), float(self.d[0]), float(self.s[0])
        offsets = lane_offsets(road, d)
        lanes_here = [self._neighbours(k, s, 0) for k in self._lanes_of[0]]
        k0 = offsets.lane
        lane_left = (self._neighbours(k0 + 1, s, 0)
                     if k0 + 1 < road.lane_count else None)
        lane_right = self._neighbours(k0 - 1, s, 0) if k0 - 1 >= 0 else None
        bounds = action_bounds_multi(
            v, lanes_here, lane_left, lane_right, offsets.c0,
            offsets.c_left_near, offsets.c_right_near, p.v_limit,
            p.vehicle.a_max, p.safety)
        d_floor = 0.5 * p.vehicle.width + p.safety.edge_margin
        bounds = edge_clamp(bounds, d, d_floor, road.width - d_floor)

        def probe(d_probe: float):
            return [self._neighbours(k, s, 0) for k in self._body_lanes(d_probe)]

        octx = OptionContext(v, d, offsets, bounds, probe, p.safety, p.options)
        lead_gap, lead_v = INF, 0.0
        for ln in lanes_here:
            if ln.lead_gap < lead_gap:
                lead_gap, lead_v = ln.lead_gap, ln.lead_v
        obs = self.observe()
        self._ctx = EgoContext(v, d, s, offsets, bounds, octx, obs,
                               obs * self._scale, lead_gap, lead_v)
        return self._ctx

    # ------------------------------------------------------------- observation

    def observe(self) -> np.ndarray:
        p = self.p
        road = p.road
        v, d, s = float(self.v[0]), float(self.d[0]), float(self.s[0])
        offsets = lane_offsets(road, d)
        kappa = road.segments[int(np.searchsorted(road.starts, self.s[0],
                                                  side="right") - 1)].curvature
        out = np.empty(OBS_DIM)
        out[0] = v
        out[1] = p.v_limit - v
        out[2] = offsets.c0
        out[3] = offsets.c_right_near
        out[4] = offsets.c_left_near
        out[5] = d
        out[6] = road.width - d
        out[7] = kappa
        pos = 8
        k0 = offsets.lane
        for k in (k0 - 1, k0, k0 + 1):
            if 0 <= k < road.lane_count:
                ln = self._neighbours(k, s, 0)
                for gap_signed, v_o, d_o in (
                        (ln.lead_gap, ln.lead_v, None),
                        (-ln.follow_gap if ln.follow_gap != INF else INF,
                         ln.follow_v, None)):
                    if gap_signed == INF or gap_signed == -INF:
                        out[pos:pos + 3] = (p.d_max, 0.0, 0.0)
                    else:
                        out[pos] = min(max(gap_signed, -p.d_max), p.d_max)
                        out[pos + 1] = v_o - v
                        out[pos + 2] = 0.0  # filled below
                    pos += 3
            else:
                out[pos:pos + 6] = [p.d_max, 0.0, 0.0, p.d_max, 0.0, 0.0]
                pos += 6
        # second pass for relative lateral offsets (needs the neighbour index)
        pos = 8
        for k in (k0 - 1, k0, k0 + 1):
            if 0 <= k < road.lane_count:
                lead_i, fol_i = self._neighbour_indices(k, s, 0)
                for j in (lead_i, fol_i):
                    if j >= 0:
                        out[pos + 2] = self.d[j] - d
                    pos += 3
            else:
                pos += 6
        return out

    def _neighbour_indices(self, lane: int, s_ref: float,
                           exclude: int) -> tuple[int, int]:
        s_arr, idx = self._lane_tables[lane]
        m = len(idx)
        lead_i = fol_i = -1
        if m == 0 or (m == 1 and idx[0] == exclude):
            return lead_i, fol_i
        pos = int(np.searchsorted(s_arr, s_ref, side="right"))
        for step in range(m):
            j = int(idx[(pos + step) % m])
            if j != exclude:
                lead_i = j
                break
        for step in range(m):
            j = int(idx[(pos - 1 - step) % m])
            if j != exclude:
                fol_i = j
                break
        return lead_i, fol_i

    def scaled(self, obs: np.ndarray) -> np.ndarray:
        return obs * self._scale

    # ------------------------------------------------------------------ reward

    def _free_right_lanes(self) -> int:
        road = self.p.road
        v, s = float(self.v[0]), float(self.s[0])
        k0 = road.lane_of(self.d[0])
        free = 0
        for k in range(k0):
            ln = self._neighbours(k, s, 0)
            if (braking_criterion(ln.lead_gap, ln.lead_v, v, self.p.safety)
                    and braking_criterion(ln.follow_gap, v, ln.follow_v,
                                          self.p.safety)):
                free += 1
        return free

    def _reward(self, collided: bool) -> tuple[float, dict]:
        p = self.p
        rw = p.reward
        road = p.road
        v, d, s = float(self.v[0]), float(self.d[0]), float(self.s[0])
        lead_gap = INF
        for k in self._lanes_of[0]:
            ln = self._neighbours(k, s, 0)
            lead_gap = min(lead_gap, ln.lead_gap)
        gap_ref = max(p.safety.gap_safe, v * rw.headway)
        r_follow = (-max(0.0, 1.0 - lead_gap / gap_ref)
                    if lead_gap != INF else 0.0)
        r_speed = -abs(v - p.v_limit) / p.v_limit
        c0 = lane_offsets(road, d).c0
        r_center = -min(1.0, abs(c0) / (0.5 * road.lane_width))
        denom = max(road.lane_count - 1, 1)
        r_right = -self._free_right_lanes() / denom
        w_sum = rw.w_follow + rw.w_speed + rw.w_center + rw.w_right
        r = (rw.w_follow * r_follow + rw.w_speed * r_speed
             + rw.w_center * r_center + rw.w_right * r_right) / w_sum
        comp = {"r_follow": r_follow, "r_speed": r_speed, "r_center": r_center,
                "r_right": r_right, "lead_gap": lead_gap}
        if collided:
            r += rw.collision_penalty
        return r, comp

    # -------------------------------------------------------------- collisions

    def _check_collision(self) -> bool:
        p = self.p
        road = p.road
        half_w = 0.5 * p.vehicle.width
        d0 = self.d[0]
        if d0 < half_w or d0 > road.width - half_w:
            self._out_of_road = True
            return True
        length, width = p.vehicle.length, p.vehicle.width
        for i in range(1, self.n):
            gap = abs(road.signed_gap(self.s[i], self.s[0]))
            if gap > length + 2.0:
                continue
            if abs(self.d[i] - d0) > width + 1.0:
                continue
            if _rects_overlap(self.x[0], self.y[0], self.psi[0], length, width,
                              self.x[i], self.y[i], self.psi[i], length, width):
                return True
        return False

    # ------------------------------------------------------------------- step

    def _traffic_refs(self) -> tuple[np.ndarray, np.ndarray]:
        """References for scripted vehicles from the pre-step world."""
        p = self.p
        road = p.road
        dv = np.zeros(self.n)
        dd = np.zeros(self.n)
        for i in range(1, self.n):
            v_i, d_i, s_i = float(self.v[i]), float(self.d[i]), float(self.s[i])
            k0 = road.lane_of(d_i)
            # most constraining leader over the lanes the body touches
            lead = LaneNeighbours()
            cap = INF
            for k in self._lanes_of[i]:
                ln = self._neighbours(k, s_i, i)
                c = safe_follow_speed(ln.lead_gap, ln.lead_v, p.safety)
                if c < cap:
                    cap, lead = c, ln
            own = self._neighbours(k0, s_i, i)
            if self.maneuver[i] >= 0:
                tgt = int(self.maneuver[i])
                if abs(road.lane_center(tgt) - d_i) < p.options.eps_d:
                    self.maneuver[i] = -1
                else:
                    ln_t = self._neighbours(tgt, s_i, i)
                    if not (braking_criterion(ln_t.lead_gap, ln_t.lead_v, v_i,
                                              p.safety)
                            and braking_criterion(ln_t.follow_gap, v_i,
                                                  ln_t.follow_v, p.safety)):
                        self.maneuver[i] = -1  # abort, recentre
            decide = (self.maneuver[i] < 0
                      and (self.t + i) % p.mobil_period == 0)
            if self.policy[i] == "idm":
                a_cmd = idm_accel(own.lead_gap, v_i, own.lead_v,
                                  replace(p.idm, v0=self.v_target[i]))
                dv_i = a_cmd / p.gains.k_v
                if decide:
                    choice = self._mobil_choice(i, k0, v_i, s_i, own)
                    if choice != 0:
                        self._gate_lane_change(i, k0 + choice, v_i, s_i)
            else:
                left = (self._neighbours(k0 + 1, s_i, i)
                        if k0 + 1 < road.lane_count else None)
                right = self._neighbours(k0 - 1, s_i, i) if k0 >= 1 else None
                dv_i, choice = rule_policy(v_i, self.v_target[i], own, left,
                                           right, p.safety, p.rule)
                if decide and choice != 0:
                    self._gate_lane_change(i, k0 + choice, v_i, s_i)
            if cap != INF:
                dv_i = min(dv_i, cap - v_i)
            dv[i] = dv_i
            tgt_lane = int(self.maneuver[i]) if self.maneuver[i] >= 0 else k0
            dd[i] = road.lane_center(tgt_lane) - d_i
        return dv, dd

    def _mobil_choice(self, i: int, k0: int, v_i: float, s_i: float,
                      own: LaneNeighbours) -> int:
        p = self.p
        road = p.road

        def view(k: int) -> LaneChangeView | None:
            if not 0 <= k < road.lane_count:
                return None
            ln = self._neighbours(k, s_i, i)
            fol_i = self._neighbour_indices(k, s_i, i)[1]
            if fol_i >= 0:
                fol_ln = self._neighbours(k, self.s[fol_i], fol_i)
                fol_lead_gap, fol_lead_v = fol_ln.lead_gap, fol_ln.lead_v
            else:
                fol_lead_gap, fol_lead_v = INF, 0.0
            return LaneChangeView(ln.lead_gap, ln.lead_v, ln.follow_gap,
                                  ln.follow_v, fol_lead_gap, fol_lead_v)

        own_view = LaneChangeView(own.lead_gap, own.lead_v, own.follow_gap,
                                  own.follow_v, own.lead_gap + own.follow_gap
                                  + p.vehicle.length, own.lead_v)
        idm_i = replace(p.idm, v0=self.v_target[i])
        return mobil_decide(v_i, own_view, view(k0 + 1), view(k0 - 1), idm_i,
                            p.mobil)

    def _gate_lane_change(self, i: int, target: int, v_i: float, s_i: float):
        """Start a scripted lane change only when the target lane passes the
        braking criterion in both directions."""
        road = self.p.road
        if not 0 <= target < road.lane_count:
            return
        ln = self._neighbours(target, s_i, i)
        if (braking_criterion(ln.lead_gap, ln.lead_v, v_i, self.p.safety)
                and braking_criterion(ln.follow_gap, v_i, ln.follow_v,
                                      self.p.safety)):
            self.maneuver[i] = target

    def _controller_batch(self, dv: np.ndarray, dd: np.ndarray):
        """Vectorised twin of dynamics.track_references for all vehicles."""
        p = self.p
        vp, g = p.vehicle, p.gains
        road = p.road
        a = np.clip(g.k_v * dv, -vp.b_max, vp.a_max)
        v_eff = np.maximum(self.v, g.v_floor)
        ddot_cap = np.minimum(g.d_rate_max, v_eff * math.sin(g.chi_max))
        ddot_cmd = np.clip(g.k_d * dd, -ddot_cap, ddot_cap)
        chi_cmd = np.arcsin(ddot_cmd / v_eff)
        seg_idx = np.minimum(np.searchsorted(road.starts, self.s, side="right")
                             - 1, len(road.segments) - 1)
        kappa = np.array([road.segments[j].curvature for j in seg_idx])
        e_center = self.d - 0.5 * road.width
        denom = 1.0 - kappa * e_center
        kappa_local = np.where(np.abs(denom) > 1e-6, kappa / denom, 0.0)
        psi_rate = kappa_local * self.v * np.cos(self.chi) \
            + g.k_chi * (chi_cmd - self.chi)
        sin_zeta = np.clip(psi_rate * vp.lr / v_eff, -0.95, 0.95)
        delta = np.arctan(np.tan(np.arcsin(sin_zeta)) * (vp.lf + vp.lr) / vp.lr)
        return a, np.clip(delta, -vp.delta_max, vp.delta_max)

    def step(self, ref: ActionRef | tuple[float, float]) -> StepResult:
        if self._done:
            raise EpisodeFinished("episode already finished; call reset()")
        if not isinstance(ref, ActionRef):
            ref = ActionRef(*ref)
        p = self.p
        dv, dd = self._traffic_refs()
        dv[0], dd[0] = ref.dv, ref.dd
        a, delta = self._controller_batch(dv, dd)
        kernels.kbm_batch(self.x, self.y, self.psi, self.v, a, delta,
                          p.vehicle.lf, p.vehicle.lr, p.dt)
        self._refresh()
        self._ctx = None
        collided = self._check_collision()
        self._collision = collided
        reward, comp = self._reward(collided)
        self.t += 1
        terminated = collided
        truncated = (not terminated) and self.t >= p.horizon
        self._done = terminated or truncated
        info = {"collision": collided, "out_of_road": self._out_of_road,
                "t": self.t, **comp}
        return StepResult(self.observe(), reward, terminated, truncated, info)
