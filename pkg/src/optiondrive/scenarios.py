"""Scripted benchmark scenarios and trace analysis helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import HighwayEnv
from .road import RoadSpec
from .traffic import SpawnedVehicle

DENSITY_GRID = (0.0, 5.0, 10.0, 15.0, 20.0, 30.0, 40.0)


@dataclass(frozen=True)
class OvertakingScenario:
    """One slower vehicle ahead of the controlled vehicle in the same lane.

    The gap is generous enough that a full overtake at unchanged speed is
    admissible under the braking criterion throughout the manoeuvre.
    """

    ego_lane: int = 1
    ego_s: float = 100.0
    gap: float = 160.0              # bumper-to-bumper [m]
    leader_speed_factor: float = 0.6


def install_overtaking(env: HighwayEnv, sc: OvertakingScenario = OvertakingScenario()):
    """Deterministic reset of ``env`` to the overtaking placement."""
    p = env.p
    v_lead = sc.leader_speed_factor * p.v_limit
    leader = SpawnedVehicle(
        lane=sc.ego_lane,
        s=p.road.wrap_s(sc.ego_s + sc.gap + p.vehicle.length),
        v=v_lead, v_target=v_lead, policy="rule")
    return env.reset_from([leader], sc.ego_lane, sc.ego_s, p.v_limit)


def lane_change_durations(d_trace: np.ndarray, road: RoadSpec, eps_d: float,
                          dt: float) -> list[float]:
    """Durations (seconds) of completed transitions between lane centres.

    A change starts when the vehicle leaves the eps_d band of its settled
    lane centre and ends on entering the band of a different centre;
    returning to the original centre does not count.
    """
    centers = np.array([road.lane_center(k) for k in range(road.lane_count)])
    durations: list[float] = []
    settled: int | None = None
    from_lane = -1
    t_leave = 0
    for t, d in enumerate(d_trace):
        k = int(np.argmin(np.abs(centers - d)))
        in_band = abs(centers[k] - d) < eps_d
        if settled is not None and not in_band:
            from_lane = settled
            t_leave = t
            settled = None
        elif settled is None and in_band:
            if from_lane >= 0 and k != from_lane:
                durations.append((t - t_leave) * dt)
            settled = k
    return durations


def center_deviation(d_trace: np.ndarray, road: RoadSpec) -> np.ndarray:
    """|distance to own-lane centre| per step."""
    lw = road.lane_width
    k = np.clip(np.floor(d_trace / lw), 0, road.lane_count - 1)
    return np.abs((k + 0.5) * lw - d_trace)


def right_lane_fraction(d_trace: np.ndarray, road: RoadSpec) -> float:
    k = np.clip(np.floor(d_trace / road.lane_width), 0, road.lane_count - 1)
    return float(np.mean(k == 0))


def summarize(agent: str, density: float, results: list, road: RoadSpec,
               eps_d: float, dt: float, d_max: float) -> dict:
    """summary-v1 row aggregating a batch of EpisodeResults."""
    rets = np.array([r.ret for r in results])
    speeds = np.array([r.mean_speed for r in results])
    durations: list[float] = []
    devs, rights, follows = [], [], []
    collisions = 0
    for r in results:
        durations.extend(lane_change_durations(r.d_trace, road, eps_d, dt))
        devs.append(float(np.mean(center_deviation(r.d_trace, road))))
        rights.append(right_lane_fraction(r.d_trace, road))
        follows.append(float(np.mean(np.minimum(r.lead_trace, d_max))))
        collisions += int(r.collision)
    return {"agent": agent, "density": density, "episodes": len(results),
            "return_mean": float(np.mean(rets)),
            "return_min": float(np.min(rets)),
            "return_max": float(np.max(rets)),
            "speed_mean": float(np.mean(speeds)),
            "lane_change_duration_mean":
                float(np.mean(durations)) if durations else 0.0,
            "following_distance_mean": float(np.mean(follows)),
            "right_lane_fraction": float(np.mean(rights)),
            "center_abs_dev_mean": float(np.mean(devs)),
            "collisions": collisions}
