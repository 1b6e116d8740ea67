"""Road geometry: a closed loop of straight and arc segments with a lane frame.

The road frame locates a pose by arclength ``s`` along the reference line
(the middle of the carriageway), lateral position ``d`` measured from the
right road edge (increasing leftwards), and the heading error against the
local tangent.  ``s`` wraps modulo the total length, which requires the
segment chain to close geometrically; the default network is a rounded square
of four 500 m straights joined by four quarter arcs of radius 400 m.

Lane index 0 is the rightmost lane; lane k is centred at ``(k + 0.5) *
lane_width``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class AmbiguousProjection(Exception):
    """Pose has no unique nearest point on the reference line."""


class OutOfRoad(Exception):
    """Lateral position outside the road's guard band."""


@dataclass(frozen=True)
class Segment:
    length: float
    curvature: float  # 0 for straights, +1/R left turns, -1/R right turns
    # global pose of the segment's start point on the reference line
    x0: float = 0.0
    y0: float = 0.0
    theta0: float = 0.0


@dataclass(frozen=True)
class RoadFramePose:
    s: float
    d: float
    heading_err: float


@dataclass(frozen=True)
class LaneOffsets:
    """Signed lateral offsets from the vehicle to nearby lane centres.

    ``c0`` points to the centre of the lane currently occupied; ``c_left`` /
    ``c_right`` to the adjacent lanes (falling back to ``c0`` at the road
    boundary).  The ``_near`` variants give the nearest centre strictly in
    that direction, which equals ``c0`` while the vehicle is off-centre with
    its own lane centre still ahead in that direction; these stay anchored to
    the destination centre throughout a lane change.
    """

    lane: int
    c0: float
    c_right: float
    c_left: float
    c_right_near: float
    c_left_near: float


@dataclass(frozen=True)
class RoadSpec:
    segments: tuple[Segment, ...]
    lane_count: int
    lane_width: float
    starts: tuple[float, ...] = field(default=(), compare=False)

    @property
    def total_length(self) -> float:
        return self.starts[-1]

    @property
    def width(self) -> float:
        return self.lane_count * self.lane_width

    def lane_center(self, k: int) -> float:
        return (k + 0.5) * self.lane_width

    def lane_of(self, d: float) -> int:
        return int(min(max(math.floor(d / self.lane_width), 0), self.lane_count - 1))

    def wrap_s(self, s: float) -> float:
        return s % self.total_length

    def signed_gap(self, s_a: float, s_b: float) -> float:
        """Arclength from b to a, wrapped into [-L/2, L/2)."""
        half = 0.5 * self.total_length
        return (s_a - s_b + half) % self.total_length - half


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def build_road(segments: list[tuple[float, float]], lane_count: int,
               lane_width: float) -> RoadSpec:
    """Chain (length, curvature) pieces into a RoadSpec with start poses.

    The chain must return to its start pose (closed loop) within 1e-6 m so
    that wrapping ``s`` is consistent with the global frame.
    """
    placed = []
    starts = [0.0]
    x, y, theta = 0.0, 0.0, 0.0
    for length, kappa in segments:
        placed.append(Segment(length, kappa, x, y, theta))
        starts.append(starts[-1] + length)
        if kappa == 0.0:
            x += length * math.cos(theta)
            y += length * math.sin(theta)
        else:
            r = 1.0 / kappa
            cx = x - r * math.sin(theta)
            cy = y + r * math.cos(theta)
            theta2 = theta + kappa * length
            x = cx + r * math.sin(theta2)
            y = cy - r * math.cos(theta2)
            theta = theta2
    if math.hypot(x, y) > 1e-6 or abs(_wrap_angle(theta)) > 1e-9:
        raise ValueError("segment chain does not close into a loop")
    return RoadSpec(tuple(placed), lane_count, lane_width, tuple(starts))


def default_road(lane_count: int = 3, lane_width: float = 3.5,
                 straight: float = 500.0, radius: float = 400.0) -> RoadSpec:
    """Rounded-square loop alternating straights and left quarter arcs."""
    arc = (0.5 * math.pi * radius, 1.0 / radius)
    segs = [(straight, 0.0), arc] * 4
    return build_road(segs, lane_count, lane_width)


def _segment_index(road: RoadSpec, s: float) -> int:
    s = road.wrap_s(s)
    idx = int(np.searchsorted(road.starts, s, side="right") - 1)
    return min(idx, len(road.segments) - 1)


def curvature_at(road: RoadSpec, s: float) -> float:
    return road.segments[_segment_index(road, s)].curvature


def embed(road: RoadSpec, pose: RoadFramePose) -> tuple[float, float, float]:
    """Road frame -> global (x, y, heading).

    Raises OutOfRoad when ``d`` is outside the one-lane-width guard band
    around the carriageway.
    """
    if not (-road.lane_width <= pose.d <= road.width + road.lane_width):
        raise OutOfRoad(f"d={pose.d:.3f} outside guard band")
    s = road.wrap_s(pose.s)
    seg = road.segments[_segment_index(road, s)]
    s_loc = s - road.starts[_segment_index(road, s)]
    e = pose.d - 0.5 * road.width  # offset from reference line, left positive
    if seg.curvature == 0.0:
        theta = seg.theta0
        cx = seg.x0 + s_loc * math.cos(theta)
        cy = seg.y0 + s_loc * math.sin(theta)
    else:
        r = 1.0 / seg.curvature
        ccx = seg.x0 - r * math.sin(seg.theta0)
        ccy = seg.y0 + r * math.cos(seg.theta0)
        theta = seg.theta0 + seg.curvature * s_loc
        cx = ccx + r * math.sin(theta)
        cy = ccy - r * math.cos(theta)
    x = cx - e * math.sin(theta)
    y = cy + e * math.cos(theta)
    return x, y, _wrap_angle(theta + pose.heading_err)


def project(road: RoadSpec, x: float, y: float, heading: float) -> RoadFramePose:
    """Global pose -> road frame (inverse of ``embed`` on the road).

    The nearest reference-line point over all segments wins.  Raises
    AmbiguousProjection when the pose sits at or beyond an arc's centre (no
    unique nearest point) or further than twice the road width from the
    reference line (outside the trust region of the nearest-segment rule).
    """
    best = None  # (abs_e, s, e, theta)
    tol = 1e-9
    for i, seg in enumerate(road.segments):
        if seg.curvature == 0.0:
            ct, st = math.cos(seg.theta0), math.sin(seg.theta0)
            t = (x - seg.x0) * ct + (y - seg.y0) * st
            if -tol <= t <= seg.length + tol:
                e = -(x - seg.x0) * st + (y - seg.y0) * ct
                cand = (abs(e), road.starts[i] + min(max(t, 0.0), seg.length), e,
                        seg.theta0, None)
            else:
                continue
        else:
            r = 1.0 / seg.curvature
            ccx = seg.x0 - r * math.sin(seg.theta0)
            ccy = seg.y0 + r * math.cos(seg.theta0)
            wx, wy = x - ccx, y - ccy
            dist_c = math.hypot(wx, wy)
            if dist_c < 1e-12:
                raise AmbiguousProjection("pose at arc centre")
            phi = math.atan2(wy, wx)
            theta_cand = phi + math.copysign(0.5 * math.pi, seg.curvature)
            dtheta = _wrap_angle(theta_cand - seg.theta0)
            if seg.curvature > 0 and dtheta < -tol:
                dtheta += 2.0 * math.pi
            if seg.curvature < 0 and dtheta > tol:
                dtheta -= 2.0 * math.pi
            s_loc = dtheta / seg.curvature
            if not (-tol <= s_loc <= seg.length + tol):
                continue
            e = (abs(r) - dist_c) * math.copysign(1.0, seg.curvature)
            theta = seg.theta0 + seg.curvature * min(max(s_loc, 0.0), seg.length)
            cand = (abs(e), road.starts[i] + min(max(s_loc, 0.0), seg.length), e,
                    theta, abs(r))
        if best is None or cand[0] < best[0]:
            best = cand
    if best is None:
        raise AmbiguousProjection("no segment candidate")
    abs_e, s, e, theta, arc_r = best
    if arc_r is not None and abs_e >= arc_r - 1e-9:
        raise AmbiguousProjection("pose beyond arc uniqueness radius")
    if abs_e > 2.0 * road.width:
        raise AmbiguousProjection("pose outside projection trust region")
    return RoadFramePose(road.wrap_s(s), e + 0.5 * road.width,
                         _wrap_angle(heading - theta))


def project_batch(road: RoadSpec, x, y, heading):
    """Vectorised ``project`` for vehicle arrays; returns (s, d, chi) arrays.

    Trust-region and uniqueness violations are not expected for simulated
    vehicles (they stay within the carriageway) and are reported with nan.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    n = x.shape[0]
    best_abse = np.full(n, np.inf)
    out_s = np.full(n, np.nan)
    out_e = np.full(n, np.nan)
    out_theta = np.full(n, np.nan)
    tol = 1e-9
    for i, seg in enumerate(road.segments):
        if seg.curvature == 0.0:
            ct, st = math.cos(seg.theta0), math.sin(seg.theta0)
            t = (x - seg.x0) * ct + (y - seg.y0) * st
            e = -(x - seg.x0) * st + (y - seg.y0) * ct
            ok = (t >= -tol) & (t <= seg.length + tol)
            theta = np.full(n, seg.theta0)
            s_glob = road.starts[i] + np.clip(t, 0.0, seg.length)
        else:
            r = 1.0 / seg.curvature
            ccx = seg.x0 - r * math.sin(seg.theta0)
            ccy = seg.y0 + r * math.cos(seg.theta0)
            wx, wy = x - ccx, y - ccy
            dist_c = np.hypot(wx, wy)
            phi = np.arctan2(wy, wx)
            theta_cand = phi + math.copysign(0.5 * math.pi, seg.curvature)
            dtheta = (theta_cand - seg.theta0 + math.pi) % (2.0 * math.pi) - math.pi
            if seg.curvature > 0:
                dtheta = np.where(dtheta < -tol, dtheta + 2.0 * math.pi, dtheta)
            else:
                dtheta = np.where(dtheta > tol, dtheta - 2.0 * math.pi, dtheta)
            s_loc = dtheta / seg.curvature
            ok = (s_loc >= -tol) & (s_loc <= seg.length + tol)
            e = (abs(r) - dist_c) * math.copysign(1.0, seg.curvature)
            s_clip = np.clip(s_loc, 0.0, seg.length)
            theta = seg.theta0 + seg.curvature * s_clip
            s_glob = road.starts[i] + s_clip
        abse = np.where(ok, np.abs(e), np.inf)
        better = abse < best_abse
        best_abse = np.where(better, abse, best_abse)
        out_s = np.where(better, s_glob, out_s)
        out_e = np.where(better, e, out_e)
        out_theta = np.where(better, theta, out_theta)
    s = np.remainder(out_s, road.total_length)
    d = out_e + 0.5 * road.width
    chi = (heading - out_theta + math.pi) % (2.0 * math.pi) - math.pi
    return s, d, chi


def lane_offsets(road: RoadSpec, d: float) -> LaneOffsets:
    """Offsets to the current and adjacent lane centres at lateral position d."""
    k = road.lane_of(d)
    own = road.lane_center(k) - d
    left = road.lane_center(k + 1) - d if k + 1 < road.lane_count else own
    right = road.lane_center(k - 1) - d if k - 1 >= 0 else own
    if own > 0.0:  # own centre is still to the left
        left_near = own
        right_near = right if k - 1 >= 0 else own
    elif own < 0.0:  # own centre is still to the right
        right_near = own
        left_near = left if k + 1 < road.lane_count else own
    else:
        left_near, right_near = left, right
    return LaneOffsets(k, own, right, left, right_near, left_near)
