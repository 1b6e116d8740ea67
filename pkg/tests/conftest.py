"""Shared fixtures and scene-building helpers for the test suite."""

import math

import numpy as np
import pytest

from optiondrive.options import OptionContext, OptionParams
from optiondrive.road import default_road, lane_offsets
from optiondrive.safety import (LaneNeighbours, SafetyParams,
                                action_bounds_multi)

V_LIMIT = 130.0 / 3.6


@pytest.fixture(scope="session")
def road():
    return default_road()


def make_probe(road, width, table):
    """NeighbourProbe over a dict {lane index: LaneNeighbours}.

    Lanes missing from the table are empty (infinite gaps), matching how the
    environment reports unoccupied lanes.
    """

    def probe(d_probe):
        half = 0.5 * width
        k_lo = math.floor((d_probe - half) / road.lane_width)
        k_hi = math.floor((d_probe + half - 1e-9) / road.lane_width)
        return [table.get(k, LaneNeighbours())
                for k in range(max(k_lo, 0),
                               min(k_hi, road.lane_count - 1) + 1)]

    return probe


def make_ctx(v, d, road=None, table=None, v_limit=V_LIMIT, width=1.8,
             a_max=3.0, sp=None, op=None):
    """Build an OptionContext the same way the environment does."""
    road = road if road is not None else default_road()
    table = table or {}
    sp = sp or SafetyParams()
    op = op or OptionParams()
    off = lane_offsets(road, d)
    k0 = off.lane
    probe = make_probe(road, width, table)
    lanes_here = probe(d)
    left = (table.get(k0 + 1, LaneNeighbours())
            if k0 + 1 < road.lane_count else None)
    right = table.get(k0 - 1, LaneNeighbours()) if k0 - 1 >= 0 else None
    bounds = action_bounds_multi(v, lanes_here, left, right, off.c0,
                                 off.c_left_near, off.c_right_near,
                                 v_limit, a_max, sp)
    return OptionContext(v, d, off, bounds, probe, sp, op)


def finite_diff(f, arr, h=1e-5):
    """Central finite-difference gradient of scalar f() w.r.t. arr, in place."""
    g = np.zeros_like(arr)
    flat = arr.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        fp = f()
        flat[i] = keep - h
        fm = f()
        flat[i] = keep
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def gradcheck_max_rel_err(net, x, rng, h=1e-5):
    """Worst relative error of analytic vs numeric gradients.

    Uses the linear functional L = sum(C * forward(x)) with a fixed random
    C, whose upstream gradient is exactly C; checks every weight matrix,
    every bias vector and the input gradient.
    """
    C = rng.normal(size=(x.shape[0], net.spec.out_dim))

    def loss():
        return float(np.sum(C * net.forward(x)))

    (dWs, dbs), dx = net.backward(x, C)
    worst = 0.0
    pairs = list(zip(net.Ws, dWs)) + list(zip(net.bs, dbs)) + [(x, dx)]
    for arr, ana in pairs:
        num = finite_diff(loss, arr, h)
        scale = np.maximum(np.maximum(np.abs(num), np.abs(ana)), 1.0)
        worst = max(worst, float((np.abs(ana - num) / scale).max()))
    return worst
