"""Random Waypoint mobility on a torus and proximity-based contact extraction.

Randomness comes from numpy's PCG64 bit generator seeded with ``seed``, which
produces the same stream on every platform. Draws happen in a fixed order:
first one (x, y) initial position per mobile node (skipped when initial
positions are given), then, frame by frame and node by node, every new leg
draws waypoint x, waypoint y and speed, in that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mobinfer.errors import ConfigError
from mobinfer.mobility import Geometry, MovementTrace, frame_time, pairwise_distances
from mobinfer.trace import ContactEvent, ContactTrace

GRID_ANCHORS = ((250.0, 250.0), (250.0, 750.0), (750.0, 250.0), (750.0, 750.0))


@dataclass(frozen=True)
class RwpConfig:
    """Random Waypoint scenario. Anchors take node ids 0..len(anchors)-1."""

    node_count: int = 50
    width: float = 1000.0
    height: float = 1000.0
    v_min: float = 1.0
    v_max_gen: float = 10.0
    pause: float = 0.0
    duration: float = 300.0
    dt: float = 1.0
    anchors: tuple[tuple[float, float], ...] = GRID_ANCHORS
    seed: int = 0
    initial_positions: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.node_count < len(self.anchors):
            raise ConfigError(
                f"node_count={self.node_count} smaller than anchor count {len(self.anchors)}"
            )
        if not 0 < self.v_min <= self.v_max_gen:
            raise ConfigError(f"need 0 < v_min <= v_max_gen, got {self.v_min}, {self.v_max_gen}")
        if self.pause < 0:
            raise ConfigError(f"pause must be >= 0, got {self.pause}")
        if self.duration < 0 or not self.dt > 0:
            raise ConfigError("duration must be >= 0 and dt > 0")
        if not (self.width > 0 and self.height > 0):
            raise ConfigError("torus dimensions must be positive")
        for x, y in self.anchors:
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise ConfigError(f"anchor ({x}, {y}) outside the torus")
        if self.initial_positions is not None:
            if len(self.initial_positions) != self.node_count:
                raise ConfigError("initial_positions must give one position per node")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def frame_count(self) -> int:
        return int(round(self.duration / self.dt)) + 1


def _shortest(delta: float, size: float) -> float:
    # maps into (-size/2, size/2], so exact half-way ties go the positive way
    half = size / 2
    return half - ((half - delta) % size)


def _wrap(v: float, size: float) -> float:
    v %= size
    # a tiny negative v rounds up to exactly size
    return 0.0 if v >= size else v


def generate_rwp(config: RwpConfig) -> MovementTrace:
    """Random Waypoint movement on a ``width`` x ``height`` torus.

    Mobile nodes travel in straight lines along the shortest torus path. A
    leg that ends inside a frame continues with the pause and the next leg
    for the time left in that frame.
    """
    rng = np.random.Generator(np.random.PCG64(config.seed))
    w, h = config.width, config.height
    n_anchor = len(config.anchors)
    n = config.node_count
    frames = np.empty((config.frame_count, n, 2))

    xs, ys = [0.0] * n, [0.0] * n
    for i in range(n):
        if i < n_anchor:
            xs[i], ys[i] = config.anchors[i]
        elif config.initial_positions is not None:
            xs[i], ys[i] = (float(c) for c in config.initial_positions[i])
            xs[i] = _wrap(xs[i], w)
            ys[i] = _wrap(ys[i], h)
        else:
            xs[i] = rng.random() * w
            ys[i] = rng.random() * h

    # per mobile node: unit direction, remaining leg length, speed, pause left
    ux, uy = [0.0] * n, [0.0] * n
    leg_left = [0.0] * n
    speed = [0.0] * n
    pause_left = [0.0] * n
    wp = [None] * n
    v_span = config.v_max_gen - config.v_min

    frames[0, :, 0] = xs
    frames[0, :, 1] = ys
    for k in range(1, config.frame_count):
        for i in range(n_anchor, n):
            remaining = config.dt
            while remaining > 0:
                if pause_left[i] > 0:
                    used = min(pause_left[i], remaining)
                    pause_left[i] -= used
                    remaining -= used
                    continue
                if wp[i] is None:
                    wx = rng.random() * w
                    wy = rng.random() * h
                    speed[i] = config.v_min + v_span * rng.random()
                    dx = _shortest(wx - xs[i], w)
                    dy = _shortest(wy - ys[i], h)
                    length = math.hypot(dx, dy)
                    wp[i] = (wx, wy)
                    leg_left[i] = length
                    if length > 0:
                        ux[i], uy[i] = dx / length, dy / length
                travel = speed[i] * remaining
                if travel < leg_left[i]:
                    xs[i] = _wrap(xs[i] + ux[i] * travel, w)
                    ys[i] = _wrap(ys[i] + uy[i] * travel, h)
                    leg_left[i] -= travel
                    remaining = 0.0
                else:
                    remaining -= leg_left[i] / speed[i]
                    xs[i], ys[i] = wp[i]
                    wp[i] = None
                    pause_left[i] = config.pause
        frames[k, :, 0] = xs
        frames[k, :, 1] = ys

    return MovementTrace(frames, config.dt, Geometry.torus(w, h))


def sample_stride(period: float, dt: float) -> int:
    m = period / dt
    stride = int(round(m))
    if stride < 1 or abs(m - stride) > 1e-9 * max(1.0, m):
        raise ConfigError(f"sampling period {period} is not a positive multiple of dt={dt}")
    return stride


def extract_contacts(trace: MovementTrace, r: float, period: float) -> ContactTrace:
    """Synchronized proximity sampling every ``period`` seconds.

    A pair within ``r`` at sample time k*period is in contact over
    [k*period, (k+1)*period), clipped to the trace duration; runs of
    consecutive in-range samples form one event.
    """
    stride = sample_stride(period, trace.dt)
    duration = trace.duration
    n = trace.node_count
    sample_idx = np.arange(0, trace.frame_count, stride)
    sample_times = np.round(sample_idx * trace.dt, 9)
    sample_idx = sample_idx[sample_times < duration]
    if len(sample_idx) == 0:
        return ContactTrace(n, duration, ())

    iu, ju = np.triu_indices(n, k=1)
    in_range = np.empty((len(sample_idx), len(iu)), dtype=bool)
    chunk = 256
    for s in range(0, len(sample_idx), chunk):
        d = pairwise_distances(trace.geometry, trace.frames[sample_idx[s : s + chunk]])
        in_range[s : s + chunk] = d[:, iu, ju] <= r

    padded = np.zeros((len(sample_idx) + 2, len(iu)), dtype=np.int8)
    padded[1:-1] = in_range
    edges = np.diff(padded, axis=0)
    start_k, start_p = np.nonzero(edges == 1)
    end_k, end_p = np.nonzero(edges == -1)
    # np.nonzero scans row-major, so re-sort both by (pair, sample) to pair them up
    so = np.lexsort((start_k, start_p))
    eo = np.lexsort((end_k, end_p))
    events = []
    for s, e, p in zip(start_k[so].tolist(), end_k[eo].tolist(), start_p[so].tolist()):
        t0 = frame_time(s, period)
        t1 = min(frame_time(e, period), duration)
        events.append(ContactEvent(int(iu[p]), int(ju[p]), t0, t1))
    return ContactTrace(n, duration, tuple(events))
