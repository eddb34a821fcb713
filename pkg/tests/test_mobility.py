import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mobinfer.errors import DomainError, TraceParseError, TraceValidationError
from mobinfer.mobility import (
    Geometry,
    MovementTrace,
    distance,
    format_movement_trace,
    max_speed_violations,
    pairwise_distances,
    parse_movement_trace,
    positions_at,
)

TORUS = Geometry.torus(1000, 1000)


def image_oracle(p, q, w, h):
    """Minimum over the 9 translated copies of q."""
    return min(
        math.hypot(q[0] + i * w - p[0], q[1] + j * h - p[1])
        for i, j in itertools.product((-1, 0, 1), repeat=2)
    )


def test_plane_distance():
    assert distance(Geometry(), (0, 0), (3, 4)) == 5


def test_torus_wraparound():
    assert distance(TORUS, (10, 10), (990, 10)) == pytest.approx(20)


@pytest.mark.parametrize(
    "q, expected",
    [
        # both offsets are exactly half the torus, so no image is closer
        ((600, 600), 707.1067811865476),
        ((700, 700), 565.6854249492381),
    ],
)
def test_torus_diagonal_matches_image_oracle(q, expected):
    assert image_oracle((100, 100), q, 1000, 1000) == pytest.approx(expected, rel=1e-12)
    assert distance(TORUS, (100, 100), q) == pytest.approx(expected, rel=1e-12)


coord = st.floats(0, 999.999, allow_nan=False)


@given(coord, coord, coord, coord)
def test_torus_distance_properties(x1, y1, x2, y2):
    p, q = (x1, y1), (x2, y2)
    d = distance(TORUS, p, q)
    assert d == pytest.approx(image_oracle(p, q, 1000, 1000), abs=1e-9)
    assert d == pytest.approx(distance(TORUS, q, p), abs=1e-12)
    assert 0 <= d <= math.hypot(500, 500) + 1e-9
    assert d <= distance(Geometry(), p, q) + 1e-9
    assert (d == 0) == (p == q)


def test_pairwise_matches_scalar(rng):
    pos = rng.uniform(0, 1000, size=(7, 2))
    mat = pairwise_distances(TORUS, pos)
    for i, j in itertools.product(range(7), repeat=2):
        assert mat[i, j] == pytest.approx(distance(TORUS, pos[i], pos[j]), abs=1e-9)


def walk(step, frames=5, dt=1.0):
    xs = np.arange(frames) * step
    return MovementTrace(np.stack([xs, np.zeros(frames)], axis=-1)[:, None, :], dt)


def test_speed_violations():
    assert max_speed_violations(walk(0.0), 1.0) == []
    assert max_speed_violations(walk(2.0), 1.0) == [(0, k) for k in range(4)]
    assert max_speed_violations(walk(1.0), 1.0) == []
    assert max_speed_violations(walk(0.5, dt=0.5), 1.0) == []


def test_speed_violations_on_torus_use_wrap():
    frames = np.array([[[999.5, 0.0]], [[0.5, 0.0]]])
    assert max_speed_violations(MovementTrace(frames, 1.0, TORUS), 1.0) == []


def test_speed_violations_need_two_frames():
    with pytest.raises(DomainError):
        max_speed_violations(walk(1.0, frames=1), 1.0)


def test_positions_at_rounds_to_nearest_frame():
    tr = walk(1.0, frames=5, dt=0.5)
    assert positions_at(tr, 0)[0, 0] == 0
    assert positions_at(tr, 1.2)[0, 0] == 2.0  # frame 2
    assert positions_at(tr, tr.duration)[0, 0] == 4.0
    with pytest.raises(DomainError):
        positions_at(tr, 3.0)


def test_trace_validation():
    with pytest.raises(TraceValidationError):
        MovementTrace(np.zeros((2, 3, 3)), 1.0)
    with pytest.raises(TraceValidationError):
        MovementTrace(np.zeros((2, 3, 2)), 0.0)
    with pytest.raises(TraceValidationError):
        MovementTrace(np.full((1, 1, 2), 1000.0), 1.0, TORUS)
    with pytest.raises(TraceValidationError):
        Geometry("torus", 0, 10)


def test_csv_round_trip(rng):
    tr = MovementTrace(rng.uniform(0, 1000, size=(4, 3, 2)), 0.5, TORUS)
    text = format_movement_trace(tr)
    assert text.splitlines()[0] == "# geometry=torus,1000.0,1000.0,dt=0.5,n=3"
    assert text.splitlines()[1] == "t,node_id,x,y"
    assert parse_movement_trace(text) == tr
    plane = MovementTrace(rng.normal(size=(2, 2, 2)), 1.0)
    assert parse_movement_trace(format_movement_trace(plane)) == plane


def test_csv_rejects_unordered_nodes():
    text = "# geometry=plane,dt=1.0,n=2\nt,node_id,x,y\n0.0,1,0,0\n0.0,0,1,1\n"
    with pytest.raises(TraceValidationError):
        parse_movement_trace(text)
    with pytest.raises(TraceParseError):
        parse_movement_trace("t,node_id,x,y\n")
