import math

import numpy as np
import pytest

from mobinfer.errors import ConfigError, DomainError, SimulationError, TraceParseError
from mobinfer.inference import (
    InferenceParams,
    NodeConstraint,
    format_constraints,
    infer,
    initial_layout,
    parse_constraints,
    step,
)
from mobinfer.mobility import max_speed_violations, pairwise_distances
from mobinfer.synthetic import RwpConfig, extract_contacts, generate_rwp

from conftest import make_trace

P = InferenceParams()


def pair_distance(trace, a=0, b=1):
    return np.linalg.norm(trace.frames[:, a] - trace.frames[:, b], axis=-1)


def test_lone_node_stays_at_rest():
    trace = make_trace([], node_count=1, duration=30.0)
    out = infer(trace, None, [[3.0, 4.0]], P)
    assert np.all(out.frames == [[3.0, 4.0]])


def test_empty_trace_far_apart_nodes_do_not_move():
    # spacing beyond d_max, so not even repulsion acts
    init = [[0.0, 0.0], [400.0, 0.0], [0.0, 400.0], [400.0, 400.0]]
    out = infer(make_trace([], node_count=4, duration=20.0), None, init, P)
    assert out.frame_count == 201
    assert np.all(out.frames == np.array(init))


@pytest.mark.parametrize("start", [5.0, 20.0, 95.0, 250.0])
def test_contact_pair_settles_at_three_quarters_r(start):
    trace = make_trace([(0, 1, 0.0, 60.0)])
    out = infer(trace, None, [[0.0, 0.0], [start, 0.0]], P)
    d = pair_distance(out)
    assert abs(d[-1] - 75.0) < 1.0
    assert np.all(np.abs(d[-50:] - 75.0) < 1.0)


def test_clamped_output_respects_speed():
    trace = make_trace([(0, 1, 0.0, 30.0), (1, 2, 5.0, 20.0), (0, 3, 10.0, 30.0)])
    init = [[0, 0], [600, 0], [0, 600], [600, 600]]
    out = infer(trace, None, init, P)
    assert max_speed_violations(out, P.v_max) == []
    unclamped = infer(trace, None, init, InferenceParams(clamp_speed=False))
    assert max_speed_violations(unclamped, P.v_max) != []


def test_infer_equals_iterated_step():
    cfg = RwpConfig(node_count=8, anchors=((100.0, 100.0),), width=400, height=400,
                    duration=12, seed=9)
    movement = generate_rwp(cfg)
    trace = extract_contacts(movement, 100, 2.0)
    cons = {0: NodeConstraint.anchor(100, 100)}
    params = InferenceParams(seed=3)
    out = infer(trace, cons, movement.frames[0], params)

    pos = initial_layout(trace.node_count, params, cons, movement.frames[0])
    vel = np.zeros_like(pos)
    frames = [pos]
    for k in range(out.frame_count - 1):
        pos, vel = step(pos, vel, trace, cons, round(k * params.dt, 9), params)
        frames.append(pos)
    assert np.array_equal(out.frames, np.array(frames))


def test_step_past_end_rejected():
    trace = make_trace([(0, 1, 0.0, 1.0)])
    with pytest.raises(DomainError):
        step(np.zeros((2, 2)), np.zeros((2, 2)), trace, None, 0.95, P)


def test_non_finite_force_is_fatal():
    trace = make_trace([(0, 1, 0.0, 1.0)])
    pos = np.array([[0.0, 0.0], [np.nan, 0.0]])
    with pytest.raises(SimulationError, match="nodes"):
        step(pos, np.zeros((2, 2)), trace, None, 0.0, P)


def test_centroid_fixed_without_clamp():
    trace = make_trace([(0, 1, 0.0, 20.0), (2, 3, 0.0, 20.0), (1, 2, 5.0, 15.0)])
    rng = np.random.default_rng(0)
    init = rng.uniform(0, 200, size=(4, 2))
    out = infer(trace, None, init, InferenceParams(clamp_speed=False))
    centroid = out.frames.mean(axis=1)
    assert np.allclose(centroid, centroid[0], atol=1e-8)


def test_anchor_never_moves_and_pulls_others():
    trace = make_trace([(0, 1, 0.0, 30.0)])
    cons = {0: NodeConstraint.anchor(10.0, -20.0)}
    out = infer(trace, cons, [[999.0, 999.0], [200.0, -20.0]], P)
    assert np.all(out.frames[:, 0] == [10.0, -20.0])
    assert abs(pair_distance(out)[-1] - 75.0) < 1.0


def test_axis_head_and_tail():
    # node 3 is drawn forward towards a far anchor; the head must stay in front
    events = [(1, 3, 0.0, 60.0), (2, 3, 0.0, 60.0), (3, 4, 0.0, 60.0)]
    trace = make_trace(events, node_count=5)
    cons = {
        0: NodeConstraint.anchor(2000.0, 0.0),
        1: NodeConstraint.axis(0.0, "head"),
        2: NodeConstraint.axis(0.0, "tail"),
    }
    trace = make_trace(events + [(0, 4, 0.0, 60.0)], node_count=5)
    init = [[2000, 0], [50, 0], [-50, 0], [0, 10], [0, -10]]
    out = infer(trace, cons, init, P)
    assert np.all(out.frames[:, [1, 2], 1] == 0.0)
    free = out.frames[:, [3, 4], 0]
    assert np.all(out.frames[:, 1, 0] >= free.max(axis=1))
    assert np.all(out.frames[:, 2, 0] <= free.min(axis=1))
    # free nodes obey the speed limit; only the head/tail relocation may jump
    jumps = {node for node, _ in max_speed_violations(out, P.v_max)}
    assert jumps <= {1, 2}


def test_fallback_layout_deterministic_square():
    n = 16
    a = initial_layout(n, InferenceParams(seed=5))
    b = initial_layout(n, InferenceParams(seed=5))
    c = initial_layout(n, InferenceParams(seed=6))
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    half = math.sqrt(n) * P.r / 2
    assert np.all(np.abs(a) <= half)


def test_infer_deterministic_with_random_start():
    movement = generate_rwp(RwpConfig(node_count=10, anchors=(), width=500, height=500,
                                      duration=15, seed=1))
    trace = extract_contacts(movement, 100, 1.0)
    a = infer(trace, None, None, InferenceParams(seed=2))
    b = infer(trace, None, None, InferenceParams(seed=2))
    assert a == b
    assert max_speed_violations(a, P.v_max) == []


def test_torus_inference_stays_on_torus():
    movement = generate_rwp(RwpConfig(node_count=12, anchors=(), duration=30, seed=4))
    trace = extract_contacts(movement, 100, 1.0)
    params = InferenceParams(geometry="torus,1000,1000", record_interval=1.0)
    out = infer(trace, None, movement.frames[0], params)
    assert out.geometry == movement.geometry
    assert out.dt == 1.0 and out.frame_count == movement.frame_count
    assert max_speed_violations(out, P.v_max) == []


def test_record_interval_subsamples():
    trace = make_trace([(0, 1, 0.0, 10.0)])
    fine = infer(trace, None, [[0, 0], [200, 0]], P)
    coarse = infer(trace, None, [[0, 0], [200, 0]], InferenceParams(record_interval=1.0))
    assert np.array_equal(coarse.frames, fine.frames[::10])


def test_constraint_file_round_trip():
    text = "node_id,kind,x,y,role\n0,anchor,1.5,2,-\n3,axis,-,0,head\n4,axis,,0,tail\n"
    cons = parse_constraints(text)
    assert cons == {
        0: NodeConstraint.anchor(1.5, 2.0),
        3: NodeConstraint.axis(0.0, "head"),
        4: NodeConstraint.axis(0.0, "tail"),
    }
    assert parse_constraints(format_constraints(cons)) == cons


@pytest.mark.parametrize(
    "text, err",
    [
        ("node,kind\n", TraceParseError),
        ("node_id,kind,x,y,role\n0,axis,-,0,head\n1,axis,-,0,head\n", ConfigError),
        ("node_id,kind,x,y,role\n0,orbit,1,1,-\n", ConfigError),
        ("node_id,kind,x,y,role\n0,anchor,1,-,-\n", ConfigError),
        ("node_id,kind,x,y,role\n0,axis,-,0,middle\n", ConfigError),
    ],
)
def test_constraint_file_errors(text, err):
    with pytest.raises(err):
        parse_constraints(text)


def test_constraint_out_of_range_node():
    with pytest.raises(ConfigError):
        infer(make_trace([], node_count=2, duration=1.0), {5: NodeConstraint.anchor(0, 0)})
