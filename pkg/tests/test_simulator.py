from dataclasses import replace

import numpy as np
import pytest

from src.core.detectors import DetectorKind, StopThreshold, ThresholdKind
from src.core.dynamics import FjParams, FriedkinJohnsenLaw, NetworkState, WeightMatrix, graph_of
from src.core.models import EventKind, TraceEvent
from src.core.oracle import check_counter_bounds, check_soundness
from src.core.simulator import SimConfig, SimulationError, SlotState, all_halt_latency, run, step
from tests.factories import EXAMPLE1_LEVELS

TABLE1_STOPS = [19, 22, 27, 38, 48]
THEOREM_STOPS = [23, 25, 30, 44, 51]
THEOREM_RESPONSES = [8, 7, 7, 10, 7]
MIN_ROUNDS_TABLE1_STOPS = [16, 19, 24, 35, 45]
MIN_ROUNDS_THEOREM_STOPS = [20, 22, 27, 41, 48]


def _config(w, x0, eps, **kwargs) -> SimConfig:
    return SimConfig(weights=w, x0=x0, eps=eps, **kwargs)


def test_first_slot_counters(example1, example1_x0):
    cfg = _config(example1, example1_x0, 1.0)
    state = step(cfg, SlotState.initial(example1_x0))
    assert state.k == 1
    assert [d.y for d in state.nodes] == [0, 0, 0, 0]
    assert [d.z for d in state.nodes] == [1, 1, 1, 1]
    assert not state.events


def test_constant_state_fires_after_threshold(example1):
    x0 = NetworkState.of([2.0] * 4)
    report, trace = run(_config(example1, x0, 0.1))
    assert [r.z[0] for r in trace[1:4]] == [1, 2, 3]
    assert report.first_stop_time == 4
    assert report.all_stop_time == 4
    assert report.soundness is True
    assert trace[4].events_of(EventKind.FIRED) == [0, 1, 2, 3]


def test_fired_nodes_keep_their_state(example1):
    x0 = NetworkState.of([2.0] * 4)
    _, trace = run(_config(example1, x0, 0.1))
    np.testing.assert_allclose(trace[-1].x, x0.x)


@pytest.mark.parametrize("level,expected", list(zip(EXAMPLE1_LEVELS, TABLE1_STOPS)))
def test_example1_detector_at_level(example1, example1_x0, level, expected):
    report, trace = run(_config(example1, example1_x0, level))
    assert report.first_stop_time == expected
    assert report.halt_latency == 0
    assert report.soundness is True
    assert report.guarantee_level == pytest.approx(3 * level)
    assert check_soundness(trace, report.guarantee_level) == []
    assert report.first_stop_time <= report.global_eps_time + 3 + 2


@pytest.mark.parametrize(
    "level,expected,response", list(zip(EXAMPLE1_LEVELS, THEOREM_STOPS, THEOREM_RESPONSES))
)
def test_example1_detector_at_level_over_diameter(example1, example1_x0, level, expected, response):
    report, trace = run(_config(example1, example1_x0, level / 3, level=level))
    assert report.first_stop_time == expected
    assert report.response_time == response
    assert report.response_time <= 40
    assert report.guarantee_level == pytest.approx(level)
    assert check_soundness(trace, level) == []


@pytest.mark.parametrize("level,expected", list(zip(EXAMPLE1_LEVELS, MIN_ROUNDS_TABLE1_STOPS)))
def test_example1_min_rounds(example1, example1_x0, level, expected):
    report, _ = run(_config(example1, example1_x0, level, detector=DetectorKind.MIN_ROUNDS))
    assert report.first_stop_time == expected
    assert report.soundness is True
    assert report.metrics.fast_round_bits > 0
    assert report.metrics.counter_broadcasts == 0


@pytest.mark.parametrize("level,expected", list(zip(EXAMPLE1_LEVELS, MIN_ROUNDS_THEOREM_STOPS)))
def test_example1_min_rounds_at_level_over_diameter(example1, example1_x0, level, expected):
    report, _ = run(
        _config(example1, example1_x0, level / 3, level=level, detector=DetectorKind.MIN_ROUNDS)
    )
    assert report.first_stop_time == expected


def test_detector_gap_on_example1(example1, example1_x0):
    # Uniform local consensus persists here, so YZ trails min-rounds by at most D + 1.
    for level in EXAMPLE1_LEVELS:
        yz, _ = run(_config(example1, example1_x0, level, record_trace=False))
        mr, _ = run(_config(example1, example1_x0, level, detector="min-rounds", record_trace=False))
        assert mr.first_stop_time <= yz.first_stop_time <= mr.first_stop_time + 3 + 1


def test_ring3_does_not_stop_within_three_slots(ring3, ring3_x0):
    report, trace = run(_config(ring3, ring3_x0, 0.5, max_steps=3))
    assert report.first_stop_time is None
    assert report.global_eps_time is None
    assert report.response_time is None
    assert len(trace) == 4
    assert max(trace[-1].z) <= 1
    np.testing.assert_allclose(trace[3].x[:, 0], [0.1, 0.1748, 12.525], atol=5e-4)


def test_counter_bounds_hold_on_example1(example1, example1_x0):
    _, trace = run(_config(example1, example1_x0, 0.1))
    assert check_counter_bounds(trace, graph_of(example1), 0.1) == []


def test_message_accounting(example1, example1_x0):
    cfg = _config(example1, example1_x0, 1.0)
    report, _ = run(cfg)
    # Five directed edges, every node active until the common stop slot.
    assert report.metrics.slots == report.all_stop_time
    assert report.metrics.state_broadcasts == 5 * report.metrics.slots
    assert report.metrics.counter_broadcasts == report.metrics.state_broadcasts
    assert report.metrics.stop_signals == 5
    assert report.metrics.messages == 2 * 5 * report.metrics.slots + 5


def test_halt_latency_from_trace(example1, example1_x0):
    _, trace = run(_config(example1, example1_x0, 0.5))
    assert all_halt_latency(trace) == 0


def test_stop_signal_floods_out_neighbors(example1):
    x0 = NetworkState.of([2.0] * 4)
    cfg = _config(example1, x0, 0.1)
    state = SlotState.initial(x0)
    nodes = list(state.nodes)
    nodes[3] = nodes[3].halt()
    state = SlotState(x=x0, nodes=tuple(nodes))
    nxt = step(cfg, state)
    # Node 3 is heard by nodes 1 and 2; both fall silent at once.
    assert sorted(e.node for e in nxt.events if e.kind == EventKind.HALTED) == [1, 2]
    assert nxt.nodes[0].stop_signal_received


def test_step_without_active_nodes(example1, example1_x0):
    cfg = _config(example1, example1_x0, 0.1)
    state = SlotState.initial(example1_x0)
    state = SlotState(x=state.x, nodes=tuple(d.halt() for d in state.nodes))
    with pytest.raises(SimulationError):
        step(cfg, state)


def test_size_threshold_fallback():
    w = WeightMatrix.from_rows([[1.0, 0.0], [0.5, 0.5]])
    report, _ = run(_config(w, NetworkState.of([0.0, 0.0]), 0.1))
    assert report.assumption_violated
    assert report.threshold == "size"
    assert report.threshold_value == 1
    assert report.first_stop_time == 2


def test_explicit_size_threshold(example1, example1_x0):
    threshold = StopThreshold(ThresholdKind.SIZE, 3)
    report, _ = run(_config(example1, example1_x0, 0.1, threshold=threshold))
    assert report.threshold == "size"
    assert report.first_stop_time == TABLE1_STOPS[2]


def test_friedkin_johnsen_law_disclaims_guarantees(ring3, ring3_x0):
    law = FriedkinJohnsenLaw(FjParams(omega=[0.9, 0.9, 0.9], x0=ring3_x0.x))
    report, _ = run(_config(ring3, ring3_x0, 0.5, max_steps=200, law=law))
    assert not report.guarantees_apply


def test_config_validation(example1, example1_x0):
    with pytest.raises(ValueError):
        _config(example1, example1_x0, 0.0)
    with pytest.raises(ValueError):
        _config(example1, example1_x0, 0.1, max_steps=0)
    with pytest.raises(ValueError):
        _config(example1, NetworkState.of([1.0, 2.0]), 0.1)


def test_counter_bounds_cover_the_firing_transition(example1, example1_x0):
    report, trace = run(_config(example1, example1_x0, 0.1))
    fire = next(n for n, r in enumerate(trace) if r.events)
    assert trace[fire].k == report.first_stop_time
    z = list(trace[fire].z)
    z[0] = trace[fire - 1].z[0] + 2
    tampered = trace[:fire] + [replace(trace[fire], z=tuple(z))]
    violations = check_counter_bounds(tampered, graph_of(example1), 0.1)
    assert f"slot {trace[fire - 1].k}: z_0 grew by more than one" in violations


def test_counter_bounds_flag_a_wrong_y_at_the_firing_slot(example1, example1_x0):
    _, trace = run(_config(example1, example1_x0, 0.1, detector=DetectorKind.MIN_ROUNDS))
    fire = next(n for n, r in enumerate(trace) if r.events)
    g = graph_of(example1)
    assert check_counter_bounds(trace[: fire + 1], g, 0.1) == []
    # Min-rounds fired, so every local test passed on the previous state; a node
    # that did not fire must then hold a positive y.
    y = list(trace[fire].y)
    y[1] = 0
    only_zero = [TraceEvent(0, EventKind.FIRED), TraceEvent(0, EventKind.HALTED)]
    tampered = trace[:fire] + [replace(trace[fire], y=tuple(y), events=only_zero)]
    assert f"slot {trace[fire - 1].k}: local test of node 1 is True but y_1(k+1) = 0" in check_counter_bounds(
        tampered, g, 0.1
    )


def test_engine_delivers_stop_signals_through_propagate_stop(example1, example1_x0, monkeypatch):
    import src.core.simulator as simulator

    calls = []
    real = simulator.propagate_stop

    def recording(g, senders, inboxes):
        calls.append(list(senders))
        return real(g, senders, inboxes)

    monkeypatch.setattr(simulator, "propagate_stop", recording)
    report, trace = run(_config(example1, example1_x0, 1.0))
    fire = next(r for r in trace if r.events)
    assert [0, 1, 2, 3] in calls
    # All four nodes fire together, so nobody is left to receive a signal.
    assert fire.events_of(EventKind.STOP_SIGNAL) == []
    assert report.metrics.stop_signals == 5
