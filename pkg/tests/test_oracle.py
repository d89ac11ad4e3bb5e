import numpy as np
import pytest

from src.core.dynamics import NetworkState, WeightMatrix, graph_of
from src.core.graph import Digraph, complete_digraph, ring_digraph
from src.core.models import ConsensusReport, ErgodicAnalysis
from src.core.oracle import (
    ContractViolation,
    OracleError,
    check_halt_latency,
    check_liveness,
    check_response_bound,
    consensus_time,
    contraction_check,
    ergodic_coefficient,
    first_slot,
    is_global_eps,
    is_uniform_local,
    lemma1_bound_check,
    min_ergodic_h,
    response_time_bound,
)
from tests.factories import EXAMPLE1_LEVELS

RANK_ONE = [[0.25] * 4 for _ in range(4)]


def test_global_eps_is_strict():
    s = NetworkState.of([0.0, 1.0])
    assert not is_global_eps(s, 1.0)
    assert is_global_eps(s, 1.0001)


def test_uniform_local_on_ring3(ring3, ring3_x0):
    g = graph_of(ring3)
    assert not is_uniform_local(ring3_x0, g, 0.5)
    assert is_uniform_local(NetworkState.of([1.0, 1.2, 1.1]), g, 0.5)


def test_ring3_is_locally_but_not_globally_close(ring3):
    # Node 0 agrees with its only in-neighbor while the network is far apart.
    g = graph_of(ring3)
    s = NetworkState.of([0.1, 0.1748, 12.525])
    assert not is_global_eps(s, 0.5)
    assert not is_uniform_local(s, g, 0.5)


def test_lemma1_bound(example1):
    g = graph_of(example1)
    s = NetworkState.of([1.0, 1.4, 1.6, 1.2])
    assert is_uniform_local(s, g, 0.5)
    assert lemma1_bound_check(s, g, 0.5)


def test_lemma1_bound_requires_strong_connectivity():
    with pytest.raises(OracleError):
        lemma1_bound_check(NetworkState.of([0.0, 0.0]), Digraph.from_edges(2, [(1, 0)]), 0.1)


def test_ergodic_coefficient_of_example1(example1):
    assert ergodic_coefficient(example1.a) == 0.0
    assert ergodic_coefficient(example1.power(2)) == pytest.approx(0.0594, abs=5e-4)


def test_ergodic_coefficient_identity_and_rank_one():
    assert ergodic_coefficient(np.eye(3)) == 0.0
    assert ergodic_coefficient(np.array(RANK_ONE)) == pytest.approx(1.0)


def test_ergodic_coefficient_input_errors():
    with pytest.raises(OracleError):
        ergodic_coefficient(np.ones((1, 1)))
    with pytest.raises(OracleError):
        ergodic_coefficient(np.ones((2, 3)))


def test_min_ergodic_h(example1, ring3):
    assert min_ergodic_h(example1, 3) == 2
    assert min_ergodic_h(ring3, 2) == 1
    with pytest.raises(ContractViolation):
        min_ergodic_h(example1, 1)


def test_response_time_bound_example1(example1):
    analysis = response_time_bound(example1)
    assert analysis.diameter == 3
    assert analysis.h == 2
    assert analysis.tau_h == pytest.approx(0.0594, abs=5e-4)
    assert analysis.bound == 40


def test_response_time_bound_rank_one():
    analysis = response_time_bound(WeightMatrix.from_rows(RANK_ONE))
    assert (analysis.diameter, analysis.h, analysis.bound) == (1, 1, 2)
    assert analysis.tau_h == pytest.approx(1.0)


def test_response_time_bound_ring3(ring3):
    analysis = response_time_bound(ring3)
    assert analysis.diameter == 2
    assert analysis.h == 1
    assert analysis.tau_h == pytest.approx(0.001)
    assert analysis.bound == 696


def test_response_time_bound_requires_strong_connectivity():
    with pytest.raises(OracleError):
        response_time_bound(WeightMatrix.from_rows([[1.0, 0.0], [0.5, 0.5]]))


def test_example1_consensus_times(example1, example1_x0):
    times = [consensus_time(example1, example1_x0, eps) for eps in EXAMPLE1_LEVELS]
    assert times == [15, 18, 23, 34, 44]


def test_consensus_time_never(ring3, ring3_x0):
    assert consensus_time(ring3, ring3_x0, 0.5, k_max=3) is None


def test_consensus_time_at_slot_zero(example1):
    assert consensus_time(example1, NetworkState.of([2.0] * 4), 0.1) == 0


def test_consensus_time_rejects_bad_horizon(example1, example1_x0):
    with pytest.raises(OracleError):
        consensus_time(example1, example1_x0, 0.1, k_max=0)


def test_first_slot_with_custom_predicate(example1, example1_x0):
    g = graph_of(example1)
    k = first_slot(lambda s: is_uniform_local(s, g, 1.0), example1, example1_x0)
    assert k is not None
    assert k <= consensus_time(example1, example1_x0, 1.0)


def test_contraction(example1, example1_x0, ring3, ring3_x0):
    assert contraction_check(example1, example1_x0, 2, slots=100)
    assert contraction_check(ring3, ring3_x0, 1, slots=100)


def test_contraction_rejects_zero_horizon(example1, example1_x0):
    with pytest.raises(OracleError):
        contraction_check(example1, example1_x0, 0)


def _report(**kwargs) -> ConsensusReport:
    return ConsensusReport(level=0.1, detector_eps=0.1, guarantee_level=0.3, **kwargs)


def test_liveness_check():
    assert check_liveness(_report(global_eps_time=10, first_stop_time=15), 3) == []
    assert check_liveness(_report(global_eps_time=10, first_stop_time=16), 3)
    assert check_liveness(_report(global_eps_time=10), 3)
    assert check_liveness(_report(), 3) == []


def test_halt_latency_check():
    assert check_halt_latency(_report(first_stop_time=10, all_stop_time=13), 3) == []
    assert check_halt_latency(_report(first_stop_time=10, all_stop_time=14), 3)


def test_response_bound_check():
    analysis = ErgodicAnalysis(h=2, tau_h=0.0594, diameter=3, bound=40)
    assert check_response_bound(_report(global_eps_time=10, first_stop_time=50), analysis) == []
    assert check_response_bound(_report(global_eps_time=10, first_stop_time=51), analysis)


def test_complete_and_ring_graphs_are_consistent():
    assert is_uniform_local(NetworkState.of([0.0, 0.3, 0.6]), ring_digraph(3), 0.5) is False
    assert is_uniform_local(NetworkState.of([0.0, 0.3, 0.45]), complete_digraph(3), 0.5)
