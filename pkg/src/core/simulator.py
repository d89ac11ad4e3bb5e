"""
Synchronous slot engine for locally stopped consensus.

One call to :func:`step` executes a slot for every active node in this order:

1. nodes holding a stop signal (or hearing silence from an in-neighbor) halt
   and pass the signal on;
2. active nodes broadcast ``x_i`` and ``min{y_i, z_i}``;
3. ``z`` is updated from the received values;
4. the detector's ``z`` hook runs: firing nodes halt and signal out-neighbors;
5. remaining active nodes update ``y`` from the broadcast states, then the
   detector's ``y`` hook runs (minimum-consensus fast rounds);
6. active nodes that did not fire apply the update law.

The ordering fixes every +/-1 in the measured times.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple
import logging

import numpy as np

from src.core.detectors import (
    BaseDetector,
    DetectorKind,
    DetectorState,
    StopThreshold,
    ThresholdKind,
    get_detector,
    local_consensus_test,
    propagate_stop,
    update_y,
    update_z_from_broadcast,
)
from src.core.dynamics import ConsensusLaw, NetworkState, UpdateLaw, WeightMatrix, graph_of
from src.core.graph import Digraph, is_strongly_connected
from src.core.models import (
    ConsensusReport,
    EventKind,
    RunMetrics,
    TraceEvent,
    TraceRecord,
)
from src.core.oracle import is_global_eps, is_uniform_local

logger = logging.getLogger(__name__)

DEFAULT_MAX_STEPS = 100000


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    weights: WeightMatrix
    x0: NetworkState
    eps: float
    detector: DetectorKind = DetectorKind.YZ
    threshold: Optional[StopThreshold] = None
    max_steps: int = DEFAULT_MAX_STEPS
    record_trace: bool = True
    # Consensus level the oracle measures against; defaults to ``eps``.
    level: Optional[float] = None
    law: UpdateLaw = field(default_factory=ConsensusLaw)

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be positive, got {self.max_steps}")
        if self.weights.n != self.x0.n:
            raise ValueError(f"Weights cover {self.weights.n} nodes but x0 has {self.x0.n}")
        object.__setattr__(self, "detector", DetectorKind(self.detector))
        if self.threshold is None:
            kind = ThresholdKind.DIAMETER if self.strongly_connected else ThresholdKind.SIZE
            if not self.strongly_connected:
                logger.warning("Graph is not strongly connected; falling back to the size threshold")
            object.__setattr__(self, "threshold", StopThreshold.for_graph(kind, self.graph))

    @cached_property
    def graph(self) -> Digraph:
        return graph_of(self.weights)

    @cached_property
    def strongly_connected(self) -> bool:
        return is_strongly_connected(self.graph)

    @cached_property
    def in_adj(self) -> List[List[int]]:
        return self.graph.in_adjacency()

    @cached_property
    def out_adj(self) -> List[List[int]]:
        return self.graph.out_adjacency()

    @cached_property
    def detector_impl(self) -> BaseDetector:
        return get_detector(self.detector)

    @property
    def measure_level(self) -> float:
        return self.eps if self.level is None else self.level

    @property
    def guarantee_level(self) -> float:
        return self.eps * self.threshold.value


@dataclass(frozen=True)
class SlotState:
    x: NetworkState
    nodes: Tuple[DetectorState, ...]
    events: Tuple[TraceEvent, ...] = ()

    @classmethod
    def initial(cls, x0: NetworkState) -> "SlotState":
        return cls(x=x0, nodes=tuple(DetectorState() for _ in range(x0.n)))

    @property
    def k(self) -> int:
        return self.x.k

    @property
    def active(self) -> FrozenSet[int]:
        return frozenset(i for i, d in enumerate(self.nodes) if not d.stopped)

    @property
    def all_stopped(self) -> bool:
        return all(d.stopped for d in self.nodes)

    def fired(self) -> List[int]:
        return [e.node for e in self.events if e.kind == EventKind.FIRED]

    def to_record(self) -> TraceRecord:
        return TraceRecord(
            k=self.k,
            x=np.array(self.x.x),
            y=tuple(d.y for d in self.nodes),
            z=tuple(d.z for d in self.nodes),
            stopped=tuple(d.stopped for d in self.nodes),
            events=list(self.events),
        )


def step(cfg: SimConfig, state: SlotState, metrics: Optional[RunMetrics] = None) -> SlotState:
    """Advance every active node by one slot."""
    if not state.active:
        raise SimulationError(f"No active node left at slot {state.k}")
    metrics = metrics if metrics is not None else RunMetrics()
    g, in_adj, out_adj = cfg.graph, cfg.in_adj, cfg.out_adj
    nodes = list(state.nodes)
    events: List[TraceEvent] = []

    # Stop signals from the previous slot; a silent in-neighbor counts as one.
    halting = sorted(
        i for i in state.active
        if nodes[i].stop_signal_received or any(nodes[j].stopped for j in in_adj[i])
    )
    for i in halting:
        nodes[i] = nodes[i].halt()
        events.append(TraceEvent(i, EventKind.HALTED))
    active = frozenset(i for i in state.active if i not in halting)

    received = [d.broadcast for d in nodes]
    fanout = sum(len(out_adj[j]) for j in active)
    metrics.state_broadcasts += fanout
    if cfg.detector is DetectorKind.YZ:
        metrics.counter_broadcasts += fanout

    z_next: Dict[int, int] = {i: update_z_from_broadcast(in_adj[i] + [i], received) for i in active}
    fired: Set[int] = cfg.detector_impl.fire_on_z(z_next, cfg.threshold)

    y_next: Dict[int, int] = {
        i: update_y(nodes[i].y, local_consensus_test(i, state.x, g, cfg.eps))
        for i in sorted(active - fired)
    }
    y_all = [y_next.get(i, d.y) for i, d in enumerate(nodes)]
    listening = active - fired
    metrics.fast_round_bits += cfg.detector_impl.fast_round_messages(g, listening, cfg.threshold)
    fired |= cfg.detector_impl.fire_on_y(g, y_all, listening, cfg.threshold)

    updating = sorted(active - fired)
    moved = cfg.law.step(cfg.weights, state.x)
    x_next = np.array(state.x.x)
    x_next[updating] = moved.x[updating]

    for i in active:
        nodes[i] = replace(nodes[i], z=z_next[i], y=y_next.get(i, nodes[i].y))
    for i in sorted(fired):
        nodes[i] = nodes[i].halt()
        events.append(TraceEvent(i, EventKind.FIRED))
        events.append(TraceEvent(i, EventKind.HALTED))

    senders = sorted(fired) + halting
    metrics.stop_signals += sum(len(out_adj[j]) for j in senders)
    inboxes = tuple(d.stop_signal_received for d in nodes)
    for i, signalled in enumerate(propagate_stop(g, senders, inboxes)):
        if signalled and not inboxes[i] and not nodes[i].stopped:
            nodes[i] = nodes[i].with_signal()
            events.append(TraceEvent(i, EventKind.STOP_SIGNAL))

    if events:
        logger.debug(f"slot {state.k + 1}: " + ", ".join(f"{e.kind.value}({e.node})" for e in events))
    return SlotState(x=NetworkState(x=x_next, k=state.k + 1), nodes=tuple(nodes), events=tuple(events))


def _measure(cfg: SimConfig) -> Tuple[Optional[int], Optional[int]]:
    """First global and uniformly local slots of the undisturbed dynamics within ``max_steps``."""
    global_time = uniform_time = None
    s = cfg.x0
    level = cfg.measure_level
    while True:
        if uniform_time is None and is_uniform_local(s, cfg.graph, level):
            uniform_time = s.k
        if global_time is None and is_global_eps(s, level):
            global_time = s.k
        if (global_time is not None and uniform_time is not None) or s.k >= cfg.max_steps:
            return global_time, uniform_time
        s = cfg.law.step(cfg.weights, s)


def run(cfg: SimConfig) -> Tuple[ConsensusReport, List[TraceRecord]]:
    """Iterate :func:`step` until every node halted or ``max_steps`` slots elapsed."""
    metrics = RunMetrics()
    report = ConsensusReport(
        level=cfg.measure_level,
        detector_eps=cfg.eps,
        guarantee_level=cfg.guarantee_level,
        detector=cfg.detector.value,
        threshold=cfg.threshold.kind.value,
        threshold_value=cfg.threshold.value,
        assumption_violated=not cfg.strongly_connected,
        guarantees_apply=cfg.law.guarantees_apply,
        metrics=metrics,
    )
    if report.assumption_violated:
        logger.warning("Assumption violated: the communication graph is not strongly connected")

    state = SlotState.initial(cfg.x0)
    trace: List[TraceRecord] = [state.to_record()] if cfg.record_trace else []
    while metrics.slots < cfg.max_steps and not state.all_stopped:
        state = step(cfg, state, metrics)
        metrics.slots += 1
        if cfg.record_trace:
            trace.append(state.to_record())
        if report.first_stop_time is None and state.fired():
            report.first_stop_time = state.k
            report.soundness = is_global_eps(state.x, cfg.guarantee_level)
        if state.all_stopped:
            report.all_stop_time = state.k

    if report.first_stop_time is None:
        logger.warning(f"No node stopped within {cfg.max_steps} slots (eps={cfg.eps:.6g})")
    report.global_eps_time, report.uniform_local_time = _measure(cfg)
    logger.info(
        f"level={report.level:.6g} eps={cfg.eps:.6g} detector={cfg.detector.value}: "
        f"consensus={report.global_eps_time} first_stop={report.first_stop_time} "
        f"all_stop={report.all_stop_time}"
    )
    return report, trace


def all_halt_latency(trace: Sequence[TraceRecord]) -> Optional[int]:
    """Slots between the first firing and the last node halting; None if either is missing."""
    first = next((r.k for r in trace if r.events_of(EventKind.FIRED)), None)
    if first is None or not trace or not all(trace[-1].stopped):
        return None
    last = max(r.k for r in trace if r.events_of(EventKind.HALTED))
    return last - first
