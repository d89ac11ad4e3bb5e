"""
Local stopping detectors.

Two schemes decide, from purely local information, that the network has
reached uniformly local eps-consensus:

* ``yz``: the consecutive-success counter ``y`` plus the propagated minimum
  counter ``z``; a node halts once ``z >= threshold + 1``.
* ``min-rounds``: ``threshold`` rounds of one-bit minimum consensus on
  ``sign(y)`` between two slots; a node halts when the bit stays 1.

A halted node tells its out-neighbors to stop, which floods the network in at
most ``D`` further slots.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Sequence, Set, Tuple, Type

import numpy as np

from src.core.dynamics import NetworkState
from src.core.graph import Digraph, diameter


class ThresholdKind(str, Enum):
    DIAMETER = "diameter"
    SIZE = "size"


class DetectorKind(str, Enum):
    YZ = "yz"
    MIN_ROUNDS = "min-rounds"


@dataclass(frozen=True)
class DetectorState:
    """Per-node stopping counters ``y_i``, ``z_i`` and halt flags."""
    y: int = 0
    z: int = 0
    stopped: bool = False
    stop_signal_received: bool = False

    def halt(self) -> "DetectorState":
        return replace(self, stopped=True)

    def with_signal(self) -> "DetectorState":
        return replace(self, stop_signal_received=True)

    @property
    def broadcast(self) -> int:
        """The single integer a node shares each slot: ``min{y, z}``."""
        return min(self.y, self.z)


@dataclass(frozen=True)
class StopThreshold:
    kind: ThresholdKind
    value: int

    def __post_init__(self):
        if self.value < 1:
            raise ValueError(f"Stop threshold must be at least 1, got {self.value}")

    @classmethod
    def for_graph(cls, kind: ThresholdKind, g: Digraph) -> "StopThreshold":
        """``D`` for DIAMETER, ``N - 1`` for SIZE (when the diameter is unknown)."""
        kind = ThresholdKind(kind)
        if kind is ThresholdKind.DIAMETER:
            return cls(kind=kind, value=diameter(g))
        return cls(kind=kind, value=max(1, g.n - 1))

    @property
    def fire_at(self) -> int:
        return self.value + 1


@dataclass(frozen=True)
class RoundDetectorState:
    """Bits ``s_i(k, m)`` for every fast round ``m = 0..rounds``."""
    s: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        for bits in self.s:
            if any(b not in (0, 1) for b in bits):
                raise ValueError("Round detector bits must be 0 or 1")

    @property
    def rounds(self) -> int:
        return len(self.s) - 1

    @property
    def final(self) -> Tuple[int, ...]:
        return self.s[-1]


def sign(v: int) -> int:
    return 1 if v > 0 else 0


def local_consensus_test(i: int, s: NetworkState, g: Digraph, eps: float) -> bool:
    """``max_{j in N_i^-} ||x_i - x_j||_inf < eps``; vacuously true without in-neighbors."""
    g.check_node(i)
    neighbors = g.in_adjacency()[i]
    if not neighbors:
        return True
    diffs = np.abs(s.x[neighbors] - s.x[i])
    return bool(diffs.max() < eps)


def update_y(prev_y: int, locally_consensual: bool) -> int:
    return prev_y + 1 if locally_consensual else 0


def update_z(i: int, g: Digraph, y_all: Sequence[int], z_all: Sequence[int]) -> int:
    """``min_{j in N_i^- + {i}} {z_j, y_j} + 1``."""
    g.check_node(i)
    hood = g.in_adjacency()[i] + [i]
    return min(min(z_all[j], y_all[j]) for j in hood) + 1


def update_z_from_broadcast(hood: Iterable[int], received: Sequence[int]) -> int:
    """Same recurrence fed with the pre-minimized ``min{y_j, z_j}`` each node broadcasts."""
    return min(received[j] for j in hood) + 1


def check_stop(z: int, t: StopThreshold) -> bool:
    return z >= t.value + 1


def min_consensus_trace(g: Digraph, y_all: Sequence[int], rounds: int) -> RoundDetectorState:
    if rounds < 1:
        raise ValueError(f"Minimum consensus needs at least one round, got {rounds}")
    in_adj = g.in_adjacency()
    bits = tuple(sign(int(v)) for v in y_all)
    history = [bits]
    for _ in range(rounds):
        bits = tuple(min([bits[i]] + [bits[j] for j in in_adj[i]]) for i in g.nodes)
        history.append(bits)
    return RoundDetectorState(s=tuple(history))


def min_consensus_rounds(g: Digraph, y_all: Sequence[int], rounds: int) -> Tuple[int, ...]:
    """``s_i(k, rounds)`` for every node after ``rounds`` synchronous min-exchanges."""
    return min_consensus_trace(g, y_all, rounds).final


def propagate_stop(g: Digraph, stopped_now: Iterable[int], inboxes: Sequence[bool]) -> Tuple[bool, ...]:
    """Raise the stop flag of every out-neighbor of a newly stopped node."""
    out_adj = g.out_adjacency()
    updated = list(inboxes)
    for j in stopped_now:
        for i in out_adj[j]:
            updated[i] = True
    return tuple(updated)


class BaseDetector:
    """
    Firing rule plugged into the slot engine.

    ``fire_on_z`` runs right after the ``z`` update (before ``y``), and
    ``fire_on_y`` right after the ``y`` update; a detector overrides the hook
    that matches its scheme.
    """
    kind: DetectorKind

    def fire_on_z(self, z_next: Dict[int, int], threshold: StopThreshold) -> Set[int]:
        return set()

    def fire_on_y(
        self, g: Digraph, y_next: Sequence[int], active: FrozenSet[int], threshold: StopThreshold
    ) -> Set[int]:
        return set()

    def fast_round_messages(self, g: Digraph, active: FrozenSet[int], threshold: StopThreshold) -> int:
        return 0


class YZDetector(BaseDetector):
    kind = DetectorKind.YZ

    def fire_on_z(self, z_next: Dict[int, int], threshold: StopThreshold) -> Set[int]:
        return {i for i, z in z_next.items() if check_stop(z, threshold)}


class MinRoundsDetector(BaseDetector):
    kind = DetectorKind.MIN_ROUNDS

    def fire_on_y(
        self, g: Digraph, y_next: Sequence[int], active: FrozenSet[int], threshold: StopThreshold
    ) -> Set[int]:
        bits = min_consensus_rounds(g, y_next, threshold.value)
        return {i for i in active if bits[i] == 1}

    def fast_round_messages(self, g: Digraph, active: FrozenSet[int], threshold: StopThreshold) -> int:
        per_round = sum(1 for (i, j) in g.edges if j in active)
        return per_round * threshold.value


DETECTORS: Dict[DetectorKind, Type[BaseDetector]] = {
    DetectorKind.YZ: YZDetector,
    DetectorKind.MIN_ROUNDS: MinRoundsDetector,
}


def get_detector(kind) -> BaseDetector:
    try:
        return DETECTORS[DetectorKind(kind)]()
    except ValueError:
        known: List[str] = [k.value for k in DETECTORS]
        raise ValueError(f"Unknown detector {kind!r}; expected one of {known}") from None
