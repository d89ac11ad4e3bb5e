from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

# Rendered markers for absent slot values.
NEVER = "NEVER"
UNDEFINED = "UNDEFINED"


def slot_or_never(value: Optional[int]) -> Any:
    return NEVER if value is None else int(value)


class EventKind(str, Enum):
    FIRED = "FIRED"
    STOP_SIGNAL = "STOP_SIGNAL"
    HALTED = "HALTED"


@dataclass(frozen=True)
class TraceEvent:
    node: int
    kind: EventKind


@dataclass
class TraceRecord:
    """Network snapshot taken after every update of slot ``k`` completed."""
    k: int
    x: np.ndarray
    y: Tuple[int, ...]
    z: Tuple[int, ...]
    stopped: Tuple[bool, ...]
    events: List[TraceEvent] = field(default_factory=list)

    def events_of(self, kind: EventKind) -> List[int]:
        return [e.node for e in self.events if e.kind == kind]


@dataclass
class RunMetrics:
    """Slot and message accounting for one run."""
    slots: int = 0
    state_broadcasts: int = 0
    counter_broadcasts: int = 0
    fast_round_bits: int = 0
    stop_signals: int = 0

    @property
    def messages(self) -> int:
        return self.state_broadcasts + self.counter_broadcasts + self.fast_round_bits + self.stop_signals

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slots": self.slots,
            "state_broadcasts": self.state_broadcasts,
            "counter_broadcasts": self.counter_broadcasts,
            "fast_round_bits": self.fast_round_bits,
            "stop_signals": self.stop_signals,
            "messages": self.messages,
        }


@dataclass
class ConsensusReport:
    """Oracle measurements of one run; ``None`` slots mean NEVER."""
    level: float
    detector_eps: float
    guarantee_level: float
    detector: str = "yz"
    threshold: str = "diameter"
    threshold_value: int = 1
    global_eps_time: Optional[int] = None
    uniform_local_time: Optional[int] = None
    first_stop_time: Optional[int] = None
    all_stop_time: Optional[int] = None
    # None until a node fires; then whether the guarantee held at that slot.
    soundness: Optional[bool] = None
    assumption_violated: bool = False
    guarantees_apply: bool = True
    reference_gap: Optional[int] = None
    metrics: RunMetrics = field(default_factory=RunMetrics)

    @property
    def response_time(self) -> Optional[int]:
        if self.first_stop_time is None or self.global_eps_time is None:
            return None
        return self.first_stop_time - self.global_eps_time

    @property
    def halt_latency(self) -> Optional[int]:
        if self.first_stop_time is None or self.all_stop_time is None:
            return None
        return self.all_stop_time - self.first_stop_time

    def to_dict(self) -> Dict[str, Any]:
        response = self.response_time
        return {
            "level": self.level,
            "detector_eps": self.detector_eps,
            "guarantee_level": self.guarantee_level,
            "detector": self.detector,
            "threshold": self.threshold,
            "threshold_value": self.threshold_value,
            "global_eps_time": slot_or_never(self.global_eps_time),
            "uniform_local_time": slot_or_never(self.uniform_local_time),
            "first_stop_time": slot_or_never(self.first_stop_time),
            "all_stop_time": slot_or_never(self.all_stop_time),
            "response_time": UNDEFINED if response is None else response,
            "soundness": self.soundness,
            "assumption_violated": self.assumption_violated,
            "guarantees_apply": self.guarantees_apply,
            "reference_gap": self.reference_gap,
            "metrics": self.metrics.to_dict(),
        }


@dataclass(frozen=True)
class ErgodicAnalysis:
    """Diameter, minimal ergodic exponent ``h`` and the response-time bound."""
    h: int
    tau_h: float
    diameter: int
    bound: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "diameter": self.diameter,
            "h": self.h,
            "tau_h": self.tau_h,
            "bound": self.bound,
        }
