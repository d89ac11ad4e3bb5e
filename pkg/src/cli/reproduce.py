"""
Built-in reproduction suite: reruns the bundled examples and checks every
stopping guarantee on the recorded traces.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional
import logging

import numpy as np

from src.core.config import get_config
from src.core.dynamics import consensus_step, graph_of
from src.core.graph import diameter
from src.core.importer import ExperimentFile
from src.core.models import ConsensusReport
from src.core.oracle import (
    check_attractiveness,
    check_counter_bounds,
    check_halt_latency,
    check_liveness,
    check_response_bound,
    check_soundness,
    consensus_time,
    contraction_check,
    min_ergodic_h,
    response_time_bound,
)
from src.core.scenarios import (
    REFERENCE_ANALYSIS,
    REFERENCE_TABLE,
    RING3_X3,
    STOPPING_TIME_TOLERANCE,
    load_scenario,
)
from src.core.stats import level_slug, level_table, render_table, write_trace_csv
from src.core.supervisor import ExperimentResult, Supervisor

logger = logging.getLogger(__name__)

X3_TOLERANCE = 5e-4
TAU_TOLERANCE = 5e-4
CONTRACTION_SLOTS = 100


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}" + (f"  ({self.detail})" if self.detail else "")


@dataclass
class ReproductionOutcome:
    checks: List[Check] = field(default_factory=list)
    reports: List[ConsensusReport] = field(default_factory=list)
    written: List[Path] = field(default_factory=list)

    @property
    def failures(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]


def _violations_check(name: str, violations: List[str]) -> Check:
    return Check(name, not violations, "; ".join(violations[:3]))


class ReproductionSuite:
    def __init__(
        self,
        mode: str = "table1",
        detector: Optional[str] = None,
        threshold: Optional[str] = None,
        csv_dir: Optional[Path] = None,
        supervisor: Optional[Supervisor] = None,
        k_max: Optional[int] = None,
    ):
        self.mode = mode
        self.k_max = k_max or get_config().runner.k_max
        self.overrides = {"mode": mode, "detector": detector, "threshold": threshold}
        self.csv_dir = Path(csv_dir) if csv_dir is not None else None
        self.supervisor = supervisor or Supervisor()

    def _scenario(self, name: str, **extra) -> ExperimentFile:
        base = load_scenario(name)
        updates = {k: v for k, v in {**self.overrides, **extra}.items() if v is not None}
        return base.model_copy(update=updates)

    def run(self) -> ReproductionOutcome:
        outcome = ReproductionOutcome()
        self._ring3(outcome)
        self._example1(outcome)
        return outcome

    def _ring3(self, outcome: ReproductionOutcome) -> None:
        ring = self._scenario("ring3")
        weights = ring.weight_matrix()
        s = ring.initial_state()
        for _ in range(3):
            s = consensus_step(weights, s)
        err = float(np.max(np.abs(s.scalar() - np.array(RING3_X3))))
        outcome.checks.append(
            Check("ring3 state after three slots", err <= X3_TOLERANCE, f"max error {err:.3g}")
        )

        result = self.supervisor.run_experiment(ring, record_trace=True)
        report = result.tasks[0].report
        quiet = report is not None and report.first_stop_time is None and report.global_eps_time is None
        outcome.checks.append(
            Check("ring3 no stop and no global consensus within three slots", quiet)
        )
        h = min_ergodic_h(weights, diameter(graph_of(weights)))
        outcome.checks.append(
            Check(
                f"ring3 contraction d(k+{h}) <= (1 - tau(A^{h})) d(k)",
                contraction_check(weights, ring.initial_state(), h, slots=CONTRACTION_SLOTS),
            )
        )
        self._write_traces("ring3", result, outcome)

    def _example1(self, outcome: ReproductionOutcome) -> None:
        example = self._scenario("example1")
        weights = example.weight_matrix()
        g = graph_of(weights)
        d = diameter(g)
        analysis = response_time_bound(weights)
        ref = REFERENCE_ANALYSIS
        outcome.checks.append(
            Check(
                "example1 ergodic analysis",
                analysis.diameter == ref["diameter"]
                and analysis.h == ref["h"]
                and abs(analysis.tau_h - ref["tau_h"]) <= TAU_TOLERANCE
                and analysis.bound == ref["bound"],
                f"D={analysis.diameter} h={analysis.h} tau={analysis.tau_h:.6g} bound={analysis.bound}",
            )
        )

        x0 = example.initial_state()
        times = {level: consensus_time(weights, x0, level, k_max=self.k_max) for level in example.levels}
        expected = {level: REFERENCE_TABLE[level].consensus_time for level in example.levels}
        outcome.checks.append(
            Check("example1 consensus times", times == expected, f"measured {list(times.values())}")
        )
        outcome.checks.append(
            Check(
                f"example1 contraction d(k+{analysis.h}) <= (1 - tau(A^{analysis.h})) d(k)",
                contraction_check(weights, x0, analysis.h, slots=CONTRACTION_SLOTS),
            )
        )

        result = self.supervisor.run_experiment(example, record_trace=True)
        for task in result.tasks:
            if task.report is None:
                outcome.checks.append(Check(f"example1 level {task.level:.6g} ran", False, task.error or ""))
                continue
            report = task.report
            report.reference_gap = _reference_gap(report)
            outcome.reports.append(report)
            tag = f"example1 level {task.level:.6g}"
            outcome.checks.append(
                _violations_check(f"{tag} soundness", check_soundness(task.trace, report.guarantee_level))
            )
            outcome.checks.append(
                _violations_check(f"{tag} counter bounds", check_counter_bounds(task.trace, g, report.detector_eps))
            )
            outcome.checks.append(
                _violations_check(f"{tag} attractiveness", check_attractiveness(task.trace, report.level))
            )
            outcome.checks.append(_violations_check(f"{tag} halt latency", check_halt_latency(report, d)))
            if report.detector_eps == report.level:
                outcome.checks.append(
                    _violations_check(f"{tag} liveness", check_liveness(report, report.threshold_value))
                )
            else:
                outcome.checks.append(
                    _violations_check(f"{tag} response bound", check_response_bound(report, analysis))
                )
        self._write_traces("example1", result, outcome)
        self._reference_gaps(outcome)

    def _reference_gaps(self, outcome: ReproductionOutcome) -> None:
        """Published stopping times correspond to detector eps = level / D."""
        example = self._scenario("example1", mode="theorem", detector="yz", threshold="diameter")
        result = self.supervisor.run_experiment(example)
        gaps: Dict[float, Optional[int]] = {t.level: _reference_gap(t.report) for t in result.tasks}
        within = all(g is not None and abs(g) <= STOPPING_TIME_TOLERANCE for g in gaps.values())
        detail = ", ".join(f"{lvl:.6g}:{'-' if g is None else f'{g:+d}'}" for lvl, g in gaps.items())
        outcome.checks.append(
            Check(f"example1 stopping times within {STOPPING_TIME_TOLERANCE} of reference", within, detail)
        )

    def _write_traces(self, name: str, result: ExperimentResult, outcome: ReproductionOutcome) -> None:
        if self.csv_dir is None:
            return
        for task in result.tasks:
            if task.trace:
                path = self.csv_dir / f"{name}_eps_{level_slug(task.level)}.csv"
                outcome.written.append(write_trace_csv(task.trace, path))
                logger.info(f"Wrote {path}")


def _reference_gap(report: Optional[ConsensusReport]) -> Optional[int]:
    if report is None or report.first_stop_time is None:
        return None
    ref = REFERENCE_TABLE.get(float(report.level))
    if ref is None:
        return None
    return report.first_stop_time - ref.stopping_time


def render_outcome(outcome: ReproductionOutcome) -> str:
    lines = [render_table(level_table(outcome.reports, extended=True)), ""]
    lines += [c.line() for c in outcome.checks]
    passed = len(outcome.checks) - len(outcome.failures)
    lines.append(f"{passed}/{len(outcome.checks)} checks passed")
    return "\n".join(lines)
