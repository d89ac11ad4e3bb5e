from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional
import logging
import traceback

from src.core.config import get_config
from src.core.detectors import StopThreshold, ThresholdKind
from src.core.dynamics import ConsensusLaw, FriedkinJohnsenLaw, graph_of
from src.core.graph import is_strongly_connected
from src.core.importer import ExperimentFile
from src.core.models import ConsensusReport, ErgodicAnalysis, TraceRecord
from src.core.oracle import response_time_bound
from src.core.simulator import SimConfig, run

logger = logging.getLogger(__name__)


@dataclass
class LevelTask:
    """One simulated consensus level; ``status`` is pending, running, completed or failed."""
    level: float
    status: str = "pending"
    report: Optional[ConsensusReport] = None
    trace: List[TraceRecord] = field(default_factory=list)
    error: Optional[str] = None


@dataclass
class ExperimentResult:
    experiment: ExperimentFile
    strongly_connected: bool
    analysis: Optional[ErgodicAnalysis]
    tasks: List[LevelTask] = field(default_factory=list)

    @property
    def failed(self) -> List[LevelTask]:
        return [t for t in self.tasks if t.status != "completed"]

    @property
    def reports(self) -> List[ConsensusReport]:
        return [t.report for t in self.tasks if t.report is not None]


def build_config(
    experiment: ExperimentFile,
    level: float,
    record_trace: bool = True,
    max_steps: Optional[int] = None,
) -> SimConfig:
    """
    Translate one consensus level of an experiment into a simulator config.

    ``table1`` mode runs the detector at ``eps = level``; ``theorem`` mode runs
    it at ``level / threshold`` so that the guaranteed agreement is ``level``.
    """
    weights = experiment.weight_matrix()
    g = graph_of(weights)
    kind = experiment.threshold_kind
    if kind is ThresholdKind.DIAMETER and not is_strongly_connected(g):
        kind = ThresholdKind.SIZE
    threshold = StopThreshold.for_graph(kind, g)
    eps = level if experiment.mode == "table1" else level / threshold.value
    params = experiment.fj_params()
    law = FriedkinJohnsenLaw(params) if params is not None else ConsensusLaw()
    steps = max_steps or experiment.max_steps or get_config().runner.max_steps
    return SimConfig(
        weights=weights,
        x0=experiment.initial_state(),
        eps=eps,
        detector=experiment.detector_kind,
        threshold=threshold,
        max_steps=steps,
        record_trace=record_trace,
        level=level,
        law=law,
    )


class Supervisor:
    """
    Runs every consensus level of an experiment.

    Levels may execute on parallel workers; results are always returned in
    the order the levels were listed.
    """

    def __init__(self, workers: Optional[int] = None):
        self.workers = workers or get_config().runner.workers

    def run_experiment(self, experiment: ExperimentFile, record_trace: bool = False) -> ExperimentResult:
        weights = experiment.weight_matrix()
        connected = is_strongly_connected(graph_of(weights))
        analysis = response_time_bound(weights) if connected else None
        if not connected:
            logger.warning(f"Experiment {experiment.name or ''}: graph is not strongly connected")

        tasks = [LevelTask(level=level) for level in experiment.levels]
        if self.workers > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                list(pool.map(lambda t: self.run_task(t, experiment, record_trace), tasks))
        else:
            for task in tasks:
                self.run_task(task, experiment, record_trace)
        return ExperimentResult(
            experiment=experiment, strongly_connected=connected, analysis=analysis, tasks=tasks
        )

    @staticmethod
    def run_task(task: LevelTask, experiment: ExperimentFile, record_trace: bool) -> LevelTask:
        task.status = "running"
        logger.debug(f"Running level {task.level:.6g}")
        try:
            cfg = build_config(experiment, task.level, record_trace=record_trace)
            task.report, task.trace = run(cfg)
            task.status = "completed"
        except Exception as e:
            logger.error(f"Level {task.level:.6g} failed: {e}")
            task.status = "failed"
            task.error = f"{e}\n{traceback.format_exc()}"
        return task
