"""
Experiment file ingestion.

An experiment file is a JSON object::

    {
      "name": "example1",
      "weights": [[0.933, 0.067, 0, 0], ...],
      "x0": [10, 7, 4, 0],
      "eps_levels": [1, 0.5, 0.1],
      "detector": "yz",
      "threshold": "diameter",
      "mode": "table1",
      "max_steps": 100000
    }

Decimals are parsed exactly as written, row sums are checked against 1 with a
1e-9 tolerance, and only then are rows converted to floats and renormalized.
"""

from decimal import Decimal
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union
import json
import logging
import math
import re

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from src.core.detectors import DetectorKind, ThresholdKind
from src.core.dynamics import FjParams, NetworkState, WeightMatrix

logger = logging.getLogger(__name__)

ROW_SUM_TOLERANCE = Decimal("1e-9")


class ExperimentFileError(ValueError):
    """Malformed experiment file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = "<experiment>"):
        self.message = message
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


class ExperimentFile(BaseModel):
    """Schema of an experiment file."""
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    weights: List[List[Decimal]]
    x0: Union[List[List[Decimal]], List[Decimal]]
    eps_levels: List[Decimal]
    detector: Literal["yz", "min-rounds"] = "yz"
    threshold: Literal["diameter", "size"] = "diameter"
    mode: Literal["table1", "theorem"] = "table1"
    max_steps: Optional[int] = None
    fj_omega: Optional[List[Decimal]] = None

    @field_validator("weights")
    @classmethod
    def check_weights(cls, rows: List[List[Decimal]]) -> List[List[Decimal]]:
        n = len(rows)
        if n == 0:
            raise ValueError("weights must contain at least one row")
        for i, row in enumerate(rows):
            if len(row) != n:
                raise ValueError(f"weights row {i} has {len(row)} entries, expected {n}")
            if any(v < 0 for v in row):
                raise ValueError(f"weights row {i} has a negative entry")
            total = sum(row, Decimal(0))
            if abs(total - 1) > ROW_SUM_TOLERANCE:
                raise ValueError(f"weights row {i} sums to {total}, not 1 within {ROW_SUM_TOLERANCE}")
            if row[i] <= 0:
                raise ValueError(f"weights row {i} needs a positive diagonal entry")
        return rows

    @field_validator("eps_levels")
    @classmethod
    def check_levels(cls, levels: List[Decimal]) -> List[Decimal]:
        if not levels:
            raise ValueError("eps_levels must not be empty")
        if any(v <= 0 for v in levels):
            raise ValueError("every eps level must be strictly positive")
        for i, level in enumerate(levels):
            if not math.isfinite(float(level)) or float(level) <= 0:
                raise ValueError(f"eps level {i} ({level}) does not fit in a positive finite float")
        return levels

    @field_validator("x0")
    @classmethod
    def check_x0(cls, x0: Union[List[List[Decimal]], List[Decimal]]) -> Union[List[List[Decimal]], List[Decimal]]:
        for i, state in enumerate(x0):
            values = state if isinstance(state, list) else [state]
            if not all(math.isfinite(float(v)) for v in values):
                raise ValueError(f"x0 state {i} does not fit in a finite float")
        return x0

    @field_validator("max_steps")
    @classmethod
    def check_max_steps(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 1:
            raise ValueError("max_steps must be positive")
        return value

    @model_validator(mode="after")
    def check_shapes(self) -> "ExperimentFile":
        n = len(self.weights)
        rows = self.x0_rows
        if len(rows) != n:
            raise ValueError(f"x0 has {len(rows)} node states but weights cover {n} nodes")
        dims = {len(r) for r in rows}
        if len(dims) != 1 or 0 in dims:
            raise ValueError("every x0 state must have the same positive dimension")
        if self.fj_omega is not None:
            if len(self.fj_omega) != n:
                raise ValueError(f"fj_omega has {len(self.fj_omega)} entries, expected {n}")
            if any(v < 0 or v > 1 for v in self.fj_omega):
                raise ValueError("fj_omega entries must lie in [0, 1]")
        return self

    @property
    def x0_rows(self) -> List[List[Decimal]]:
        return [r if isinstance(r, list) else [r] for r in self.x0]

    @property
    def n(self) -> int:
        return len(self.weights)

    def weight_matrix(self) -> WeightMatrix:
        return WeightMatrix.from_rows([[float(v) for v in row] for row in self.weights])

    def initial_state(self) -> NetworkState:
        return NetworkState.of([[float(v) for v in row] for row in self.x0_rows])

    def fj_params(self) -> Optional[FjParams]:
        if self.fj_omega is None:
            return None
        return FjParams(omega=[float(v) for v in self.fj_omega], x0=self.initial_state().x)

    @property
    def levels(self) -> List[float]:
        return [float(v) for v in self.eps_levels]

    @property
    def detector_kind(self) -> DetectorKind:
        return DetectorKind(self.detector)

    @property
    def threshold_kind(self) -> ThresholdKind:
        return ThresholdKind(self.threshold)


def _line_of(text: str, key: Any) -> Optional[int]:
    if not isinstance(key, str):
        return None
    match = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    if match is None:
        return None
    return text.count("\n", 0, match.start()) + 1


def parse_experiment(text: str, source: str = "<experiment>", overrides: Optional[Dict[str, Any]] = None) -> ExperimentFile:
    """
    Parse and validate experiment text.

    ``overrides`` replace top-level keys after JSON decoding (used for CLI
    flags) and are validated like file content.

    Raises:
        ExperimentFileError: on syntax errors or schema/invariant violations
    """
    try:
        data = json.loads(text, parse_float=Decimal, parse_int=Decimal)
    except json.JSONDecodeError as e:
        raise ExperimentFileError(e.msg, line=e.lineno, source=source) from None
    if not isinstance(data, dict):
        raise ExperimentFileError("top level must be a JSON object", line=1, source=source)
    if "max_steps" in data and isinstance(data["max_steps"], Decimal):
        steps = data["max_steps"]
        data["max_steps"] = int(steps) if steps == steps.to_integral_value() else steps
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    try:
        experiment = ExperimentFile.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        loc = first.get("loc") or ("",)
        field = ".".join(str(p) for p in loc) or "file"
        message = first.get("msg", "invalid value").replace("Value error, ", "")
        raise ExperimentFileError(f"{field}: {message}", line=_line_of(text, loc[0]), source=source) from None

    logger.debug(f"Parsed experiment {experiment.name or source}: n={experiment.n}, levels={experiment.levels}")
    return experiment


def load_experiment(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> ExperimentFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ExperimentFileError(f"cannot read file: {e.strerror or e}", source=str(path)) from None
    except UnicodeDecodeError as e:
        raise ExperimentFileError(f"not valid UTF-8 (byte {e.start}): {e.reason}", source=str(path)) from None
    return parse_experiment(text, source=str(path), overrides=overrides)
