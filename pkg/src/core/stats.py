from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Union
import json

import pandas as pd

from src.core.models import NEVER, UNDEFINED, ConsensusReport, ErgodicAnalysis, TraceRecord

TABLE_COLUMNS = ["level", "consensus time", "stopping time", "response time"]


def fmt(value: Any) -> Any:
    """Six significant digits for floats; slots and markers pass through."""
    if value is None:
        return NEVER
    if isinstance(value, float):
        return f"{value:.6g}"
    return value


def trace_to_frame(trace: Sequence[TraceRecord]) -> pd.DataFrame:
    """
    One row per (slot, node) with header ``k,node,x...,y,z,stopped,event``.

    Scalar states use a single ``x`` column, vector states ``x0..x{m-1}``.
    """
    if not trace:
        return pd.DataFrame(columns=["k", "node", "x", "y", "z", "stopped", "event"])
    dim = trace[0].x.shape[1]
    x_cols = ["x"] if dim == 1 else [f"x{c}" for c in range(dim)]
    rows = []
    for record in trace:
        for i in range(len(record.y)):
            events = "|".join(e.kind.value for e in record.events if e.node == i)
            rows.append(
                [record.k, i, *record.x[i].tolist(), record.y[i], record.z[i], int(record.stopped[i]), events]
            )
    return pd.DataFrame(rows, columns=["k", "node", *x_cols, "y", "z", "stopped", "event"])


def write_trace_csv(trace: Sequence[TraceRecord], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trace_to_frame(trace).to_csv(path, index=False, float_format="%.6g")
    return path


def level_table(reports: Iterable[ConsensusReport], extended: bool = False) -> pd.DataFrame:
    """Response-time table, columns ordered level / consensus / stopping / response."""
    rows: List[List[Any]] = []
    for r in reports:
        response = r.response_time
        row = [
            fmt(float(r.level)),
            fmt(r.global_eps_time),
            fmt(r.first_stop_time),
            UNDEFINED if response is None else response,
        ]
        if extended:
            row += [
                fmt(r.all_stop_time),
                fmt(r.uniform_local_time),
                "-" if r.soundness is None else ("PASS" if r.soundness else "FAIL"),
                "-" if r.reference_gap is None else f"{r.reference_gap:+d}",
            ]
        rows.append(row)
    columns = list(TABLE_COLUMNS)
    if extended:
        columns += ["all halted", "uniform local", "sound", "reference gap"]
    return pd.DataFrame(rows, columns=columns)


def render_table(df: pd.DataFrame) -> str:
    return df.to_string(index=False)


def analysis_lines(analysis: ErgodicAnalysis) -> List[str]:
    return [
        f"D={analysis.diameter}",
        f"h={analysis.h}",
        f"tau(A^h)={analysis.tau_h:.6g}",
        f"bound={analysis.bound}",
    ]


def write_report_json(
    path: Union[str, Path],
    reports: Sequence[ConsensusReport],
    analysis: Optional[ErgodicAnalysis],
    name: Optional[str] = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "name": name,
        "analysis": analysis.to_dict() if analysis is not None else None,
        "runs": [r.to_dict() for r in reports],
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def level_slug(level: float) -> str:
    return f"{level:.6g}".replace(".", "p").replace("-", "m")
