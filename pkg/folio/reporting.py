from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .engine import RunReport
from .errors import InputError

logger = logging.getLogger(__name__)

REPORT_FORMATS = ("json", "csv")

_SUMMARY_COLUMNS = (
    "algorithm",
    "seed",
    "ls_achieved",
    "ls_star",
    "regret",
    "regret_bound",
    "bound_satisfied",
    "total_cost",
    "total_queries",
)


def _plain(value: Any) -> Any:
    """Turn numpy scalars and arrays into JSON-native values."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def _step_to_dict(step: Any) -> dict[str, Any]:
    return {
        "t": step.t,
        "realized_factor": step.realized_factor,
        "cost": step.cost,
        "portfolio": _plain(step.portfolio),
        "indices": _plain(step.indices),
        "i_tilde": step.i_tilde,
        "z_tilde": step.z_tilde,
        "queries": step.queries,
        "hoeffding_ok": step.hoeffding_ok,
        "estimate_ok": step.estimate_ok,
    }


def report_to_dict(report: RunReport, verbose: bool = False) -> dict[str, Any]:
    data: dict[str, Any] = {
        "algorithm": report.algorithm.value,
        "params": {key: _plain(value) for key, value in report.params.items()},
        "ls_achieved": report.ls_achieved,
        "ls_star": report.ls_star,
        "regret": report.regret,
        "regret_bound": report.regret_bound,
        "bound_satisfied": bool(report.bound_satisfied),
        "total_cost": report.total_cost,
        "total_queries": int(report.total_queries),
        "success_events": dict(report.success_events),
    }
    if verbose:
        data["per_step"] = [_step_to_dict(step) for step in report.steps]
    return data


def _summary_row(report: RunReport) -> dict[str, Any]:
    data = report_to_dict(report)
    data["seed"] = report.params.get("seed")
    return {column: data[column] for column in _SUMMARY_COLUMNS}


def _step_frame(reports: Sequence[RunReport]) -> pd.DataFrame:
    rows = []
    for report in reports:
        for step in report.steps:
            row = _step_to_dict(step)
            row["algorithm"] = report.algorithm.value
            row["seed"] = report.params.get("seed")
            for key in ("portfolio", "indices"):
                if row[key] is not None:
                    row[key] = " ".join(str(x) for x in row[key])
            rows.append(row)
    frame = pd.DataFrame(rows)
    leading = ["algorithm", "seed"]
    return frame[leading + [c for c in frame.columns if c not in leading]]


def write_report(reports: Sequence[RunReport], path: str | Path, fmt: str = "json", verbose: bool = False) -> None:
    """Write one or more reports.

    JSON holds a single object for a single run and a list otherwise. CSV holds
    one summary row per run, or one row per step with ``verbose``.
    """
    if fmt not in REPORT_FORMATS:
        raise InputError(f"unknown report format {fmt!r}, expected one of {REPORT_FORMATS}")
    if not reports:
        raise InputError("no reports to write")
    path = Path(path)
    if fmt == "json":
        payload: Any = [report_to_dict(report, verbose) for report in reports]
        with open(path, "w") as f:
            json.dump(payload[0] if len(payload) == 1 else payload, f, indent=2)
    elif verbose:
        _step_frame(reports).to_csv(path, index=False)
    else:
        pd.DataFrame([_summary_row(report) for report in reports]).to_csv(path, index=False)
    logger.info("Wrote %d report(s) to %s", len(reports), path)


@dataclass(frozen=True)
class ReplicationSummary:
    algorithm: str
    runs: int
    seeds: tuple[int, ...]
    bound_satisfied_fraction: float
    mean_regret: float
    max_regret: float
    mean_total_queries: float
    mean_ls_achieved: float
    ls_star_mean: float

    @property
    def failures(self) -> int:
        return self.runs - round(self.bound_satisfied_fraction * self.runs)


def summarize_replications(reports: Sequence[RunReport]) -> ReplicationSummary:
    """Fold replications in seed order so the summary does not depend on completion order."""
    if not reports:
        raise InputError("no replications to summarize")
    algorithms = {report.algorithm for report in reports}
    if len(algorithms) != 1:
        raise InputError(f"replications mix algorithms: {sorted(a.value for a in algorithms)}")
    ordered = sorted(reports, key=lambda report: report.params.get("seed", 0))
    regrets = np.array([report.regret for report in ordered])
    return ReplicationSummary(
        algorithm=ordered[0].algorithm.value,
        runs=len(ordered),
        seeds=tuple(int(report.params.get("seed", 0)) for report in ordered),
        bound_satisfied_fraction=sum(report.bound_satisfied for report in ordered) / len(ordered),
        mean_regret=float(regrets.mean()),
        max_regret=float(regrets.max()),
        mean_total_queries=float(np.mean([report.total_queries for report in ordered])),
        mean_ls_achieved=float(np.mean([report.ls_achieved for report in ordered])),
        ls_star_mean=float(np.mean([report.ls_star for report in ordered])),
    )
