"""
Report assembly shared by every experiment.

A report is a plain dict: experiment name, config hash, effective params,
per-stage values, criteria with value/threshold/passed, and the overall
verdict. Task functions fill it in; run_task wraps them so that a LabError
marks the report failed instead of propagating.
"""

import hashlib
import json
import logging
import math
import time
from pathlib import Path
from typing import Any, Callable, Dict, Optional

from config.lab_config import LabConfig
from src.errors import LabError
from src.export import to_builtin, write_json

logger = logging.getLogger(__name__)

TaskFunction = Callable[[Any, Dict[str, Any], Path, LabConfig], None]


def config_hash(params: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON of the effective params."""
    canonical = json.dumps(to_builtin(params), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def new_report(experiment: str, params: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "experiment": experiment,
        "config_hash": config_hash(params),
        "params": to_builtin(params),
        "success": True,
        "stage": None,
        "stages": {},
        "criteria": [],
        "artifacts": [],
        "passed": False,
    }


def begin_stage(report: Dict[str, Any], stage: str) -> None:
    report["stage"] = stage
    logger.debug("%s: %s", report["experiment"], stage)


def record_stage(report: Dict[str, Any], stage: str, **values: Any) -> None:
    report["stages"].setdefault(stage, {}).update(to_builtin(values))


def add_artifact(report: Dict[str, Any], path: Path) -> None:
    report["artifacts"].append(str(path))


def add_criterion(
    report: Dict[str, Any],
    name: str,
    value: Any,
    threshold: Any,
    passed: bool,
    note: Optional[str] = None,
) -> bool:
    entry = {"name": name, "value": to_builtin(value), "threshold": to_builtin(threshold), "passed": bool(passed)}
    if note:
        entry["note"] = note
    report["criteria"].append(entry)
    return bool(passed)


def at_most(report: Dict[str, Any], name: str, value: float, threshold: float, note: Optional[str] = None) -> bool:
    passed = math.isfinite(value) and value <= threshold
    return add_criterion(report, name, value, f"<= {threshold:g}", passed, note)


def at_least(report: Dict[str, Any], name: str, value: float, threshold: float, note: Optional[str] = None) -> bool:
    passed = math.isfinite(value) and value >= threshold
    return add_criterion(report, name, value, f">= {threshold:g}", passed, note)


def within(report: Dict[str, Any], name: str, value: float, low: float, high: float, note: Optional[str] = None) -> bool:
    passed = low <= value <= high
    return add_criterion(report, name, value, f"[{low:g}, {high:g}]", passed, note)


def finish_report(report: Dict[str, Any]) -> Dict[str, Any]:
    criteria = report["criteria"]
    report["passed"] = bool(report["success"] and criteria and all(c["passed"] for c in criteria))
    return report


def run_task(
    experiment: str,
    task: TaskFunction,
    params: Any,
    out_dir: Path,
    config: LabConfig,
) -> Dict[str, Any]:
    """
    Run one experiment and write <experiment>_report.json.

    Args:
        experiment: Experiment name
        task: Function filling in the report
        params: Validated pydantic params
        out_dir: Output directory for data files and the report
        config: Numerical defaults

    Returns:
        The finished report dict
    """
    out_dir = Path(out_dir)
    report = new_report(experiment, params.model_dump())
    start = time.perf_counter()
    try:
        task(params, report, out_dir, config)
    except LabError as exc:
        logger.warning("%s failed in stage %s: %s", experiment, report["stage"], exc)
        report["success"] = False
        report["error"] = f"{type(exc).__name__}: {exc}"
        for criterion in report["criteria"]:
            criterion["passed"] = False
        add_criterion(report, "pipeline_completed", False, True, False, note=f"failed in stage {report['stage']}")
    report["wall_time"] = time.perf_counter() - start
    finish_report(report)
    report_path = write_json(report, out_dir / f"{experiment}_report.json")
    logger.info("%s: %s (%.2fs) -> %s", experiment, "PASS" if report["passed"] else "FAIL", report["wall_time"], report_path)
    return report
