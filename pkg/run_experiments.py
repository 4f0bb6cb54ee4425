"""
Experiment runner for the cone blow-up lab.

Runs single experiments or the whole suite from a JSON config, writes data
files and one JSON report per experiment, and exits 0 iff every report
passed.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import ValidationError
from tqdm import tqdm

from config.lab_config import DEFAULT_CONFIG, PARAMS_MODELS, ExperimentConfig, ExperimentEntry, LabConfig
from src.export import to_builtin
from tasks.example_tasks import example51_task, example52_task
from tasks.reporting import TaskFunction, run_task
from tasks.solver_tasks import (
    ball_task,
    barrier_task,
    cap_task,
    coeff_task,
    eigen_task,
    solve_task,
    sphere_task,
    wedge_task,
)
from tasks.theorem_tasks import theorem1_task, theorem2_task


class DuplicateFilter(logging.Filter):
    """Filter that suppresses duplicate log messages."""
    def __init__(self):
        super().__init__()
        self.seen = set()

    def filter(self, record):
        msg = (record.levelno, record.getMessage())
        if msg in self.seen:
            return False
        self.seen.add(msg)
        return True


TASKS: Dict[str, TaskFunction] = {
    "wedge": wedge_task,
    "cap": cap_task,
    "sphere": sphere_task,
    "eigen": eigen_task,
    "coeff": coeff_task,
    "ball": ball_task,
    "solve": solve_task,
    "thm1": theorem1_task,
    "thm2": theorem2_task,
    "ex51": example51_task,
    "ex52": example52_task,
    "barrier": barrier_task,
}


def setup_logging(debug: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    for handler in logging.getLogger().handlers:
        handler.addFilter(DuplicateFilter())


def parse_resolution(value: Optional[str]) -> Optional[Union[int, str]]:
    """Grid size N or a preset name (quick, standard, fine)."""
    if value is None:
        return None
    if value in ("quick", "standard", "fine"):
        return value
    try:
        N = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"resolution must be an integer or quick/standard/fine, got '{value}'")
    if N <= 0:
        raise argparse.ArgumentTypeError("resolution must be positive")
    return N


def parse_overrides(items: List[str]) -> Dict[str, Any]:
    """key=value pairs; values are parsed as JSON when possible."""
    overrides = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"--set expects key=value, got '{item}'")
        try:
            overrides[key] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key] = raw
    return overrides


def load_config(path: Optional[str]) -> Optional[ExperimentConfig]:
    if path is None:
        return None
    with open(path, "r") as f:
        return ExperimentConfig.model_validate(json.load(f))


def select_entries(
    command: str,
    experiment_config: Optional[ExperimentConfig],
    overrides: Dict[str, Any],
) -> List[ExperimentEntry]:
    """
    Entries to run for a subcommand.

    `all` runs the config's experiments (or every experiment with defaults);
    a named subcommand runs the matching config entries, or one default
    entry when the config has none.
    """
    if command == "all":
        entries = experiment_config.experiments if experiment_config and experiment_config.experiments else \
            ExperimentConfig.default_suite().experiments
    else:
        entries = [e for e in (experiment_config.experiments if experiment_config else []) if e.name == command]
        entries = entries or [ExperimentEntry(name=command)]
    if overrides:
        entries = [ExperimentEntry(name=e.name, params={**e.params, **overrides}) for e in entries]
    return entries


def run_experiment(
    entry: ExperimentEntry,
    out_dir: Path,
    resolution: Optional[Union[int, str]],
    config: LabConfig,
    quiet: bool = False,
) -> Dict[str, Any]:
    """
    Run one config entry.

    Args:
        entry: Experiment name and raw params
        out_dir: Output directory for this entry
        resolution: Grid size or preset applied on top of the params
        config: Numerical defaults
        quiet: Suppress the banner

    Returns:
        The experiment report
    """
    params = entry.typed_params(resolution)
    if not quiet:
        print(f"\n{'='*70}")
        print(f"Running experiment: {entry.name}")
        print(f"{'='*70}")
        for key, value in params.model_dump().items():
            print(f"  {key}: {value}")
    report = run_task(entry.name, TASKS[entry.name], params, out_dir, config)
    if not quiet:
        print_report(report)
    return report


def print_report(report: Dict[str, Any]) -> None:
    verdict = "PASS" if report["passed"] else "FAIL"
    print(f"\n{report['experiment']}: {verdict}  ({report.get('wall_time', 0.0):.2f}s)")
    if report.get("error"):
        print(f"  Error: {report['error']}")
    for criterion in report["criteria"]:
        mark = "✓" if criterion["passed"] else "✗"
        print(f"  {mark} {criterion['name']}: {criterion['value']} (threshold {criterion['threshold']})")
    print(f"{'='*70}")


def run_suite(
    entries: List[ExperimentEntry],
    out_dir: Path,
    resolution: Optional[Union[int, str]],
    config: LabConfig,
    workers: int = 1,
    quiet: bool = False,
) -> List[Dict[str, Any]]:
    """Run entries in a worker pool; reports come back in entry order."""
    names = [e.name for e in entries]
    dirs = [out_dir / (e.name if names.count(e.name) == 1 else f"{e.name}_{i}") for i, e in enumerate(entries)]
    if workers <= 1 or len(entries) == 1:
        return [run_experiment(e, d, resolution, config, quiet) for e, d in zip(entries, dirs)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_experiment, e, d, resolution, config, True) for e, d in zip(entries, dirs)]
        reports = [f.result() for f in tqdm(futures, desc="experiments", disable=quiet)]
    if not quiet:
        for report in reports:
            print_report(report)
    return reports


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        description="Run cone blow-up lab experiments"
    )
    parser.add_argument(
        "command",
        choices=sorted(PARAMS_MODELS) + ["all"],
        help="Experiment to run, or 'all'"
    )
    parser.add_argument(
        "--config",
        type=str,
        default=None,
        help="JSON experiment config"
    )
    parser.add_argument(
        "--out",
        type=str,
        default=None,
        help="Output directory (default: config output_dir or ./experiments/results)"
    )
    parser.add_argument(
        "--resolution",
        type=str,
        default=None,
        help="Grid size N for every experiment, or a preset: quick, standard, fine"
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a parameter of the selected experiments (repeatable)"
    )
    parser.add_argument(
        "--workers",
        type=int,
        default=1,
        help="Experiments run concurrently (default: 1)"
    )
    parser.add_argument(
        "--json",
        action="store_true",
        help="Print the machine-readable report to stdout"
    )
    parser.add_argument(
        "--debug",
        action="store_true",
        help="Enable debug logging"
    )

    args = parser.parse_args(argv)
    setup_logging(args.debug)

    try:
        resolution = parse_resolution(args.resolution)
        experiment_config = load_config(args.config)
        entries = select_entries(args.command, experiment_config, parse_overrides(args.overrides))
        if resolution is None and experiment_config is not None:
            resolution = experiment_config.resolution
    except (argparse.ArgumentTypeError, ValidationError, OSError, json.JSONDecodeError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(args.out or (experiment_config.output_dir if experiment_config else "./experiments/results"))
    out_dir.mkdir(parents=True, exist_ok=True)
    config = replace(DEFAULT_CONFIG, seed=experiment_config.seed) if experiment_config else DEFAULT_CONFIG

    reports = run_suite(entries, out_dir, resolution, config, args.workers, quiet=args.json)
    passed = all(report["passed"] for report in reports)

    if args.json:
        print(json.dumps(to_builtin({"passed": passed, "reports": reports}), indent=2))
    else:
        print(f"\n{'='*70}")
        print(f"Suite {'PASSED' if passed else 'FAILED'}: "
              f"{sum(r['passed'] for r in reports)}/{len(reports)} experiments passed")
        print(f"Reports saved to: {out_dir}")
        print(f"{'='*70}\n")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
