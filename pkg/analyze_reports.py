"""
Summarize a directory of experiment reports.

Usage:
    python analyze_reports.py experiments/results
    python analyze_reports.py experiments/results --csv summary.csv -v
"""

import argparse
import json
from pathlib import Path
from typing import Any, Dict, List

import pandas as pd


def load_reports(root: str) -> List[Dict[str, Any]]:
    """Read every *_report.json below root."""
    reports = []
    for path in sorted(Path(root).rglob("*_report.json")):
        with open(path, "r") as f:
            report = json.load(f)
        report["_path"] = str(path)
        reports.append(report)
    return reports


def summary_table(reports: List[Dict[str, Any]]) -> pd.DataFrame:
    """One row per report: verdict, criteria counts, timing and failure stage."""
    rows = []
    for report in reports:
        criteria = report.get("criteria", [])
        rows.append({
            "experiment": report.get("experiment"),
            "passed": report.get("passed", False),
            "criteria_passed": sum(c.get("passed", False) for c in criteria),
            "criteria_total": len(criteria),
            "wall_time": report.get("wall_time"),
            "failed_stage": None if report.get("success", True) else report.get("stage"),
            "config_hash": str(report.get("config_hash", ""))[:12],
            "path": report["_path"],
        })
    return pd.DataFrame(rows)


def criteria_table(reports: List[Dict[str, Any]]) -> pd.DataFrame:
    """One row per criterion across all reports."""
    rows = []
    for report in reports:
        for criterion in report.get("criteria", []):
            rows.append({
                "experiment": report.get("experiment"),
                "criterion": criterion.get("name"),
                "value": criterion.get("value"),
                "threshold": criterion.get("threshold"),
                "passed": criterion.get("passed"),
            })
    return pd.DataFrame(rows, columns=["experiment", "criterion", "value", "threshold", "passed"])


def analyze_reports(root: str, csv_path: str = None, verbose: bool = False) -> pd.DataFrame:
    """
    Print a summary of the reports under root.

    Args:
        root: Directory searched recursively for reports
        csv_path: Optional path for the summary CSV
        verbose: Also print every criterion

    Returns:
        The summary table
    """
    print(f"\n{'='*70}")
    print(f"ANALYZING: {root}")
    print(f"{'='*70}\n")

    reports = load_reports(root)
    if not reports:
        print("No reports found.")
        return pd.DataFrame()

    table = summary_table(reports)
    print(table.drop(columns=["path"]).to_string(index=False))
    print(f"\nPassed: {int(table['passed'].sum())}/{len(table)}")

    failed = [r for r in reports if not r.get("success", True)]
    for report in failed:
        print(f"  {report['experiment']}: {report.get('error')}")

    if verbose:
        print(f"\n{'='*70}")
        print("CRITERIA")
        print(f"{'='*70}")
        print(criteria_table(reports).to_string(index=False))

    if csv_path:
        table.to_csv(csv_path, index=False)
        print(f"\nSummary saved to: {csv_path}")
    return table


def main():
    parser = argparse.ArgumentParser(
        description="Summarize cone blow-up lab experiment reports"
    )
    parser.add_argument(
        "root",
        type=str,
        help="Directory containing *_report.json files"
    )
    parser.add_argument(
        "--csv",
        type=str,
        default=None,
        help="Write the summary table to this CSV file"
    )
    parser.add_argument(
        "-v", "--verbose",
        action="store_true",
        help="Print every criterion"
    )

    args = parser.parse_args()
    analyze_reports(args.root, args.csv, verbose=args.verbose)


if __name__ == "__main__":
    main()
