"""
Writers for experiment outputs: CSV tables, JSON headers and reports,
gnuplot-ready .dat files.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def ensure_dir(path: Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def to_builtin(value: Any) -> Any:
    """Recursively convert numpy scalars and arrays for json.dumps."""
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if np.isfinite(value):
            return value
        return str(value)
    return value


def write_json(data: Dict[str, Any], path: Path) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    path.write_text(json.dumps(to_builtin(data), indent=2), encoding="utf-8")
    return path


def write_table(frame: pd.DataFrame, path: Path, header: Optional[Dict[str, Any]] = None) -> Path:
    """CSV of the frame, plus <stem>.json next to it when a header is given."""
    path = Path(path)
    ensure_dir(path.parent)
    frame.to_csv(path, index=False)
    if header is not None:
        write_json(header, path.with_suffix(".json"))
    logger.debug("wrote %s (%d rows)", path, len(frame))
    return path


def write_dat(columns: Dict[str, np.ndarray], path: Path) -> Path:
    """Whitespace-separated columns with a '# name name' header line."""
    path = Path(path)
    ensure_dir(path.parent)
    names = list(columns)
    data = np.column_stack([np.asarray(columns[name], dtype=float) for name in names])
    np.savetxt(path, data, header=" ".join(names), comments="# ", fmt="%.12e")
    return path
