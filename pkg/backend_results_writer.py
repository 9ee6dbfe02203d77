# backend_results_writer.py
"""
Summary CSV (one row per sweep cell), the `.raw.csv` sidecar (one row per
cell x replication) and the optional Excel workbook with both sheets.

Files are written to a temporary sibling and renamed into place, so an
I/O failure never leaves a partial file at the destination.
"""

import io
import logging
import os
import tempfile
from dataclasses import fields
from datetime import datetime
from typing import Callable, Optional

import pandas as pd

from backend_experiments import STAT_NAMES, SweepResult
from backend_job_orchestration import METRICS, RunResult

logger = logging.getLogger(__name__)

RAW_FIELDS = tuple(f.name for f in fields(RunResult) if f.name not in ("seed", "replication"))


def summary_columns(keys: tuple[str, ...]) -> list[str]:
    return [*keys] + [f"{metric}_{stat}" for metric in METRICS for stat in STAT_NAMES]


def summary_frame(result: SweepResult) -> pd.DataFrame:
    rows = []
    for cell in result.cells:
        row = dict(zip(result.keys, cell.values))
        for metric in METRICS:
            row.update(cell.stats[metric].as_row())
        rows.append(row)
    return pd.DataFrame(rows, columns=summary_columns(result.keys))


def raw_frame(result: SweepResult) -> pd.DataFrame:
    columns = ["cell", *result.keys, "replication", "seed", *RAW_FIELDS]
    rows = []
    for cell in result.cells:
        for run in cell.runs:
            row = {"cell": cell.index, **dict(zip(result.keys, cell.values))}
            row.update(run.as_dict())
            rows.append(row)
    return pd.DataFrame(rows, columns=columns)


def raw_path_for(path: str) -> str:
    """recovery.csv -> recovery.raw.csv"""
    root, ext = os.path.splitext(path)
    return f"{root}.raw{ext or '.csv'}"


def _stage(path: str, write: Callable[[str], None]) -> str:
    """Write into a temporary sibling of `path` and return its name."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=os.path.splitext(path)[1], dir=directory)
    os.close(fd)
    try:
        write(tmp)
    except BaseException:
        _discard(tmp)
        raise
    return tmp


def _discard(path: str) -> None:
    if os.path.isfile(path):
        os.remove(path)


def _commit(pairs: list[tuple[str, str]]) -> None:
    """Rename every staged file into place; all or none of the targets remain."""
    placed = []
    try:
        for tmp, target in pairs:
            os.replace(tmp, target)
            placed.append(target)
    except BaseException:
        for tmp, _ in pairs:
            _discard(tmp)
        for target in placed:
            _discard(target)
        raise


def _atomic_write(path: str, write: Callable[[str], None]) -> None:
    _commit([(_stage(path, write), path)])


def frame_to_csv_text(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, lineterminator="\n")


def _text_writer(text: str) -> Callable[[str], None]:
    def _write(tmp: str) -> None:
        with open(tmp, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    return _write


def write_results(result: SweepResult, path: str) -> tuple[str, str]:
    """
    Write the summary CSV and its raw sidecar. Returns both paths.

    1. Render both tables to text.
    2. Stage each into a temporary sibling of its destination.
    3. Rename both into place; if either rename fails, neither file is left.
    """
    raw_path = raw_path_for(path)
    summary, raw = summary_frame(result), raw_frame(result)
    staged = []
    try:
        for target, frame in ((path, summary), (raw_path, raw)):
            staged.append((_stage(target, _text_writer(frame_to_csv_text(frame))), target))
    except BaseException:
        for tmp, _ in staged:
            _discard(tmp)
        raise
    _commit(staged)
    logger.info("wrote %d rows to %s and %d rows to %s", len(summary), path, len(raw), raw_path)
    return path, raw_path


def _write_sheets(result: SweepResult, target) -> None:
    with pd.ExcelWriter(target, engine="openpyxl") as writer:
        summary_frame(result).to_excel(writer, sheet_name="summary", index=False)
        raw_frame(result).to_excel(writer, sheet_name="raw", index=False)


def write_workbook(result: SweepResult, path: str) -> str:
    """Excel copy of the same data: sheets `summary` and `raw`."""
    _atomic_write(path, lambda tmp: _write_sheets(result, tmp))
    logger.info("wrote workbook %s", path)
    return path


def workbook_bytes(result: SweepResult) -> bytes:
    buffer = io.BytesIO()
    _write_sheets(result, buffer)
    return buffer.getvalue()


def export_meta_lines(result: SweepResult, generated_on: Optional[datetime] = None) -> list[str]:
    """`#` header lines for interactive downloads; files written by write_results carry none."""
    spec = result.spec
    stamp = (generated_on or datetime.now()).strftime("%Y-%m-%d %H:%M:%S")
    lines = [
        f"# Cluster Reliability Sweep - {spec.display_name}",
        f"# Generated on: {stamp}",
        f"# Parameter: {spec.parameter_key} = {', '.join(map(str, spec.values))}",
    ]
    if spec.second_parameter is not None:
        key2, values2 = spec.second_parameter
        lines.append(f"# Second parameter: {key2} = {', '.join(map(str, values2))}")
    lines += [
        f"# Replications per cell: {spec.replications}",
        f"# Base seed: {spec.base_seed}",
        "# Times are in minutes.",
    ]
    return lines
