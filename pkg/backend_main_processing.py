# backend_main_processing.py
import logging
from typing import Optional

import pandas as pd

from backend_experiments import SweepResult, SweepSpec, run_sweep
from backend_param_config import SimParams
from backend_results_writer import raw_frame, summary_frame, write_results, write_workbook

logger = logging.getLogger(__name__)


def process_sweep(
    base_params: SimParams,
    spec: SweepSpec,
    workers: int = 1,
    out_path: Optional[str] = None,
    xlsx_path: Optional[str] = None,
) -> tuple[SweepResult, pd.DataFrame, pd.DataFrame]:
    """
    1) Run every cell of the sweep against the base parameters.
    2) Build the summary (one row per cell) and raw (one row per replication) tables.
    3) Optionally write the CSV pair and the Excel workbook.
    Returns (result, summary_df, raw_df).
    """
    result = run_sweep(spec, base_params, workers=workers)
    summary_df = summary_frame(result)
    raw_df = raw_frame(result)

    # Files only after every run has finished
    if out_path:
        write_results(result, out_path)
    if xlsx_path:
        write_workbook(result, xlsx_path)

    return result, summary_df, raw_df
