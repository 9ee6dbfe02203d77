# backend_init__.py

from backend_errors import (
    ConfigError,
    ConfigParseError,
    InvariantViolation,
    JobStarvedError,
    SimulationFault,
    SimulatorError,
)
from backend_param_config import (
    SimParams,
    load_config,
    parse_config,
    parse_config_document,
    serialize_params,
)
from backend_sweep_presets import SWEEP_PRESETS, parse_value_list, preset_values
from backend_job_orchestration import METRICS, RunResult, run_simulation
from backend_experiments import StatsSummary, SweepResult, SweepSpec, run_sweep, summarize, sweep_spec_from_document
from backend_results_writer import raw_frame, summary_frame, write_results, write_workbook
from backend_main_processing import process_sweep
