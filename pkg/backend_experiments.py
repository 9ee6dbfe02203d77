# backend_experiments.py
"""
One-way and two-way parameter sweeps with replications, and the summary
statistics reported per cell.
"""

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from backend_errors import ConfigError
from backend_job_orchestration import METRICS, RunResult, run_simulation
from backend_param_config import PARAM_FIELDS, SimParams, coerce_value
from backend_sim_kernel import derive_cell_seed
from backend_sweep_presets import parse_value_list, preset_values

logger = logging.getLogger(__name__)

PERCENTILES = (50, 90, 95, 99)
STAT_NAMES = ("mean", "median", "stddev", "p50", "p90", "p95", "p99", "min", "max")


@dataclass(frozen=True)
class StatsSummary:
    metric: str
    count: int
    mean: float
    median: float
    stddev: float
    p50: float
    p90: float
    p95: float
    p99: float
    min: float
    max: float

    def as_row(self) -> dict[str, float]:
        return {f"{self.metric}_{name}": getattr(self, name) for name in STAT_NAMES}


def nearest_rank(sorted_samples: np.ndarray, pct: int) -> float:
    """ceil(pct/100 * n)-th order statistic, 1-indexed. Integer arithmetic, no rounding surprises."""
    n = len(sorted_samples)
    rank = max(1, (pct * n + 99) // 100)
    return float(sorted_samples[rank - 1])


def summarize(samples: Sequence[float], metric: str = "value") -> StatsSummary:
    values = np.sort(np.asarray(list(samples), dtype=float))
    n = values.size
    if n == 0:
        raise ValueError(f"cannot summarize an empty sample ({metric})")
    stddev = float(np.std(values, ddof=1)) if n > 1 else 0.0
    p50, p90, p95, p99 = (nearest_rank(values, p) for p in PERCENTILES)
    return StatsSummary(
        metric=metric,
        count=int(n),
        mean=float(np.mean(values)),
        median=p50,
        stddev=stddev,
        p50=p50,
        p90=p90,
        p95=p95,
        p99=p99,
        min=float(values[0]),
        max=float(values[-1]),
    )


@dataclass(frozen=True)
class SweepSpec:
    display_name: str
    parameter_key: str
    values: tuple
    second_parameter: Optional[tuple[str, tuple]] = None
    replications: int = 10
    base_seed: int = 0

    @classmethod
    def create(
        cls,
        display_name: str,
        parameter_key: str,
        values,
        second_parameter: Optional[tuple[str, object]] = None,
        replications: int = 10,
        base_seed: int = 0,
    ) -> "SweepSpec":
        """Build a spec from raw values (numbers, expressions or a value-list string)."""
        second = None
        if second_parameter is not None:
            key2, values2 = second_parameter
            second = (key2, _coerce_values(key2, values2))
        spec = cls(
            display_name=display_name or parameter_key,
            parameter_key=parameter_key,
            values=_coerce_values(parameter_key, values),
            second_parameter=second,
            replications=int(replications),
            base_seed=int(base_seed),
        )
        return spec.validate()

    @property
    def keys(self) -> tuple[str, ...]:
        if self.second_parameter is None:
            return (self.parameter_key,)
        return (self.parameter_key, self.second_parameter[0])

    def validate(self) -> "SweepSpec":
        for key in self.keys:
            if key not in PARAM_FIELDS:
                raise ConfigError(f"unknown parameter {key!r}")
        if not self.values:
            raise ConfigError(f"sweep over {self.parameter_key!r} has no values")
        if self.second_parameter is not None:
            if self.second_parameter[0] == self.parameter_key:
                raise ConfigError(f"two-way sweep needs two distinct parameters, got {self.parameter_key!r} twice")
            if not self.second_parameter[1]:
                raise ConfigError(f"sweep over {self.second_parameter[0]!r} has no values")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        return self

    def grid(self) -> list[tuple]:
        """Cells in deterministic order: first parameter outer, second inner."""
        if self.second_parameter is None:
            return [(v,) for v in self.values]
        return list(itertools.product(self.values, self.second_parameter[1]))


def _coerce_values(key: str, values) -> tuple:
    if key not in PARAM_FIELDS:
        raise ConfigError(f"unknown parameter {key!r}")
    if isinstance(values, str):
        return parse_value_list(key, values)
    return tuple(coerce_value(key, PARAM_FIELDS[key], v) for v in values)


@dataclass
class SweepCell:
    index: int
    values: tuple
    seed: int
    stats: dict[str, StatsSummary] = field(default_factory=dict)
    runs: list[RunResult] = field(default_factory=list)


@dataclass
class SweepResult:
    spec: SweepSpec
    cells: list[SweepCell]

    @property
    def keys(self) -> tuple[str, ...]:
        return self.spec.keys


def _run_one(job: tuple[int, int, SimParams, int]) -> tuple[int, RunResult]:
    index, replication, params, seed = job
    return index, run_simulation(params, seed, replication)


def run_sweep(
    spec: SweepSpec,
    base: SimParams,
    workers: int = 1,
    cell_order: Optional[Sequence[int]] = None,
) -> SweepResult:
    """
    1) Validate the spec and build every cell's params before anything runs.
    2) Run `replications` replications per cell; cell i uses seed
       derive_cell_seed(base_seed, i) and replication index r.
    3) Reassemble runs in grid order and summarize each metric.

    cell_order only changes execution order, never the results.
    """
    spec.validate()
    grid = spec.grid()
    cells: list[SweepCell] = []
    cell_params: list[SimParams] = []
    for index, values in enumerate(grid):
        label = ", ".join(f"{k}={v!r}" for k, v in zip(spec.keys, values))
        try:
            params = base.override(**dict(zip(spec.keys, values)))
        except ConfigError as exc:
            raise ConfigError(f"cell {index} ({label}): {exc}") from exc
        cell_params.append(params)
        cells.append(SweepCell(index=index, values=values, seed=derive_cell_seed(spec.base_seed, index)))

    order = list(cell_order) if cell_order is not None else list(range(len(cells)))
    if sorted(order) != list(range(len(cells))):
        raise ConfigError("cell_order must be a permutation of the cell indices")

    jobs = [
        (i, r, cell_params[i], cells[i].seed)
        for i in order
        for r in range(spec.replications)
    ]
    logger.info("sweep %r: %d cells x %d replications", spec.display_name, len(cells), spec.replications)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        outcomes = [_run_one(job) for job in jobs]

    for index, run in outcomes:
        cells[index].runs.append(run)
    for cell in cells:
        cell.runs.sort(key=lambda run: run.replication)
        for metric in METRICS:
            cell.stats[metric] = summarize([getattr(run, metric) for run in cell.runs], metric)
        logger.info(
            "cell %d %s: mean total_time %.1f over %d runs",
            cell.index, cell.values, cell.stats["total_time"].mean, len(cell.runs),
        )
    return SweepResult(spec=spec, cells=cells)


def sweep_spec_from_document(sweep: dict[str, str], base: SimParams, **overrides) -> SweepSpec:
    """
    Build a SweepSpec from a [sweep] section, with CLI/UI values taking
    precedence. Missing value lists come from SWEEP_PRESETS; missing
    replications / base_seed fall back to the base params.
    """
    known = {"display_name", "parameter", "values", "second_parameter", "second_values", "replications", "base_seed"}
    unknown = set(sweep) - known
    if unknown:
        raise ConfigError(f"unknown [sweep] key(s): {', '.join(sorted(unknown))}")

    merged: dict = dict(sweep)
    merged.update({k: v for k, v in overrides.items() if v is not None})

    key = merged.get("parameter")
    if not key:
        raise ConfigError("no sweep parameter given")
    second = None
    if merged.get("second_parameter"):
        key2 = merged["second_parameter"]
        second = (key2, merged.get("second_values") or preset_values(key2))
    values = merged.get("values") or preset_values(key)

    replications = merged.get("replications", base.replications)
    base_seed = merged.get("base_seed", base.base_seed)
    return SweepSpec.create(
        display_name=str(merged.get("display_name") or key),
        parameter_key=key,
        values=values,
        second_parameter=second,
        replications=coerce_value("replications", PARAM_FIELDS["replications"], replications),
        base_seed=coerce_value("base_seed", PARAM_FIELDS["base_seed"], base_seed),
    )
