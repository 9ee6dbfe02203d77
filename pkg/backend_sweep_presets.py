# backend_sweep_presets.py
import math
import re

from backend_errors import ConfigError
from backend_param_config import MINUTES_PER_DAY, PARAM_FIELDS, coerce_value

# value ranges considered for each parameter
SWEEP_PRESETS: dict[str, tuple] = {
    "random_failure_rate": tuple(r / MINUTES_PER_DAY for r in (0.005, 0.01, 0.025, 0.05)),
    "systematic_rate_multiplier": (3.0, 5.0, 10.0),
    "systematic_failure_fraction": (0.1, 0.15, 0.2),
    "recovery_time": (10.0, 20.0, 30.0),
    "warm_standbys": (4, 8, 16, 32),
    "host_selection_time": (1.0, 3.0, 5.0, 10.0),
    "waiting_time": (10.0, 20.0, 30.0),
    "auto_repair_probability": (0.7, 0.8, 0.9),
    "auto_fail_probability": (0.2, 0.4, 0.6),
    "manual_fail_probability": (0.1, 0.2, 0.3),
    "auto_repair_time": (60.0, 120.0, 180.0),
    "manual_repair_time": (1.0 * MINUTES_PER_DAY, 2.0 * MINUTES_PER_DAY, 3.0 * MINUTES_PER_DAY),
    # 0, 32 and 64 servers over job_size + warm_standbys
    "working_pool_size": (4128, 4160, 4192),
    "spare_pool_size": (200, 300, 400),
}

_RANGE_RE = re.compile(r"^\s*([^:]+?)\s*-\s*([^:-]+?)\s*:\s*(.+?)\s*$")


def preset_values(key: str) -> tuple:
    if key not in PARAM_FIELDS:
        raise ConfigError(f"unknown parameter {key!r}")
    if key not in SWEEP_PRESETS:
        raise ConfigError(f"no preset value list for {key!r}; pass the values explicitly")
    return SWEEP_PRESETS[key]


def _expand_range(key: str, meta: dict, item: str, m: re.Match) -> list:
    start, stop, step = (float(coerce_value(key, {"kind": "real"}, g)) for g in m.groups())
    if step <= 0:
        raise ConfigError(f"{key}: range step must be > 0 in {item!r}")
    if stop < start:
        raise ConfigError(f"{key}: range {item!r} runs backwards")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [coerce_value(key, meta, start + i * step) for i in range(n)]


def parse_value_list(key: str, text: str) -> tuple:
    """
    Parse a sweep value list for one parameter.

    Items are comma separated. An item is an arithmetic expression
    ("2*1440"), a bare word for choice fields, or an inclusive range
    "start-stop:step" ("4128-4192:32" -> 4128, 4160, 4192).
    """
    meta = PARAM_FIELDS.get(key)
    if meta is None:
        raise ConfigError(f"unknown parameter {key!r}")
    values = []
    for item in text.split(","):
        if not item.strip():
            continue
        m = _RANGE_RE.match(item) if ":" in item else None
        if m:
            values.extend(_expand_range(key, meta, item, m))
        else:
            values.append(coerce_value(key, meta, item.strip()))
    if not values:
        raise ConfigError(f"empty value list for {key!r}")
    return tuple(values)
