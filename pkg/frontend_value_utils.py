# frontend_value_utils.py
from typing import Optional

import pandas as pd

from backend_errors import ConfigError
from backend_param_config import MINUTES_PER_DAY
from backend_sweep_presets import SWEEP_PRESETS, parse_value_list


def format_value(value) -> str:
    """Compact text for a text box: 2880.0 -> "2880", 6.944e-06 -> "6.944e-06"."""
    if isinstance(value, float):
        if value.is_integer():
            return str(int(value))
        return f"{value:.6g}"
    return str(value)


def format_value_list(values) -> str:
    return ", ".join(format_value(v) for v in values)


def preset_text(key: str) -> str:
    """Text to pre-fill the values box with; empty when the parameter has no preset."""
    return format_value_list(SWEEP_PRESETS[key]) if key in SWEEP_PRESETS else ""


def parse_values_box(key: str, text: str) -> tuple[tuple, Optional[str]]:
    """
    Parse what the user typed into a values box.
    Returns (values, error message or None) so the page can show st.error.
    """
    if not text.strip():
        return (), f"Enter at least one value for {key}."
    try:
        return parse_value_list(key, text), None
    except ConfigError as exc:
        return (), str(exc)


def grid_preview(keys: list[str], value_lists: list[tuple]) -> pd.DataFrame:
    """
    One row per sweep cell in run order (first parameter outer), so the
    user sees how many cells the sweep will run before starting it.
    """
    if len(keys) == 1:
        return pd.DataFrame({keys[0]: list(value_lists[0])})
    index = pd.MultiIndex.from_product(value_lists, names=keys)
    return index.to_frame(index=False)


def minutes_label(minutes: float) -> str:
    """1440 -> "1.0 d", 135 -> "2.2 h", 20 -> "20 min"."""
    if minutes >= MINUTES_PER_DAY:
        return f"{minutes / MINUTES_PER_DAY:.1f} d"
    if minutes >= 60:
        return f"{minutes / 60:.1f} h"
    return f"{minutes:.0f} min"
