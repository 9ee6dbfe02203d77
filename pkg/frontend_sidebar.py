# frontend_sidebar.py
import streamlit as st

from backend_param_config import PARAM_FIELDS, SimParams
from backend_sweep_presets import SWEEP_PRESETS
from frontend_value_utils import format_value, minutes_label, preset_text

# Sidebar builder (all sections closed by default)

FIELD_GROUPS = {
    "💥 Failures": [
        "random_failure_rate",
        "systematic_rate_multiplier",
        "systematic_failure_fraction",
        "failure_distribution",
        "regeneration_period",
    ],
    "🧠 Training Job": [
        "job_size",
        "job_length",
        "warm_standbys",
        "recovery_time",
        "host_selection_time",
        "waiting_time",
        "host_selection_policy",
        "preemption_cost_per_server",
    ],
    "🗄️ Server Pools": ["working_pool_size", "spare_pool_size"],
    "🔧 Repairs": [
        "auto_repair_probability",
        "auto_fail_probability",
        "manual_fail_probability",
        "auto_repair_time",
        "manual_repair_time",
        "diagnosis_uncertainty",
        "removal_threshold",
        "removal_window",
    ],
}

SWEEPABLE = [
    k for k, meta in PARAM_FIELDS.items() if meta["kind"] not in ("flag", "integer") and k != "replications"
]
DURATION_KINDS = {"duration", "positive_duration", "optional_duration"}


def _param_input(key: str, value, widget_prefix: str = "ui_param_"):
    meta = PARAM_FIELDS[key]
    kind = meta["kind"]
    label = key.replace("_", " ").capitalize()
    if kind == "choice":
        choices = list(meta["choices"])
        return st.selectbox(label, choices, index=choices.index(value), key=widget_prefix + key)
    if kind == "flag":
        return st.checkbox(label, value=bool(value), key=widget_prefix + key)
    help_text = "Arithmetic is allowed, e.g. 2*1440 or 0.01/(24*60)."
    if kind.startswith("optional_"):
        help_text += " Type none to switch the mechanism off."
    if kind in DURATION_KINDS and isinstance(value, (int, float)):
        help_text += f" Current: {minutes_label(value)}."
    return st.text_input(label, value=format_value(value) if value is not None else "none",
                         key=widget_prefix + key, help=help_text)


def render_sidebar_controls(base: SimParams):
    """Render parameter groups + sweep setup in the sidebar. Values come back as typed (strings for numbers)."""
    sb = st.sidebar
    sb.markdown("## 🧪 Experiment Builder")

    overrides = {}
    for title, keys in FIELD_GROUPS.items():
        with sb.expander(title, expanded=False):
            for key in keys:
                overrides[key] = _param_input(key, getattr(base, key))

    # 🔁 Sweep
    with sb.expander("🔁 Parameter Sweep", expanded=True):
        sweep_name = st.text_input("Experiment name", value="sweep", key="ui_sweep_name")
        default_key = "recovery_time" if "recovery_time" in SWEEPABLE else SWEEPABLE[0]
        parameter = st.selectbox("Swept parameter", SWEEPABLE, index=SWEEPABLE.index(default_key), key="ui_parameter")
        # keyed per parameter so switching parameter reloads its preset
        values_text = st.text_input(
            "Values (comma list or start-stop:step)",
            value=preset_text(parameter),
            key=f"ui_values_{parameter}",
        )
        if parameter not in SWEEP_PRESETS:
            st.caption("No preset list for this parameter; type the values.")

        two_way = st.checkbox("Two-way sweep", value=False, key="ui_two_way")
        second_parameter, second_values_text = None, None
        if two_way:
            others = [k for k in SWEEPABLE if k != parameter]
            second_default = "working_pool_size" if "working_pool_size" in others else others[0]
            second_parameter = st.selectbox(
                "Second parameter", others, index=others.index(second_default), key="ui_second_parameter"
            )
            second_values_text = st.text_input(
                "Second values",
                value=preset_text(second_parameter),
                key=f"ui_second_values_{second_parameter}",
            )

    # ⚙️ Run Options
    with sb.expander("⚙️ Run Options", expanded=False):
        replications = st.number_input("Replications per cell", 1, 10_000, int(base.replications), key="ui_replications")
        base_seed = st.number_input(
            "Base seed", 0, 2**31 - 1, min(max(int(base.base_seed), 0), 2**31 - 1), key="ui_base_seed"
        )
        workers = st.number_input("Worker processes", 1, 64, 1, key="ui_workers")
        overrides["debug_checks"] = st.checkbox(
            "Debug invariant checks", value=base.debug_checks, key="ui_debug_checks",
            help="Check conservation invariants after every event (slow).",
        )

    return {
        "overrides": overrides,
        "sweep_name": sweep_name.strip() or parameter,
        "parameter": parameter,
        "values_text": values_text,
        "two_way": two_way,
        "second_parameter": second_parameter,
        "second_values_text": second_values_text,
        "replications": int(replications),
        "base_seed": int(base_seed),
        "workers": int(workers),
    }
