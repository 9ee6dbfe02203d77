# app.py: Cluster Reliability Simulator (Streamlit launcher)
import logging

import pandas as pd
import streamlit as st

# Page setup (must be first Streamlit call)
st.set_page_config(page_title="Cluster Reliability Simulator", layout="wide", page_icon="🖥️")

# ─────────────────────────────────────────────────────────────
# External modules
try:
    import backend_main_processing
    import frontend_data_loader
    import frontend_value_utils
    from backend_errors import ConfigError, SimulatorError
    from backend_experiments import SweepSpec
    from frontend_report import render_sweep_report
    from frontend_sidebar import render_sidebar_controls
except Exception as e:
    st.error(f"Import error: {e}")
    st.stop()

logging.basicConfig(format="%(asctime)s %(levelname)s: %(message)s", level=logging.WARNING)

# ====== Global CSS (header + KPI bricks) ======
st.markdown(
    """
<style>
.main-header{font-size:2.6rem;background:linear-gradient(135deg,#0d47a1,#1976d2);-webkit-background-clip:text;-webkit-text-fill-color:transparent;text-align:center;margin-bottom:.25rem;font-weight:800;line-height:1.1;}
.sub-title{font-size:1.1rem;color:#4a5568;text-align:center;margin-bottom:.5rem;font-weight:400;font-style:italic;}
.metric-card{background:linear-gradient(135deg,#e3f2fd,#bbdefb);padding:1rem;border-radius:15px;box-shadow:0 4px 6px rgba(13,71,161,.1);margin-bottom:1rem;text-align:center;border:1px solid #90caf9;height:120px;display:flex;flex-direction:column;justify-content:center;}
.metric-value{font-size:2.0rem;font-weight:700;color:#1a365d;margin-bottom:.3rem;line-height:1;}
.metric-label{font-size:.85rem;color:#4a5568;font-weight:500;line-height:1.2;}
.kpi-brick{width:15px;min-width:15px;height:120px;background:#bfbfbf;border-radius:4px;box-shadow:inset 0 0 0 1px #9e9e9e,0 1px 2px rgba(0,0,0,.08);margin:0 auto;}
</style>
""",
    unsafe_allow_html=True,
)


def build_sweep_spec(choices: dict) -> tuple:
    """Parse the sidebar value boxes. Returns (SweepSpec or None, list of error messages)."""
    errors = []
    values, err = frontend_value_utils.parse_values_box(choices["parameter"], choices["values_text"])
    if err:
        errors.append(err)
    second = None
    if choices["two_way"]:
        values2, err2 = frontend_value_utils.parse_values_box(choices["second_parameter"], choices["second_values_text"])
        if err2:
            errors.append(err2)
        second = (choices["second_parameter"], values2)
    if errors:
        return None, errors
    try:
        spec = SweepSpec.create(
            display_name=choices["sweep_name"],
            parameter_key=choices["parameter"],
            values=values,
            second_parameter=second,
            replications=choices["replications"],
            base_seed=choices["base_seed"],
        )
    except ConfigError as exc:
        return None, [str(exc)]
    return spec, []


def main():
    st.markdown(
        """
<div class="main-header">Cluster Reliability Simulator</div>
<div class="sub-title">Training time of one large job under server failures, repairs and spare-pool preemption</div>
""",
        unsafe_allow_html=True,
    )

    # Params file (optional)
    upload = st.sidebar.file_uploader("📄 Params file", type=["cfg", "txt", "ini"], key="ui_params_file")
    doc, load_error = frontend_data_loader.load_params_upload(upload.getvalue() if upload is not None else None)
    if load_error:
        st.warning(f"⚠️ {load_error}")

    choices = render_sidebar_controls(doc.params)

    # State defaults
    st.session_state.setdefault("sweep_result", None)
    st.session_state.setdefault("summary_df", pd.DataFrame())
    st.session_state.setdefault("raw_df", pd.DataFrame())

    spec, spec_errors = build_sweep_spec(choices)
    if spec is not None:
        value_lists = [spec.values] + ([spec.second_parameter[1]] if spec.second_parameter else [])
        cells = frontend_value_utils.grid_preview(list(spec.keys), value_lists)
        st.caption(f"{len(cells)} cells × {spec.replications} replications = {len(cells) * spec.replications} runs")
        with st.expander("Sweep grid", expanded=False):
            st.dataframe(cells, use_container_width=True)

    st.markdown("---")
    left_col, right_col = st.columns([3, 2])
    with left_col:
        go = st.button("🚀 Run Sweep", use_container_width=True, type="primary")
        if st.button("🗑️ Clear Results", use_container_width=True):
            st.session_state.sweep_result = None
            st.session_state.summary_df = pd.DataFrame()
            st.session_state.raw_df = pd.DataFrame()
            st.rerun()
    with right_col:
        with st.expander("Effective parameters", expanded=False):
            st.json({k: v for k, v in choices["overrides"].items()})

    # Run
    if go:
        for err in spec_errors:
            st.error(f"❌ {err}")
        if spec is None:
            st.stop()
        try:
            base = doc.params.override(**choices["overrides"])
        except ConfigError as exc:
            st.error(f"❌ {exc}")
            st.stop()

        with st.spinner("🔄 Simulating…"):
            try:
                result, summary_df, raw_df = backend_main_processing.process_sweep(base, spec, workers=choices["workers"])
            except ConfigError as exc:
                st.error(f"❌ {exc}")
                st.stop()
            except SimulatorError as exc:
                st.error(f"❌ Simulation failed: {exc}")
                st.stop()
        st.session_state.sweep_result = result
        st.session_state.summary_df = summary_df
        st.session_state.raw_df = raw_df

    # ===== Results / download =====
    if st.session_state.sweep_result is not None:
        st.success("✅ Sweep finished!")
        render_sweep_report(st.session_state.sweep_result, st.session_state.summary_df, st.session_state.raw_df)

    # Re-open a previously downloaded CSV
    with st.expander("📂 Open downloaded results", expanded=False):
        reopened = st.file_uploader("Summary or raw CSV", type=["csv"], key="ui_results_file")
        if reopened is not None:
            table, table_error = frontend_data_loader.load_results_csv(reopened.getvalue())
            if table_error:
                st.error(f"❌ {table_error}")
            else:
                st.caption(f"{reopened.name}: {len(table)} rows × {len(table.columns)} columns")
                st.dataframe(table, use_container_width=True)

    st.markdown("---")
    st.markdown("<div style='text-align:center;color:#666;'>Cluster Reliability Simulator • discrete-event model • times in minutes</div>", unsafe_allow_html=True)


if __name__ == "__main__":
    main()
