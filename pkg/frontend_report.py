# frontend_report.py
import re

import pandas as pd
import streamlit as st

from backend_experiments import SweepResult
from backend_job_orchestration import METRICS
from backend_param_config import MINUTES_PER_DAY
from backend_results_writer import export_meta_lines, frame_to_csv_text, workbook_bytes


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_") or "sweep"


def headline_frame(result: SweepResult, summary_df: pd.DataFrame) -> pd.DataFrame:
    """Swept values + mean/p95 of each metric, training time also in days."""
    cols = [*result.keys]
    for metric in METRICS:
        cols += [f"{metric}_mean", f"{metric}_p95"]
    out = summary_df[cols].copy()
    out.insert(len(result.keys), "total_days_mean", summary_df["total_time_mean"] / MINUTES_PER_DAY)
    return out


def render_kpis(result: SweepResult, summary_df: pd.DataFrame) -> None:
    runs = sum(len(cell.runs) for cell in result.cells)
    c1, b1, c2, b2, c3, b3, c4 = st.columns([1, 0.07, 1, 0.07, 1, 0.07, 1])
    cards = [
        (c1, len(result.cells), "Sweep Cells"),
        (c2, runs, "Simulated Runs"),
        (c3, f"{summary_df['total_time_mean'].min() / MINUTES_PER_DAY:,.1f} d", "Best Mean Training Time"),
        (c4, f"{summary_df['failures_total_mean'].mean():,.0f}", "Mean Failures per Run"),
    ]
    for col, value, label in cards:
        with col:
            st.markdown(
                f"""<div class="metric-card"><div class="metric-value">{value}</div><div class="metric-label">{label}</div></div>""",
                unsafe_allow_html=True,
            )
    for brick in (b1, b2, b3):
        with brick:
            st.markdown('<div class="kpi-brick"></div>', unsafe_allow_html=True)


def render_sweep_report(result: SweepResult, summary_df: pd.DataFrame, raw_df: pd.DataFrame) -> None:
    """Finished-sweep view: KPI cards, headline table, full tables and downloads."""
    spec = result.spec
    st.markdown(f"### 📋 Results • {spec.display_name}")
    render_kpis(result, summary_df)

    st.dataframe(headline_frame(result, summary_df), use_container_width=True)
    with st.expander("All statistics (mean, median, stddev, p50–p99, min, max)", expanded=False):
        st.dataframe(summary_df, use_container_width=True)
    with st.expander("Per-replication results", expanded=False):
        st.dataframe(raw_df, use_container_width=True)

    meta = export_meta_lines(result)
    slug = _slug(spec.display_name)
    summary_csv = "\n".join(meta) + "\n" + frame_to_csv_text(summary_df)
    raw_csv = "\n".join(meta) + "\n" + frame_to_csv_text(raw_df)

    d1, d2, d3 = st.columns(3)
    with d1:
        st.download_button("📥 Download CSV (Summary)", data=summary_csv, file_name=f"{slug}.csv", mime="text/csv")
    with d2:
        st.download_button("📥 Download CSV (Raw)", data=raw_csv, file_name=f"{slug}.raw.csv", mime="text/csv")
    with d3:
        st.download_button(
            "📥 Download Excel",
            data=workbook_bytes(result),
            file_name=f"{slug}.xlsx",
            mime="application/vnd.openxmlformats-officedocument.spreadsheetml.sheet",
        )

    st.markdown("**Notes:**")
    notes = [
        "1. Times are simulated minutes; training time includes host selection, recovery, spare waits and stalls.",
        "2. Percentiles are nearest-rank over the replications of each cell.",
        "3. Every cell and replication has its own seed, so re-running with the same base seed reproduces these numbers.",
    ]
    for note in notes:
        st.caption(note)
