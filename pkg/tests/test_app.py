import pytest

streamlit_testing = pytest.importorskip("streamlit.testing.v1")
AppTest = streamlit_testing.AppTest

SMALL_JOB = {
    "random_failure_rate": "1/1440",
    "job_size": "8",
    "job_length": "1440",
    "warm_standbys": "2",
    "working_pool_size": "12",
    "spare_pool_size": "4",
    "manual_repair_time": "240",
}


def test_app_renders_with_defaults():
    at = AppTest.from_file("../app.py").run(timeout=30)
    assert not at.exception
    assert at.button[0].label == "🚀 Run Sweep"
    assert at.text_input(key="ui_values_recovery_time").value == "10, 20, 30"
    assert "3 cells" in at.caption[0].value


def test_small_sweep_runs_from_the_page():
    at = AppTest.from_file("../app.py").run(timeout=30)
    for key, value in SMALL_JOB.items():
        at.text_input(key=f"ui_param_{key}").set_value(value)
    at.text_input(key="ui_values_recovery_time").set_value("10, 20")
    at.number_input(key="ui_replications").set_value(2)
    at.run(timeout=30)
    at.button[0].click().run(timeout=120)

    assert not at.exception
    assert at.session_state.sweep_result is not None
    assert len(at.session_state.summary_df) == 2
    assert len(at.session_state.raw_df) == 4
    assert at.success[0].value == "✅ Sweep finished!"


def test_bad_values_box_shows_an_error():
    at = AppTest.from_file("../app.py").run(timeout=30)
    at.text_input(key="ui_values_recovery_time").set_value("10, abc")
    at.run(timeout=30)
    at.button[0].click().run(timeout=30)
    assert at.error
    assert at.session_state.sweep_result is None
