import pytest

from helpers import make_dataset


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """Print one PASS/FAIL line per acceptance criterion."""
    outcome = yield
    report = outcome.get_result()
    label = getattr(item.function, "_criterion", None)
    if label and report.when == "call":
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(
            report.outcome, report.outcome.upper()
        )
        reporter = item.config.pluginmanager.get_plugin("terminalreporter")
        if reporter is not None:
            reporter.write_line(f"[{status}] acceptance: {label}")
    elif label and report.when == "setup" and report.skipped:
        reporter = item.config.pluginmanager.get_plugin("terminalreporter")
        if reporter is not None:
            reporter.write_line(f"[SKIP] acceptance: {label}")


@pytest.fixture
def tiny_dataset():
    return make_dataset(
        sources={"s1": "the user logs in with a password", "s2": "export report data as pdf"},
        targets={
            "t1": "password login form validates the user",
            "t2": "pdf report exporter writes data",
            "t3": "unrelated telemetry collector",
        },
        answer_pairs=[("s1", "t1"), ("s2", "t2")],
    )
