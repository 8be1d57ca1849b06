"""Shared fixtures and the acceptance-criteria reporting hook.

Tests marked @pytest.mark.criterion(n, "title") feed a summary section
printed at the end of the run with one PASS/FAIL line per criterion.
"""

import numpy as np
import pandas as pd
import pytest

from synthgraph.graph import ColumnSpec, FeatureTable

# criterion number -> (title, [outcomes])
_criterion_results: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(num, title): tags a test as covering an acceptance criterion",
    )
    config.addinivalue_line("markers", "slow: long-running acceptance workloads")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num, title = marker.args[0], marker.args[1]
    entry = _criterion_results.setdefault(num, (title, []))
    if report.when == "call":
        if report.passed:
            entry[1].append("pass")
        elif report.failed:
            entry[1].append("fail")
        else:
            entry[1].append("skip")
    elif report.when in ("setup", "teardown") and report.failed:
        entry[1].append("fail")
    elif report.when == "setup" and report.skipped:
        entry[1].append("skip")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criterion_results):
        title, outcomes = _criterion_results[num]
        if not outcomes or any(o == "skip" for o in outcomes):
            status = "SKIP"
        elif all(o == "pass" for o in outcomes):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"[criterion {num:2d}] {status} - {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_table(**columns) -> FeatureTable:
    """Build a FeatureTable from keyword arrays; float = continuous, int = categorical codes."""
    specs, arrays = [], []
    for name, values in columns.items():
        values = np.asarray(values)
        if values.dtype.kind in "iu":
            hi = int(values.max()) + 1 if values.size else 1
            specs.append(ColumnSpec(name, "categorical", tuple(str(v) for v in range(hi))))
            arrays.append(values.astype(np.int64))
        else:
            specs.append(ColumnSpec(name, "continuous"))
            arrays.append(values.astype(np.float64))
    return FeatureTable(tuple(specs), tuple(arrays))


@pytest.fixture
def toy_frame() -> pd.DataFrame:
    return pd.DataFrame({
        "user": ["u1", "u1", "u2"],
        "merchant": ["m1", "m2", "m1"],
        "amount": [10.0, 20.0, 30.0],
        "category": ["a", "b", "a"],
    })
