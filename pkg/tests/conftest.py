from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from serieskernel.tsdata import Dataset, TimeSeries

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"


def random_series(rng, n_series, *, d=1, lengths=(3, 15), span=10.0, prefix="s"):
    """Irregular series with uniform random timestamps and normal values."""
    out = []
    for i in range(n_series):
        n = int(rng.integers(lengths[0], lengths[1] + 1))
        t = np.sort(rng.uniform(0, span, n))
        out.append(TimeSeries(t, rng.normal(size=(n, d)), id=f"{prefix}{i}"))
    return Dataset(tuple(out))


def shared_grid(rng, n_series, n_times, *, d=1, span=None):
    t = np.arange(n_times, dtype=float) if span is None else np.linspace(0, span, n_times)
    return Dataset(tuple(TimeSeries(t, rng.normal(size=(n_times, d)), id=str(i)) for i in range(n_series)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one summary line per acceptance criterion

_CRITERIA: dict[int, str] = {}
_DETAILS: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    n = getattr(report, "criterion", None)
    if n is None:
        return
    if report.when == "call" or report.outcome != "passed":
        status = "PASS" if report.outcome == "passed" else "FAIL"
        if _CRITERIA.get(n) != "FAIL":
            _CRITERIA[n] = status
        if report.when == "call":
            _DETAILS.setdefault(n, []).extend(v for k, v in report.user_properties if k == "detail")
        if report.outcome == "failed" and report.longrepr is not None:
            reason = getattr(report.longrepr, "reprcrash", None)
            msg = reason.message if reason is not None else str(report.longrepr)
            _DETAILS.setdefault(n, []).append(msg.splitlines()[0])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = m.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        details = "; ".join(_DETAILS.get(n, []))
        terminalreporter.write_line(f"criterion {n}: {_CRITERIA[n]}" + (f"  [{details}]" if details else ""))
