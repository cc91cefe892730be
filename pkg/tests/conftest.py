import numpy as np
import pytest

from gegdyn import GegConfig, builtin

# acceptance results, printed as one line per criterion at the end of the run
_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record ``(number, title)`` for an acceptance test; PASS unless the test fails."""

    def register(number, title):
        _CRITERIA[number] = {"title": title, "node": request.node.nodeid, "ok": None, "detail": ""}
        return _CRITERIA[number]

    return register


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when != "call":
        return
    for entry in _CRITERIA.values():
        if entry["node"] == item.nodeid:
            entry["ok"] = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "PASS" if e["ok"] else "FAIL"
        detail = f"  ({e['detail']})" if e["detail"] else ""
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {e['title']}{detail}")


@pytest.fixture
def bilinear():
    return builtin("bilinear_xy")


@pytest.fixture
def multi():
    return builtin("multi_critical")


@pytest.fixture
def counterexample():
    return builtin("quadratic_counterexample")


@pytest.fixture
def example1_config():
    return GegConfig.from_params(0.9, 1.0, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
