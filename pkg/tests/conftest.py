import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _RESULTS.setdefault(mark.args[0], []).append(rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        outcomes = _RESULTS[n]
        if "failed" in outcomes:
            verdict = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        terminalreporter.write_line(f"ACCEPTANCE criterion {n}: {verdict}")
