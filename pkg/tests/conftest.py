"""Acceptance bookkeeping: one PASS/FAIL line per criterion at the end of the run."""

import time

import pytest

_RESULTS = {}


class Criterion:
    def __init__(self, number, title, limit):
        self.number = number
        self.title = title
        self.limit = limit
        self.detail = ""
        self.start = time.perf_counter()
        self.elapsed = None

    def stop(self):
        """Freeze the clock and check the runtime limit."""
        self.elapsed = time.perf_counter() - self.start
        if self.limit is not None:
            assert self.elapsed < self.limit, f"took {self.elapsed:.1f} s, limit {self.limit} s"

    def line(self, passed):
        elapsed = self.elapsed if self.elapsed is not None else time.perf_counter() - self.start
        limit = f" (limit {self.limit:g} s)" if self.limit is not None else ""
        status = "PASS" if passed else "FAIL"
        return f"criterion {self.number:>2} {status}  {self.title}: {self.detail}  [{elapsed:.1f} s{limit}]"


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args[:2]
    return Criterion(number, title, marker.kwargs.get("limit"))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    crit = getattr(item, "funcargs", {}).get("criterion")
    if crit is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        line = crit.line(rep.passed)
        _RESULTS[crit.number] = line
        print(f"\n{line}")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        terminalreporter.write_line(_RESULTS[n])
