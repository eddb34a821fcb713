import numpy as np
import pytest

from mobinfer.trace import ContactEvent, ContactTrace


def make_trace(events, node_count=None, duration=None):
    evs = tuple(ContactEvent(a, b, s, e) for a, b, s, e in events)
    if node_count is None:
        node_count = max((max(a, b) for a, b, _, _ in events), default=0) + 1
    if duration is None:
        duration = max((e for *_, e in events), default=0.0)
    return ContactTrace(node_count, duration, evs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report one line each; printed after the run
CRITERIA: dict[int, str] = {}


def record_criterion(number: int, title: str, ok, detail: str) -> None:
    """``ok`` is True, False, or None for a criterion that could not run."""
    status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
    line = f"criterion {number:2d} {status}  {title}: {detail}"
    CRITERIA[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
