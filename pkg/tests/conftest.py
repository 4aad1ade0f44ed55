import contextlib
import time

import pytest

RESULTS = []


@pytest.fixture
def criterion():
    """Context manager recording one pass/fail line per acceptance criterion."""
    @contextlib.contextmanager
    def record(name: str, budget: float = None):
        start = time.perf_counter()
        try:
            yield
        except BaseException as e:
            RESULTS.append(f"FAIL  {name}  ({type(e).__name__}: {str(e).splitlines()[0] if str(e) else ''})")
            raise
        elapsed = time.perf_counter() - start
        if budget is not None and elapsed >= budget:
            RESULTS.append(f"FAIL  {name}  ({elapsed:.2f}s over the {budget:g}s budget)")
            raise AssertionError(f"{name} took {elapsed:.2f}s, budget {budget:g}s")
        RESULTS.append(f"PASS  {name}  ({elapsed:.2f}s)")

    record.note = lambda line: RESULTS.append(f"INFO  {line}")
    return record


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
