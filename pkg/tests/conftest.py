import os

import pytest

_CRITERIA: list[str] = []


@pytest.fixture(scope="session", autouse=True)
def _private_cache(tmp_path_factory):
    # critical values are simulated afresh into a per-session directory
    old = os.environ.get("NONCAUSAL_CACHE_DIR")
    os.environ["NONCAUSAL_CACHE_DIR"] = str(tmp_path_factory.mktemp("cv-cache"))
    yield
    if old is None:
        del os.environ["NONCAUSAL_CACHE_DIR"]
    else:
        os.environ["NONCAUSAL_CACHE_DIR"] = old


@pytest.fixture
def criterion():
    """Record one acceptance line and fail the test when the check does not hold."""

    def check(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
