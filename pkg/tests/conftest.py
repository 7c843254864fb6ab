import pytest

_RESULTS: dict[tuple[int, str], tuple[bool, str]] = {}


@pytest.fixture
def record():
    """``record(number, ok, detail, part="")`` logs a criterion outcome for the summary."""

    def _record(number: int, ok: bool, detail: str, part: str = "") -> bool:
        _RESULTS[(number, part)] = (bool(ok), detail)
        return bool(ok)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, part in sorted(_RESULTS):
        ok, detail = _RESULTS[(number, part)]
        label = f"{number:2d}{part}".ljust(3)
        terminalreporter.write_line(f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}")
