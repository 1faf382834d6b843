import contextlib

import pytest

_LINES: dict[int, str] = {}


class CriterionRecorder:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.details: list[str] = []

    def note(self, text: str) -> None:
        self.details.append(text)

    def line(self, ok: bool, error: str = "") -> str:
        parts = [f"{'PASS' if ok else 'FAIL'} criterion {self.number:>2}: {self.title}"]
        if self.details:
            parts.append("; ".join(self.details))
        if error:
            parts.append(error)
        return " | ".join(parts)


@pytest.fixture
def criterion():
    """Context manager that records one PASS/FAIL line per acceptance criterion."""

    @contextlib.contextmanager
    def run(number: int, title: str):
        rec = CriterionRecorder(number, title)
        try:
            yield rec
        except BaseException as exc:
            msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            _LINES[number] = rec.line(False, msg[:200])
            print(_LINES[number])
            raise
        _LINES[number] = rec.line(True)
        print(_LINES[number])

    return run


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_LINES):
        terminalreporter.write_line(_LINES[number])
