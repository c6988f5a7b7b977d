"""Shared fixtures. The acceptance tests record one verdict per criterion and the
terminal summary prints them as a block at the end of the run."""

import pytest

VERDICTS: dict[int, tuple[str, str, str]] = {}


class Recorder:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.checks: list[tuple[bool, str]] = []

    def check(self, ok: bool, detail: str) -> bool:
        self.checks.append((bool(ok), detail))
        return bool(ok)

    def finish(self) -> None:
        ok = all(c[0] for c in self.checks) and bool(self.checks)
        failed = [d for passed, d in self.checks if not passed]
        detail = "; ".join(failed) if failed else "; ".join(d for _, d in self.checks)
        VERDICTS[self.number] = ("PASS" if ok else "FAIL", self.title, detail)
        assert ok, detail


@pytest.fixture
def criterion():
    return Recorder


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        verdict, title, detail = VERDICTS[number]
        terminalreporter.write_line(f"[{verdict}] {number:2d}. {title}: {detail}")
