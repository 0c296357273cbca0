import pytest


def pytest_terminal_summary(terminalreporter):
    """Collect the one-line verdicts recorded by the acceptance suite."""
    lines = []
    for key in ("passed", "failed"):
        for report in terminalreporter.stats.get(key, []):
            if report.when != "call":
                continue
            lines += [value for name, value in report.user_properties if name == "acceptance"]
    if lines:
        terminalreporter.write_sep("=", "acceptance summary")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def verdict_line(record_property):
    """Call with (number, title, ok, detail); records and prints one PASS/FAIL line."""

    def emit(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"ACCEPTANCE {number:02d} {title:<34} {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
        record_property("acceptance", line)
        print(line)
        return ok

    return emit
