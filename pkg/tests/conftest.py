"""Shared pytest plumbing: the acceptance pass/fail summary table."""

CRITERION_RESULTS: list[tuple[int, str, bool, str]] = []


def record_criterion(number: int, name: str, ok: bool, detail: str = "") -> None:
    CRITERION_RESULTS.append((number, name, ok, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERION_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, name, ok, detail in sorted(CRITERION_RESULTS):
        status = "PASS" if ok else "FAIL"
        line = f"criterion {number:>2} [{status}] {name}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
