"""Shared pytest plumbing: surface acceptance-criterion verdicts.

Criterion verdict lines are recorded here and replayed in the terminal
summary, so every `CRITERION n: PASS|FAIL` line is visible in the final
report regardless of output capturing.
"""

CRITERION_LINES: list[str] = []


def record_criterion(line: str) -> None:
    CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(CRITERION_LINES)):
            terminalreporter.write_line(line)
