import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gril.core import Problem, ProblemKind


@pytest.fixture
def incomplete_problem() -> Problem:
    return Problem(
        id="p-inc",
        kind=ProblemKind.INCOMPLETE,
        question="A farmer sells eggs. How much money does she make per week?",
        missing_premise="She sells 12 eggs a day at 2 dollars each.",
        gold_answer="168",
    )


@pytest.fixture
def complete_problem() -> Problem:
    return Problem(
        id="p-comp",
        kind=ProblemKind.COMPLETE,
        question="Tom has 3 apples and buys 4 more. How many apples does he have?",
        gold_answer="7",
    )


_acceptance_reports = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _acceptance_reports.append(report)
    elif "test_acceptance.py" in report.nodeid and report.skipped:
        _acceptance_reports.append(report)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_reports:
        return
    from test_acceptance import CRITERION_BY_TEST

    terminalreporter.section("acceptance criteria")
    for report in _acceptance_reports:
        test_name = report.nodeid.split("::")[-1]
        name = CRITERION_BY_TEST.get(test_name, test_name)
        if report.skipped:
            status = "[SKIP]"
        elif report.passed:
            status = "[PASS]"
        else:
            status = "[FAIL]"
        terminalreporter.write_line(f"{status} {name}")
