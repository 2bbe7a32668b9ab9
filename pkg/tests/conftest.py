import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the per-criterion pass/fail lines collected by the acceptance
    suite, past any output capture."""
    mod = sys.modules.get("tests.test_acceptance") or sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT_LINES", None) if mod else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
