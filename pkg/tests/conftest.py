import pytest

CRITERIA = {
    1: "operator identities",
    2: "semigroup smoothing",
    3: "Duhamel exactness",
    4: "maximal regularity and norm characterization",
    5: "free-flow functional",
    6: "inequality audits",
    7: "small-data existence",
    8: "global scaling mode",
    9: "scaling criticality",
    10: "honesty checks",
}


class AcceptanceLedger:
    def __init__(self):
        self.lines = {}

    def record(self, number, checks, detail=""):
        """Record named boolean checks for one criterion and print its line."""
        failed = [name for name, ok in checks.items() if not ok]
        status = "PASS" if not failed else "FAIL"
        line = f"criterion {number:2d} [{CRITERIA[number]}]: {status}"
        if failed:
            line += " (failed: " + ", ".join(failed) + ")"
        if detail:
            line += f" -- {detail}"
        self.lines[number] = line
        print(line)
        return failed


def pytest_configure(config):
    config._acceptance = AcceptanceLedger()


@pytest.fixture(scope="session")
def acceptance(request):
    return request.config._acceptance


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    ledger = getattr(config, "_acceptance", None)
    if ledger is None or not ledger.lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        line = ledger.lines.get(number, f"criterion {number:2d} [{CRITERIA[number]}]: FAIL (not evaluated)")
        terminalreporter.write_line(line)
