"""Collects the acceptance outcomes and prints one line per criterion."""

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        name = report.nodeid.split("::")[-1]
        detail = dict(report.user_properties).get("measured", "")
        if report.when == "setup" and report.skipped:
            status = "SKIP"
        else:
            status = "PASS" if report.passed else "FAIL"
        _ACCEPTANCE[name] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: int(n.split("_")[2])):
        status, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{status}  {name}  {detail}")
