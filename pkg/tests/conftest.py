"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

_criteria = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    label = props.get("criterion")
    if label is None:
        return
    if report.when == "call":
        _criteria[label] = (report.passed, props.get("detail", ""))
    elif report.failed:
        _criteria[label] = (False, f"{report.when} failed")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_criteria, key=lambda s: int(s.split()[0])):
        ok, detail = _criteria[label]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip())
