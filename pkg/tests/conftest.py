import re

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    key = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and not report.passed):
        detail = dict(report.user_properties).get("measured", "")
        _ACCEPTANCE[key] = (m.group(2), "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        name, status, detail = _ACCEPTANCE[key]
        line = f"criterion {key:>2} {status}  {name}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
