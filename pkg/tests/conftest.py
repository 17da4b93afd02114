import sys
from pathlib import Path

from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


# one summary line per acceptance criterion, aggregated over its cases
_criteria = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_c" not in report.nodeid:
        return
    if report.when != "call" and not (report.failed or report.skipped):
        return
    name = report.nodeid.split("::", 1)[1]
    key = name[len("test_"):].split("[", 1)[0].split("_", 1)[0]
    entry = _criteria.setdefault(key, {"title": name, "failed": []})
    if report.failed:
        entry["failed"].append(name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria):
        entry = _criteria[key]
        status = "FAIL" if entry["failed"] else "PASS"
        line = f"criterion {int(key[1:]):2d}: {status}"
        if entry["failed"]:
            line += "  (" + ", ".join(entry["failed"]) + ")"
        terminalreporter.write_line(line)
