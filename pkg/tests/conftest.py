"""Prints one PASS/FAIL line per acceptance criterion at the end of the run.

Acceptance tests attach ``criterion`` and ``detail`` through ``record_property``.
"""

_results = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or report.outcome != "passed":
        key = props["criterion"]
        prev = _results.get(key)
        # keep a failure once seen (setup/call/teardown)
        if prev is None or prev[0] == "PASS":
            _results[key] = ("PASS" if report.outcome == "passed" else "FAIL", props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_results):
        status, detail = _results[key]
        terminalreporter.write_line(f"criterion {key:>2}: {status}  {detail}")
