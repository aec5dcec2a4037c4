"""Collects acceptance results and prints one PASS/FAIL line per criterion."""

_RESULTS: dict[int, list] = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    k = props["criterion"]
    status = "PASS" if report.passed else "FAIL"
    prev = _RESULTS.get(k)
    if prev is not None:
        status = "FAIL" if "FAIL" in (prev[0], status) else "PASS"
        duration = prev[1] + report.duration
        detail = "; ".join(d for d in (prev[2], props.get("detail", "")) if d)
    else:
        duration = report.duration
        detail = props.get("detail", "")
    _RESULTS[k] = [status, duration, detail]


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(_RESULTS):
        status, duration, detail = _RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {status}  ({duration:.2f} s)  {detail}")
