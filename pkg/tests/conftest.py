import pytest

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    if rep.when != "call" and not (rep.skipped or rep.failed):
        return
    number, title = marker.args
    if rep.skipped:
        status, detail = "SKIP", rep.longrepr[2] if isinstance(rep.longrepr, tuple) else ""
    else:
        status = "FAIL" if rep.failed else "PASS"
        detail = dict(item.user_properties).get("detail", "")
    _CRITERIA[(number, item.nodeid)] = f"[{status}] criterion {number}: {title}" + (f" ({detail})" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[key])
