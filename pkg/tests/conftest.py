import pytest

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record a one-line summary for an acceptance criterion."""
    marker = request.node.get_closest_marker("criterion")
    number = marker.args[0] if marker else request.node.name
    entry = {"number": number, "title": marker.args[1] if marker else "", "detail": ""}
    _CRITERIA[request.node.nodeid] = entry

    def note(text):
        entry["detail"] = text

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    entry = _CRITERIA.get(item.nodeid)
    if entry is not None and rep.when == "call":
        entry["passed"] = rep.passed


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for entry in sorted(_CRITERIA.values(), key=lambda e: e["number"]):
        status = "PASS" if entry.get("passed") else "FAIL"
        terminalreporter.write_line(f"{status} criterion {entry['number']:>2} {entry['title']}: {entry['detail']}")
