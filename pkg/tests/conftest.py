import pytest

from transtack import fixture_path
from transtack.timeseries import load_corpus

_acceptance = []


@pytest.fixture(scope="session")
def sp_corpus():
    return load_corpus(fixture_path("SP"))


@pytest.fixture(scope="session")
def si_corpus():
    return load_corpus(fixture_path("SI"))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _acceptance.append((number, title, status, item.name))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status, name in sorted(_acceptance):
        terminalreporter.write_line(f"[{status}] criterion {number}: {title} ({name})")
