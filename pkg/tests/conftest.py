import math

import pytest

from vlad.stdlib import interpreter


@pytest.fixture(scope="module")
def vl():
    """An interpreter with the standard library loaded, shared per module."""
    return interpreter()


def central_difference(fn, x, h=None):
    """Host-side finite-difference oracle."""
    h = h or 1e-6 * max(1.0, abs(x))
    return (fn(x + h) - fn(x - h)) / (2 * h)


def rel_close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def isnan(x):
    return isinstance(x, float) and math.isnan(x)


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record the outcome of one acceptance criterion for the summary."""
    results = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    results[number] = (title, None)
    yield
    results[number] = (title, request.node)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" or (report.when == "setup" and report.failed):
        item.acceptance_passed = report.passed


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_ACCEPTANCE_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, node = results[number]
        passed = node is not None and getattr(node, "acceptance_passed", False)
        terminalreporter.line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}")
