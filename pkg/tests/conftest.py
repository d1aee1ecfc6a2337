import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    status = None
    if rep.skipped:
        status = "SKIP"
    elif rep.failed:
        status = "FAIL"
    elif rep.when == "call":
        status = "PASS"
    if status is not None:
        detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        if rep.skipped and isinstance(rep.longrepr, tuple):
            detail = rep.longrepr[2]
        item.config._criteria[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter, config):
    criteria = getattr(config, "_criteria", {})
    if not criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(criteria):
        status, title, detail = criteria[number]
        line = f"criterion {number} {status}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
