import json
import math

import pytest

from bszeta import data_path
from bszeta.fuchsian import bolza_presentation, dirichlet_domain, length_spectrum, load_group
from bszeta.io import read_spectrum

# criterion number -> (outcome, title, detail); filled by the makereport hook
_ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        if rep.skipped:
            reason = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else str(rep.longrepr)
            _ACCEPTANCE[num] = ("SKIP", title, reason)
        else:
            _ACCEPTANCE[num] = ("PASS" if rep.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[num]
        line = f"{status} criterion {num}: {title}"
        if detail:
            line += f" [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def bolza():
    return bolza_presentation()


@pytest.fixture(scope="session")
def bolza_shipped():
    return load_group(data_path("bolza.json"))


@pytest.fixture(scope="session")
def bolza_domain(bolza):
    return dirichlet_domain(bolza)


@pytest.fixture(scope="session")
def spec6(bolza, bolza_domain):
    return length_spectrum(bolza, 6.0, domain=bolza_domain)


@pytest.fixture(scope="session")
def spec10():
    return read_spectrum(str(data_path("bolza_L10.csv")))


@pytest.fixture(scope="session")
def bolza_systole():
    return 2 * math.acosh(1 + math.sqrt(2))


def shipped_json(name):
    return json.loads(data_path(name).read_text())
