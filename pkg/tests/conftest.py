import math

import numpy as np
import pytest

from slipbox.domain import BoxDomain
from slipbox.evolve import initial_condition


@pytest.fixture
def cube16():
    return BoxDomain.cube(math.pi, 16)


@pytest.fixture
def cube32():
    return BoxDomain.cube(math.pi, 32)


@pytest.fixture
def box():
    # unequal extents and resolutions catch axis mix-ups
    return BoxDomain((1.0, 2.0, 1.5), (16, 12, 10))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tg16(cube16):
    return initial_condition("taylor_green", {}, cube16)


@pytest.fixture
def random16(cube16):
    return initial_condition("random_bandlimited", {"kmax": 4}, cube16, seed=7)


# -- acceptance reporting ----------------------------------------------------

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record ``(number, title)`` for the acceptance summary; pass/fail comes from the test outcome."""

    def record(number, title, detail=""):
        _CRITERIA[request.node.nodeid] = [number, title, detail, None]

    def note(detail):
        _CRITERIA[request.node.nodeid][2] = detail

    record.note = note
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    entry = _CRITERIA.get(item.nodeid)
    if entry is not None and (rep.when == "call" or rep.failed):
        if entry[3] is None or rep.failed:
            entry[3] = rep.passed if rep.when == "call" else False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, detail, ok in sorted(_CRITERIA.values(), key=lambda e: e[0]):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2} {status}: {title}" + (f" ({detail})" if detail else ""))
