import time

import numpy as np
import pytest

from t2ploc.core import ColorPalette, GeoReference
from t2ploc.ingest import Taxonomy

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def taxonomy():
    return Taxonomy.load()


@pytest.fixture(scope="session")
def palette():
    return ColorPalette.load()


@pytest.fixture
def georef():
    return GeoReference((0.0, 0.0), 50.0, 224, 224)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _ACCEPTANCE.append((report.nodeid.split("::")[-1], report.outcome, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, duration in _ACCEPTANCE:
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}  ({duration:.2f}s)")
