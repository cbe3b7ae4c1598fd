import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hypflow.meshes import load_fixture  # noqa: E402

SEED = int(os.environ.get("HYPFLOW_SEED", "20261015"))

_acceptance = {}


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture(scope="session")
def tetra():
    return load_fixture("tetrahedron")


@pytest.fixture(scope="session")
def icosa():
    return load_fixture("icosahedron")


@pytest.fixture(scope="session")
def octa():
    return load_fixture("octagon")


@pytest.fixture(scope="session")
def octa_zero():
    from oracles import octagon_zero_metric
    return np.array(octagon_zero_metric())


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or report.failed:
        prev = _acceptance.get(name)
        if prev != "FAIL":
            _acceptance[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=lambda n: (len(n.split("_")[1]), n)):
        terminalreporter.write_line(f"{_acceptance[name]}  {name}")
