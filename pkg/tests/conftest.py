import os

import numpy as np
import pytest

from dpcsim import ldpc
from dpcsim.modulation import PamMapping
from dpcsim.pipeline import DpcCodes, DpcSystemParams
from dpcsim.shaping import ConvCode

LONG = os.environ.get("DPCSIM_LONG") == "1"


def pytest_collection_modifyitems(config, items):
    if LONG:
        return
    skip = pytest.mark.skip(reason="long run; set DPCSIM_LONG=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def mapping():
    return PamMapping(16)


@pytest.fixture(scope="session")
def small_conv():
    return ConvCode.from_spec(0b111, 0b101)


@pytest.fixture(scope="session")
def paper_conv():
    return ConvCode.paper()


@pytest.fixture(scope="session")
def small_params():
    return DpcSystemParams(n=400, k=300, k_prime=50, P_X=7.93)


@pytest.fixture(scope="session")
def small_codes(small_params):
    return DpcCodes.build(small_params)


@pytest.fixture(scope="session")
def paper_codes(tmp_path_factory):
    params = DpcSystemParams()
    return DpcCodes.build(params, cache_dir=tmp_path_factory.mktemp("ldpc-cache"))


@pytest.fixture(scope="session")
def hamming_like_code():
    """A (12,8) code with a 4x12 parity-check matrix of full rank."""
    h = np.array([
        [1, 1, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0],
        [0, 1, 1, 0, 1, 1, 0, 1, 0, 1, 0, 0],
        [1, 0, 1, 1, 0, 1, 1, 0, 0, 0, 1, 0],
        [1, 1, 1, 0, 0, 0, 1, 1, 0, 0, 0, 1],
    ], dtype=np.uint8)
    from dpcsim.gf2 import Gf2Matrix
    return ldpc.LdpcCode.from_parity_check(Gf2Matrix.from_dense(h))


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion, then assert it."""

    def report(number, passed, detail):
        ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
        assert passed, detail

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
