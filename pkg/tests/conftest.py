import sys

import numpy as np
import pytest

from twistyoung.core import DEFAULT_EXPONENTS, GaussianTriple
from twistyoung.quadrature import build_rule


@pytest.fixture
def p():
    return DEFAULT_EXPONENTS


@pytest.fixture
def g(p):
    return GaussianTriple.standard(p, 1)


@pytest.fixture(scope="session")
def rule4():
    return build_rule(40, 4, 0.5)


@pytest.fixture(scope="session")
def rule2():
    return build_rule(40, 2, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
