import numpy as np
import pytest

from polecraft.bench import gen_example41, gen_random


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_case():
    return gen_random(6, 3, 11)


@pytest.fixture
def ex41_case():
    return gen_example41(4, 10.0, 3)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "REPORT_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
