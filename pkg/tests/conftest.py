import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dosemmr import illustration  # noqa: E402
from dosemmr.identification import Restrictions, build_constraints  # noqa: E402
from dosemmr.model import CostSpec, WelfareSpec  # noqa: E402


@pytest.fixture
def illus_q():
    return illustration.true_q()


@pytest.fixture
def illus_cs():
    return build_constraints(illustration.evidence(), Restrictions(), illustration.GRID)


@pytest.fixture
def illus_w():
    return WelfareSpec(illustration.WELFARE)


@pytest.fixture
def zero_cost():
    return CostSpec.zero(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import summary_lines

    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
