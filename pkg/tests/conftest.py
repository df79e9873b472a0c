import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes `oracles` importable

from shrinknet.data import RegressionProblem  # noqa: E402


def random_problem(n, k, seed=0, snr=1.0):
    """Random regression problem with a sparse true coefficient vector."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, k))
    beta = np.zeros(k)
    nz = rng.choice(k, size=max(1, k // 4), replace=False)
    beta[nz] = rng.standard_normal(nz.size) * snr
    y = X @ beta + rng.standard_normal(n)
    return RegressionProblem(response=y, design=X, target_gene=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """Replay the end-to-end verdict lines past output capture."""
    lines = getattr(
        sys.modules.get("test_acceptance"), "VERDICT_LINES", None
    )
    if lines:
        terminalreporter.section("end-to-end verdicts")
        for line in lines:
            terminalreporter.write_line(line)
