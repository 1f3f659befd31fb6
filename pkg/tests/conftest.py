import numpy as np
import pytest

from bellsim import models


@pytest.fixture(scope="session")
def pairs():
    return models.chsh_pairs()


@pytest.fixture(scope="session")
def pair(pairs):
    return pairs[0]


def gof_chi_square(observed: np.ndarray, expected: np.ndarray) -> tuple[float, int]:
    """Goodness-of-fit statistic with sparse-cell merging (test-side oracle).

    Cells with expected count below 5 are pooled into one bucket; returns
    (statistic, dof).
    """
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    keep = expected >= 5.0
    obs = list(observed[keep])
    exp = list(expected[keep])
    if (~keep).any():
        obs.append(observed[~keep].sum())
        exp.append(expected[~keep].sum())
    obs, exp = np.asarray(obs), np.asarray(exp)
    live = exp > 0
    chi = float(((obs[live] - exp[live]) ** 2 / exp[live]).sum())
    return chi, max(int(live.sum()) - 1, 1)
