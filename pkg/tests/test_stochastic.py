import math

import numpy as np
import pytest

from lpconc import InvalidData, InvalidParameter
from lpconc.stochastic import GbmParams, estimate_sigma, path_rng, sample_gbm_paths


def test_estimate_sigma_constant():
    assert estimate_sigma([1350.0] * 50) == 0.0


def test_estimate_sigma_alternating():
    n = 101
    prices = [1.0 if i % 2 == 0 else math.e for i in range(n)]
    # 100 returns of +-1 with zero mean; sample std = sqrt(100 / 99)
    assert estimate_sigma(prices) == pytest.approx(math.sqrt(100 / 99), rel=1e-12)


def test_estimate_sigma_rejects_bad_prices():
    with pytest.raises(InvalidData, match="index 2"):
        estimate_sigma([1.0, 2.0, 0.0, 3.0])
    with pytest.raises(InvalidData):
        estimate_sigma([1.0])


def test_params_validation():
    with pytest.raises(InvalidParameter):
        GbmParams(-0.1, 1.0)
    with pytest.raises(InvalidParameter):
        GbmParams(0.1, 0.0)
    with pytest.raises(InvalidParameter):
        sample_gbm_paths(GbmParams(0.1, 1.0), 0, 5, 0)


def test_zero_volatility_is_constant():
    paths = sample_gbm_paths(GbmParams(0.0, 1350.0), 4, 7, 1)
    assert paths.shape == (4, 8)
    assert np.all(paths == math.sqrt(1350.0))


def test_determinism_and_path_independence():
    p = GbmParams(0.01, 100.0)
    a = sample_gbm_paths(p, 20, 15, 42)
    assert np.array_equal(a, sample_gbm_paths(p, 20, 15, 42))
    # path i does not depend on how many paths are drawn
    assert np.array_equal(a[:5], sample_gbm_paths(p, 5, 15, 42))
    assert not np.array_equal(a, sample_gbm_paths(p, 20, 15, 43))


def test_paths_follow_their_generators():
    p = GbmParams(0.02, 9.0)
    paths = sample_gbm_paths(p, 3, 4, 7)
    z = path_rng(7, 2).standard_normal(4)
    log_p = math.log(9.0) + np.cumsum(-0.5 * 0.02**2 + 0.02 * z)
    assert paths[2, 1:] == pytest.approx(np.exp(0.5 * log_p), rel=1e-13)


def test_one_step_moments():
    sigma = 0.006
    paths = sample_gbm_paths(GbmParams(sigma, 1350.0), 10_000, 1, 0)
    ratio = (paths[:, 1] / paths[:, 0]) ** 2
    se = ratio.std(ddof=1) / math.sqrt(ratio.size)
    assert abs(ratio.mean() - 1.0) <= 3 * se
    assert abs(np.log(ratio).std(ddof=1) / sigma - 1.0) <= 0.05
