import json

import numpy as np
import pytest

from mmdbo.udist import (InputDistribution, beta_shift, chi2_step, dirac, gaussian, moment_match, rng_for,
                         sample, sample_many)


def test_dirac_rows_equal_center():
    b = sample(dirac(), [0.4], 5, seed=7)
    assert b.points.shape == (5, 1)
    assert np.all(b.points == 0.4)


def test_circular_concat_radius():
    law = InputDistribution("circular_concat", {"radius": 0.5, "tail_var": 0.01}, dim=10)
    b = sample(law, np.zeros(10), 100, seed=3)
    np.testing.assert_allclose(np.linalg.norm(b.points[:, :2], axis=1), 0.5, atol=1e-12)


def test_gaussian_sample_mean():
    b = sample(gaussian(0.01), [0.3], 10_000, seed=1)
    assert abs(b.points.mean() - 0.3) <= 4 * 0.01 / np.sqrt(10_000)


def test_beta_shift_support_and_mean():
    pts = sample(beta_shift(0.4, 0.2, 0.1), [0.5], 20_000, seed=2).points[:, 0]
    assert pts.min() >= 0.5 and pts.max() <= 0.6
    # Beta(0.4, 0.2) has mean 2/3
    se = 0.1 * np.sqrt((0.4 * 0.2) / (0.6**2 * 1.6) / 20_000)
    assert abs(pts.mean() - (0.5 + 0.1 * 2 / 3)) < 5 * se


def test_beta_varying_scale_follows_sine():
    law = InputDistribution("beta_varying", {"alpha": 2.0, "beta": 2.0, "scale": 0.05})
    lo = sample(law, [0.375], 2000, seed=0).points  # sin(1.5 pi) = -1: zero width
    hi = sample(law, [0.125], 2000, seed=0).points  # sin(0.5 pi) = 1: width 0.1
    np.testing.assert_allclose(lo, 0.375, atol=1e-15)
    assert 0.09 < hi.max() - hi.min() <= 0.1


def test_chi2_step_switch_is_left_closed():
    law = chi2_step()
    below = sample(law, [0.5999], 20_000, seed=4).points - 0.5999
    at = sample(law, [0.6], 20_000, seed=4).points - 0.6
    # chi2 means are g * scale
    assert abs(below.mean() / 0.01 - 0.5) < 0.05
    assert abs(at.mean() / 0.01 - 7.0) < 0.2


def test_gmm_component_weights():
    law = InputDistribution("gmm", {"means": [[-1.0], [1.0]], "covariances": [[1e-4]], "weights": [0.25, 0.75]})
    pts = sample(law, [0.0], 20_000, seed=5).points[:, 0]
    assert abs((pts > 0).mean() - 0.75) < 0.02


def test_reproducible_and_seed_sensitive():
    law = beta_shift(0.4, 0.2, 0.1)
    a = sample(law, [0.2], 50, seed=11).points
    b = sample(law, [0.2], 50, seed=11).points
    c = sample(law, [0.2], 50, seed=12).points
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_two_seeds_agree_in_mean():
    law = gaussian(0.2)
    a = sample(law, [0.0], 5000, seed=1).points.mean()
    b = sample(law, [0.0], 5000, seed=2).points.mean()
    assert abs(a - b) < 5 * 0.2 * np.sqrt(2 / 5000)


def test_sample_many_matches_single_draws():
    law = gaussian(0.05, dim=2)
    centers = np.array([[0.1, 0.2], [0.5, 0.5], [0.9, 0.0]])
    many = sample_many(law, centers, 7, [3, 4, 5])
    for c, s, block in zip(centers, [3, 4, 5], many):
        np.testing.assert_array_equal(block, sample(law, c, 7, s).points)


def test_common_seed_moves_rigidly_with_center():
    law = beta_shift(0.4, 0.2, 0.1)
    B = sample_many(law, [[0.1], [0.3]], 20, 9)
    np.testing.assert_allclose(B[1] - B[0], 0.2, atol=1e-12)


@pytest.mark.parametrize("bad", [
    lambda: InputDistribution("laplace", {}),
    lambda: InputDistribution("gaussian_iso", {"sigma": 0.0}),
    lambda: InputDistribution("gaussian_iso", {}),
    lambda: InputDistribution("gaussian_iso", {"sigma": 1.0, "mu": 0.0}),
    lambda: InputDistribution("gmm", {"means": [[0.0]], "covariances": [[1.0]], "weights": [0.9]}),
    lambda: InputDistribution("circular_concat", {"radius": 0.5, "tail_var": 0.1}, dim=1),
    lambda: sample(gaussian(0.1), [0.0], 1, 0),
    lambda: sample(gaussian(0.1), [0.0, 1.0], 5, 0),
    lambda: sample_many(gaussian(0.1), [[0.0], [1.0]], 5, [1]),
])
def test_invalid_inputs_fail_loudly(bad):
    with pytest.raises(ValueError):
        bad()


def test_json_roundtrip():
    law = InputDistribution("circular_concat", {"radius": 0.5, "tail_var": 0.01}, dim=10)
    obj = json.loads(json.dumps(law.to_json()))
    assert obj == {"family": "circular_concat", "params": {"radius": 0.5, "tail_var": 0.01}, "dim": 10}
    assert InputDistribution.from_json(obj) == law


def test_moment_match_gaussian_exact_and_beta_mc():
    mu, cov = moment_match(gaussian(0.1, dim=2), [[0.0, 1.0]])
    np.testing.assert_allclose(mu, [[0.0, 1.0]])
    np.testing.assert_allclose(cov[0], 0.01 * np.eye(2))
    mu, cov = moment_match(beta_shift(0.4, 0.2, 0.1), [[0.2]], n=10_000)
    var = 0.4 * 0.2 / (0.6**2 * 1.6)
    assert abs(mu[0, 0] - (0.2 + 0.1 * 2 / 3)) < 5 * 0.1 * np.sqrt(var / 10_000)
    assert abs(cov[0, 0, 0] / (0.01 * var) - 1) < 0.05


def test_rng_for_is_stable():
    a = rng_for(1, "x", 2).random(3)
    assert np.array_equal(a, rng_for(1, "x", 2).random(3))
    assert not np.array_equal(a, rng_for(1, "x", 3).random(3))
