"""Gradient boosted trees: exact degenerate behavior, fit quality, determinism."""

import numpy as np
import pytest

from synthgraph.boosting import BoostedTreesRegressor, soft_threshold


def r2(y, pred):
    ss_res = np.sum((y - pred) ** 2)
    ss_tot = np.sum((y - y.mean()) ** 2)
    return 1.0 - ss_res / ss_tot


def test_soft_threshold():
    assert soft_threshold(15.0, 10.0) == 5.0
    assert soft_threshold(-15.0, 10.0) == -5.0
    assert soft_threshold(5.0, 10.0) == 0.0
    assert soft_threshold(-10.0, 10.0) == 0.0


def test_constant_target_is_exact():
    # zero residual gradients are L1-thresholded to zero: no splits, no updates
    x = np.random.default_rng(0).normal(size=(200, 3))
    y = np.full(200, 7.25)
    model = BoostedTreesRegressor().fit(x, y)
    np.testing.assert_array_equal(model.predict(x), np.full(200, 7.25))


def test_planted_linear_relation(rng):
    x = rng.normal(size=(4000, 4))
    y = 3.0 * x[:, 0] - 2.0 * x[:, 1] + rng.normal(0, 0.05, size=4000)
    model = BoostedTreesRegressor().fit(x, y)
    assert r2(y, model.predict(x)) > 0.9


def test_step_function(rng):
    x = rng.uniform(-1, 1, size=(2000, 1))
    y = np.where(x[:, 0] > 0.25, 5.0, -5.0)
    model = BoostedTreesRegressor().fit(x, y)
    pred = model.predict(x)
    assert r2(y, pred) > 0.99


def test_deterministic(rng):
    x = rng.normal(size=(500, 3))
    y = x[:, 0] * x[:, 1] + rng.normal(0, 0.1, size=500)
    p1 = BoostedTreesRegressor().fit(x, y).predict(x)
    p2 = BoostedTreesRegressor().fit(x, y).predict(x)
    np.testing.assert_array_equal(p1, p2)


def test_prediction_on_unseen_inputs(rng):
    x = rng.normal(size=(3000, 2))
    y = np.sin(x[:, 0]) + 0.5 * x[:, 1]
    model = BoostedTreesRegressor().fit(x, y)
    x_new = rng.normal(size=(500, 2))
    y_new = np.sin(x_new[:, 0]) + 0.5 * x_new[:, 1]
    assert r2(y_new, model.predict(x_new)) > 0.8


def test_single_distinct_value_feature(rng):
    # unsplittable features must not crash; prediction falls back to base
    x = np.ones((50, 2))
    y = rng.normal(size=50)
    model = BoostedTreesRegressor().fit(x, y)
    pred = model.predict(x)
    np.testing.assert_allclose(pred, np.full(50, y.mean()), atol=1e-9)


def test_minimum_two_rows():
    with pytest.raises(Exception):
        BoostedTreesRegressor().fit(np.ones((1, 1)), np.ones(1))


def test_l1_penalty_shrinks_small_signals(rng):
    # alpha=10 zeroes leaves whose gradient sum is below the threshold
    x = rng.normal(size=(100, 1))
    y = 0.001 * x[:, 0]
    model = BoostedTreesRegressor().fit(x, y)
    pred = model.predict(x)
    np.testing.assert_allclose(pred, np.full(100, y.mean()), atol=1e-6)
