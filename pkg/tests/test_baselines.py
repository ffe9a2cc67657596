import numpy as np
import pytest

from conftest import identity_net, output_placement
from oracles import random_net
from zonocp.baselines import (
    CpModel,
    IpmModel,
    cp_fit_classification,
    cp_fit_regression,
    cp_quantile,
    ipm_fit,
    model_from_dict,
    order_statistic,
)
from zonocp.calibrate import CostConfig, fit_regression
from zonocp.exceptions import DataError
from zonocp.mlp import Mlp
from zonocp.placement import place_orand, place_orand_star
from zonocp.zonotope import contains_point, volume


def test_order_statistic_examples():
    assert order_statistic([3, 1, 5, 2, 4], 1) == 4
    assert order_statistic([3, 1, 5, 2, 4], 0) == 5
    with pytest.raises(DataError):
        order_statistic([1, 2], 2)


def test_cp_quantile_examples():
    s = np.arange(1, 100, dtype=float)
    assert cp_quantile(s[:9], 0.1) == 9
    assert cp_quantile(s[:19], 0.05) == 19
    assert cp_quantile(s, 0.1) == 90
    with pytest.raises(DataError):
        cp_quantile(s[:8], 0.1)


def test_cp_quantile_against_sorted_index():
    rng = np.random.default_rng(0)
    for n in (10, 37, 200):
        s = rng.standard_normal(n)
        for eps in (0.05, 0.1, 0.3):
            k = int(np.ceil((n + 1) * (1 - eps) - 1e-9))
            if k <= n:
                assert cp_quantile(s, eps) == np.sort(s)[k - 1]


def test_cp_regression_max_and_coverage_identity():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((50, 2))
    Y = X + rng.normal(0, 0.3, (50, 2))
    net = identity_net(2)
    m0 = cp_fit_regression(net, X, Y, 0)
    assert np.allclose(m0.q, np.abs(Y - X).max(axis=0))
    prev = None
    for n_out in range(6):
        m = cp_fit_regression(net, X, Y, n_out)
        # per-dimension count of contained calibration residuals
        inside = np.abs(Y - X) <= m.q + 1e-12
        assert np.all(inside.sum(axis=0) == 50 - n_out)
        if prev is not None:
            assert np.all(m.q <= prev)
        prev = m.q


def test_cp_classification():
    # a confident, correct net: scores are ~0 so every set is the true class alone
    W = np.array([[40.0], [-40.0]])
    net = Mlp([(W, np.zeros(2))])
    X = np.array([[1.0], [0.5], [-0.7], [-2.0]])
    Y = np.eye(2)[[0, 0, 1, 1]]
    m = cp_fit_classification(net, X, Y)
    assert m.class_sets(X) == [{0}, {0}, {1}, {1}]
    full = CpModel(net, "classification", 1.0)
    assert all(s == {0, 1} for s in full.class_sets(X))
    with pytest.raises(ValueError):
        CpModel(net, "classification", 1.5)


def test_cp_classification_calibration_coverage():
    rng = np.random.default_rng(2)
    net = random_net(rng, n_x=2, hidden=[5], n_y=3)
    X = rng.standard_normal((40, 2))
    labels = rng.integers(0, 3, 40)
    for n_out in (0, 3):
        sets = cp_fit_classification(net, X, np.eye(3)[labels], n_out).class_sets(X)
        assert np.mean([lab in s for s, lab in zip(sets, labels)]) >= (40 - n_out) / 40


def ipm_data(seed=3):
    rng = np.random.default_rng(seed)
    net = random_net(rng, n_x=2, hidden=[6], n_y=2)
    X = rng.uniform(-1, 1, (30, 2))
    Y = net.forward(X) + rng.normal(0, 0.2, (30, 2))
    return net, X, Y, rng


def test_ipm_hull_contains_zcp_and_has_larger_volume():
    net, X, Y, rng = ipm_data()
    pl = place_orand(net, 0.5, seed=0)
    ipm, _ = ipm_fit(net, pl, X, Y)
    Xt = rng.uniform(-1, 1, (15, 2))
    for z, box in zip(ipm.zcp.prediction_sets(Xt), ipm.prediction_sets(Xt)):
        assert all(contains_point(box, p, 1e-9) for p in z.sample(200, rng))
        assert volume(box) >= volume(z) - 1e-12
    assert all(contains_point(b, y, 1e-6) for b, y in zip(ipm.prediction_sets(X), Y))


def test_ipm_output_only_equals_zcp():
    net, X, Y, _ = ipm_data(4)
    ipm, _ = ipm_fit(net, output_placement(2), X, Y)
    zcp = fit_regression(net, output_placement(2), X, Y, CostConfig("interval"))
    for a, b in zip(ipm.prediction_sets(X[:5]), zcp.prediction_sets(X[:5])):
        assert np.allclose(a.center, b.center)
        assert np.allclose(np.abs(a.generators).sum(axis=1), np.abs(b.generators).sum(axis=1))
        assert volume(a) == pytest.approx(volume(b))


def test_ipm_rejects_non_identity_template():
    net, X, Y, _ = ipm_data()
    with pytest.raises(ValueError):
        ipm_fit(net, place_orand_star(net, 0.3, seed=0), X, Y)


def test_model_round_trips():
    net, X, Y, _ = ipm_data()
    ipm, _ = ipm_fit(net, place_orand(net, 0.3, seed=0), X, Y, n_out=1)
    cp = cp_fit_regression(net, X, Y, 2)
    for m in (ipm, cp, ipm.zcp):
        back = model_from_dict(m.to_dict())
        assert type(back) is type(m)
        assert np.allclose(back.prediction_sets(X[:1])[0].generators, m.prediction_sets(X[:1])[0].generators)
    assert isinstance(model_from_dict(ipm.to_dict()), IpmModel)
    with pytest.raises(ValueError):
        model_from_dict({"kind": "nope"})
