import csv
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from conftest import identity_net, output_placement
from oracles import class_margin_linprog, random_net
from zonocp.baselines import ipm_fit
from zonocp.calibrate import CostConfig, ZcpModel, fit_classification, fit_regression
from zonocp.evaluation import (
    bootstrap_ci,
    classes_of_vector,
    classes_of_zonotope,
    conservatism_classification,
    conservatism_regression,
    coverage_classification,
    coverage_regression,
    evaluate,
    normalized_metrics,
    set_volume,
    volume_blocks,
    write_reports_csv,
    write_svg,
)
from zonocp.exceptions import DataError
from zonocp.placement import place_orand
from zonocp.zonotope import Zonotope, projected_volume, volume


def test_classes_of_vector():
    assert classes_of_vector([0.2, 0.8, 0.5]) == {1}
    assert classes_of_vector([1.0, 1.0, 0.0]) == {0, 1}
    assert classes_of_vector([3.0]) == {0}


def test_classes_of_zonotope_examples():
    assert classes_of_zonotope(Zonotope([0.2, 0.8], np.zeros((2, 0)))) == {1}
    assert classes_of_zonotope(Zonotope.box([1.0, 0.0], [0.4, 0.4])) == {0}
    # box vertices: the best y2 - y1 is (0 + 0.4) - (1 - 0.4) = -0.2
    verts = np.array([[1 + a, b] for a in (-0.4, 0.4) for b in (-0.4, 0.4)])
    assert (verts[:, 1] - verts[:, 0]).max() == pytest.approx(-0.2)
    assert classes_of_zonotope(Zonotope.box([0.0, 0.0, 0.0], [0.1, 0.3, 0.2])) == {0, 1, 2}


def test_classes_match_linprog_oracle():
    rng = np.random.default_rng(0)
    for _ in range(60):
        n = int(rng.integers(2, 5))
        c = rng.normal(0, 1, n)
        G = rng.normal(0, 0.5, (n, int(rng.integers(1, 6))))
        expected = {i for i in range(n) if class_margin_linprog(c, G, i) >= -1e-9}
        assert classes_of_zonotope(Zonotope(c, G)) == expected


def test_singleton_equals_vector_classes():
    rng = np.random.default_rng(1)
    for _ in range(20):
        c = rng.integers(0, 3, 4).astype(float)
        assert classes_of_zonotope(Zonotope(c, np.zeros((4, 2)))) == classes_of_vector(c)


def test_classes_monotone_under_scaling():
    rng = np.random.default_rng(2)
    for _ in range(10):
        c, G = rng.normal(0, 1, 3), rng.normal(0, 1, (3, 4))
        prev = set()
        for s in np.linspace(0, 2, 9):
            cur = classes_of_zonotope(Zonotope(c, s * G))
            assert prev <= cur
            prev = cur


def box_model(alpha):
    return ZcpModel(identity_net(2), output_placement(2), alpha)


def test_regression_coverage_examples():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((20, 2))
    Y = X + rng.normal(0, 0.1, (20, 2))
    Y[:5] = X[:5]
    assert coverage_regression(box_model([1e6, 1e6]), X, Y)[0] == 1.0
    cov, hits = coverage_regression(box_model([0.0, 0.0]), X, Y)
    assert cov == 0.25 and hits[:5].all() and not hits[5:].any()


def test_coverage_monotone_in_alpha_scaling():
    rng = np.random.default_rng(4)
    net = random_net(rng, n_x=2, hidden=[5], n_y=2)
    pl = place_orand(net, 0.5, seed=0)
    X = rng.uniform(-1, 1, (60, 2))
    Y = net.forward(X) + rng.normal(0, 0.3, (60, 2))
    alpha = fit_regression(net, pl, X[:30], Y[:30]).alpha
    covs = [coverage_regression(ZcpModel(net, pl, s * alpha), X[30:], Y[30:])[0] for s in (0, 0.5, 1, 1.5, 3)]
    assert all(b >= a for a, b in zip(covs, covs[1:]))
    assert coverage_regression(ZcpModel(net, pl, alpha), X[:30], Y[:30])[0] == 1.0


def test_conservatism_regression():
    X = np.random.default_rng(5).standard_normal((7, 2))
    assert conservatism_regression(box_model([0.0, 0.0]), X)[0] == 0.0
    assert conservatism_regression(box_model([0.3, 0.5]), X)[0] == pytest.approx(0.6 * 1.0)


def test_ipm_more_conservative_than_zcp():
    rng = np.random.default_rng(6)
    net = random_net(rng, n_x=2, hidden=[6], n_y=2)
    pl = place_orand(net, 0.5, seed=0)
    X = rng.uniform(-1, 1, (40, 2))
    Y = net.forward(X) + rng.normal(0, 0.2, (40, 2))
    ipm, _ = ipm_fit(net, pl, X[:25], Y[:25])
    _, v_ipm = conservatism_regression(ipm, X[25:])
    _, v_zcp = conservatism_regression(ipm.zcp, X[25:])
    assert np.all(v_ipm >= v_zcp - 1e-12)


def test_classification_metrics():
    rng = np.random.default_rng(7)
    net = random_net(rng, n_x=2, hidden=[5], n_y=3)
    pl = place_orand(net, 0.5, seed=0)
    X = rng.uniform(-1, 1, (30, 2))
    Y = np.eye(3)[rng.integers(0, 3, 30)]
    model = fit_classification(net, pl, X, Y, CostConfig("interval"))
    assert coverage_classification(model, X, Y)[0] == 1.0
    zero = ZcpModel(net, pl, np.zeros(pl.n_generators), "classification")
    mean, counts = conservatism_classification(zero, X)
    assert np.all(counts == [len(classes_of_vector(f)) for f in net.forward(X)])
    assert mean == pytest.approx(counts.mean())
    with pytest.raises(DataError):
        coverage_regression(model, X, Y)


def test_set_volume_blocks():
    assert volume_blocks(7) == [[0, 1, 2], [3, 4, 5], [6]]
    rng = np.random.default_rng(8)
    z = Zonotope(np.zeros(7), rng.normal(0, 1, (7, 4)))
    expected = sum(projected_volume(z, d) for d in ([0, 1, 2], [3, 4, 5], [6]))
    assert set_volume(z) == pytest.approx(expected)
    small = Zonotope(np.zeros(3), rng.normal(0, 1, (3, 4)))
    assert set_volume(small) == volume(small)


def test_normalized_metrics():
    v = np.array([1.0, 2.0, 4.0])
    assert normalized_metrics(v, v) == 1.0
    # mean of ratios, not ratio of means
    assert normalized_metrics([1.0, 4.0], [1.0, 2.0]) == pytest.approx(1.5)
    with pytest.raises(DataError):
        normalized_metrics([1.0], [0.0])
    with pytest.raises(DataError):
        normalized_metrics([1.0, 2.0], [1.0])


def test_bootstrap_constant_and_seeded():
    assert bootstrap_ci(np.full(10, 3.0)) == (3.0, 3.0)
    x = np.random.default_rng(0).uniform(size=50)
    assert bootstrap_ci(x, seed=4) == bootstrap_ci(x, seed=4)


def test_bootstrap_coverage_simulation():
    rng = np.random.default_rng(9)
    hits = 0
    trials = 300
    for t in range(trials):
        lo, hi = bootstrap_ci(rng.uniform(size=100), reps=500, seed=t)
        hits += lo <= 0.5 <= hi
    assert 0.90 <= hits / trials <= 0.98


def test_evaluate_and_csv(tmp_path):
    X = np.random.default_rng(10).standard_normal((12, 2))
    rep, per_point = evaluate(box_model([0.5, 0.5]), X, X + 0.1, "zcp", 0, seed=1)
    assert rep.coverage == 1.0 and rep.conservatism == pytest.approx(1.0) and rep.n_test == 12
    assert rep.conservatism_lo == rep.conservatism_hi == pytest.approx(1.0)
    assert per_point.shape == (12,)
    path = tmp_path / "r.csv"
    write_reports_csv([rep], path)
    rows = list(csv.DictReader(open(path)))
    assert rows[0]["predictor"] == "zcp" and float(rows[0]["coverage"]) == 1.0


def test_svg(tmp_path):
    path = tmp_path / "sets.svg"
    zs = [Zonotope.box([0, 0], [1, 1]), Zonotope([2.0, 1.0], [[1.0, 0.5], [0.0, 1.0]])]
    assert write_svg(zs, [[0, 0], [2, 1]], path) == 2
    root = ET.parse(path).getroot()
    polys = [e for e in root.iter() if e.tag.endswith("polygon")]
    assert len(polys) == 2
    assert len(polys[0].get("points").split()) == 4
