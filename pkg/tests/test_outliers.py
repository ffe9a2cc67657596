import numpy as np
import pytest

from conftest import identity_net, output_placement
from oracles import brute_force_removal, random_net
from zonocp.calibrate import CalibrationProblem, CostConfig
from zonocp.exceptions import DataError
from zonocp.outliers import (
    boundary_points,
    detect,
    detect_greedy,
    detect_milp,
    detect_rmse,
    detect_search,
    fit_zcp,
)
from zonocp.placement import place_orand
from zonocp.zonotope import contains_point

INTERVAL = CostConfig("interval")


def one_d(resid):
    resid = np.asarray(resid, float)[:, None]
    return CalibrationProblem(identity_net(1), output_placement(1), np.zeros_like(resid), resid,
                              cost=INTERVAL)


def random_instance(seed, n_m=10, n_y=2):
    rng = np.random.default_rng(seed)
    net = random_net(rng, n_x=2, hidden=[4], n_y=n_y)
    pl = place_orand(net, 0.3, seed=seed)
    X = rng.uniform(-1, 1, (n_m, 2))
    Y = net.forward(X) + rng.normal(0, 0.3, (n_m, n_y))
    return CalibrationProblem(net, pl, X, Y, cost=CostConfig("rotated_interval", 3, seed))


def test_boundary_one_d_example():
    prob = one_d([-0.5, 0.2, 0.4])
    alpha = prob.solve().alpha
    assert alpha[0] == pytest.approx(0.5)
    bnd, delta = boundary_points(prob, alpha)
    assert bnd == [0]
    assert np.allclose(delta, [0.0, 0.3, 0.1], atol=1e-9)


def test_boundary_zero_alpha():
    prob = one_d([0.0, 0.0, 0.0])
    bnd, delta = boundary_points(prob, prob.solve().alpha)
    assert bnd == [] and np.all(delta == 0.0)


def test_boundary_duplicated_binding_point():
    prob = one_d([0.1, -0.7, 0.3, -0.7])
    bnd, _ = boundary_points(prob, prob.solve().alpha)
    assert bnd == [1, 3]


def test_boundary_rejects_stale_alpha():
    from zonocp.exceptions import SolverError
    prob = one_d([-0.5, 0.2, 0.4])
    with pytest.raises(SolverError):
        boundary_points(prob, np.array([0.3]))


def test_one_d_removals():
    prob = one_d([-0.5, 0.2, 0.4, 0.1, -0.35])
    res = detect_search(prob, 2)
    assert res.removed == [0, 2]
    # the cost row is 1 per point and sums over all five, retained or not
    assert res.alpha[0] == pytest.approx(0.35) and res.objective == pytest.approx(5 * 0.35)
    assert detect_greedy(prob, 2).removed == [0, 2]
    assert detect_milp(prob, 2).objective == pytest.approx(5 * 0.35)


def test_rmse_example():
    prob = one_d([-0.5, 0.2, 0.4])
    res = detect_rmse(prob, 1)
    assert res.removed == [0] and res.alpha[0] == pytest.approx(0.4)


def test_n_out_zero_is_base_fit():
    prob = random_instance(0)
    base = prob.solve().objective
    for method in ("search", "greedy", "milp", "rmse"):
        res = detect(prob, 0, method)
        assert res.removed == [] and res.objective == pytest.approx(base, rel=1e-9)


def test_n_out_validation():
    prob = one_d([0.1, 0.2])
    with pytest.raises(DataError):
        detect_search(prob, 2)
    with pytest.raises(ValueError):
        detect_greedy(prob, -1)
    with pytest.raises(ValueError):
        detect(prob, 1, "nope")


@pytest.mark.parametrize("seed", range(6))
def test_search_and_milp_match_brute_force(seed):
    prob = random_instance(seed, n_m=8 + seed % 3)
    for n_out in (1, 2):
        ref = brute_force_removal(prob.A, prob.resid, prob.c_alpha, n_out)
        s = detect_search(prob, n_out)
        m = detect_milp(prob, n_out)
        g = detect_greedy(prob, n_out)
        assert s.objective == pytest.approx(ref, rel=1e-7, abs=1e-9)
        assert m.objective == pytest.approx(ref, rel=1e-7, abs=1e-9)
        assert m.proven_optimal
        assert g.objective >= s.objective - 1e-9


def test_greedy_depth_one_equals_search():
    for seed in range(4):
        prob = random_instance(seed + 10)
        assert detect_greedy(prob, 1).objective == pytest.approx(detect_search(prob, 1).objective)


def test_objective_non_increasing_in_n_out():
    prob = random_instance(3, n_m=12)
    for method in ("search", "greedy", "milp", "rmse"):
        objs = [detect(prob, k, method).objective for k in range(4)]
        assert all(b <= a + 1e-9 for a, b in zip(objs, objs[1:])), method


def test_search_removals_are_boundary_points():
    prob = random_instance(5, n_m=10)
    res = detect_search(prob, 2)
    first, _ = boundary_points(prob, prob.solve().alpha)
    assert set(res.removed) & set(first)
    for drop in res.removed:
        rest = [m for m in res.removed if m != drop]
        keep = np.setdiff1d(np.arange(prob.n_points), rest)
        bnd, _ = boundary_points(prob, prob.solve(keep).alpha, keep)
        if drop in bnd:
            break
    else:
        pytest.fail("no removal order reaches the result through boundary points")


def test_greedy_deterministic():
    prob = random_instance(7)
    a, b = detect_greedy(prob, 3), detect_greedy(prob, 3)
    assert a.removed == b.removed and a.path == b.path


def test_retained_points_contained_after_removal():
    rng = np.random.default_rng(8)
    net = random_net(rng, n_x=2, hidden=[5], n_y=2)
    pl = place_orand(net, 0.4, seed=1)
    X = rng.uniform(-1, 1, (30, 2))
    Y = net.forward(X) + rng.normal(0, 0.2, (30, 2))
    model, res = fit_zcp(net, pl, X, Y, n_out=3, method="greedy")
    assert len(res.removed) == 3 and model.removed == res.removed
    keep = np.setdiff1d(np.arange(30), res.removed)
    sets = model.prediction_sets(X[keep])
    assert all(contains_point(z, y, 1e-6) for z, y in zip(sets, Y[keep]))


def test_classification_removal_reduces_objective():
    rng = np.random.default_rng(9)
    net = random_net(rng, n_x=2, hidden=[5], n_y=3)
    pl = place_orand(net, 0.4, seed=0)
    X = rng.uniform(-1, 1, (12, 2))
    Y = np.eye(3)[rng.integers(0, 3, 12)]
    prob = CalibrationProblem(net, pl, X, Y, "classification", INTERVAL)
    base = prob.solve().objective
    s, m = detect_search(prob, 1), detect_milp(prob, 1)
    assert s.objective <= base + 1e-9
    assert m.objective == pytest.approx(s.objective, rel=1e-7, abs=1e-9)


def test_result_serializes():
    res = detect_greedy(one_d([-0.5, 0.2, 0.4]), 1)
    d = res.to_dict()
    assert d["removed"] == [0] and d["method"] == "greedy" and d["path"][0][0] == 0
