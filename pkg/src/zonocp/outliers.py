"""Outlier removal: choose up to n_out calibration points to exempt from containment.

All methods minimise the same identification objective (the calibration cost
summed over every calibration point) with containment enforced only on the
retained points, so their objectives are directly comparable.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .calibrate import CalibrationProblem, ZcpModel
from .exceptions import DataError, SolverError
from .lp import LinearProgram, solve_lp

log = logging.getLogger(__name__)

DELTA_TOL = 1e-7
STALE_TOL = 1e-6


@dataclass
class OutlierResult:
    removed: list
    objective: float
    alpha: np.ndarray
    method: str
    nodes: int = 0
    lp_solves: int = 0
    proven_optimal: bool = True
    path: list = field(default_factory=list)  # greedy: [(removed index, objective), ...]

    def to_dict(self):
        return {"removed": [int(i) for i in self.removed], "objective": self.objective,
                "alpha": np.asarray(self.alpha).tolist(), "method": self.method,
                "nodes": self.nodes, "lp_solves": self.lp_solves,
                "proven_optimal": self.proven_optimal,
                "path": [[int(i), float(o)] for i, o in self.path]}


def _boundary_lp(prob: CalibrationProblem, m, alpha, active, cap):
    """max delta s.t. |beta_j| + f_j delta <= alpha_j, containment of point m at alpha."""
    nu = alpha.size
    f = active.astype(float)
    I = np.eye(nu)
    A_ub = np.vstack([np.hstack([I, f[:, None]]), np.hstack([-I, f[:, None]])])
    b_ub = np.concatenate([alpha, alpha])
    if prob.task == "regression":
        A_eq = np.hstack([prob.A[m], np.zeros((prob.net.n_y, 1))])
        b_eq = prob.resid[m]
    else:
        (M, rhs), = prob._containment_blocks([m])
        A_ub = np.vstack([A_ub, np.hstack([M, np.zeros((M.shape[0], 1))])])
        b_ub = np.concatenate([b_ub, rhs])
        A_eq = b_eq = None
    c = np.zeros(nu + 1)
    c[-1] = -1.0
    bounds = np.vstack([np.tile([-np.inf, np.inf], (nu, 1)), [[-cap, cap]]])
    return LinearProgram(c, A_ub, b_ub, A_eq, b_eq, bounds)


def boundary_points(prob: CalibrationProblem, alpha_star, idx=None, delta_tol=DELTA_TOL):
    """Points whose containment blocks any decrease of a positive alpha component.

    One small LP per point maximises the slack delta_m = min over active j of
    alpha_j - |beta_mj|. Returns (boundary indices, delta vector over ``idx``).
    """
    alpha = np.asarray(alpha_star, dtype=float)
    idx = np.arange(prob.n_points) if idx is None else np.asarray(idx, dtype=int)
    active = alpha > 0
    cap = float(alpha.max(initial=0.0))
    if not active.any():
        # nothing can shrink, so no point can block a decrease
        return [], np.full(idx.size, cap)
    deltas = np.empty(idx.size)
    for k, m in enumerate(idx):
        sol = solve_lp(_boundary_lp(prob, m, alpha, active, cap))
        if not sol.optimal or sol.x[-1] < -STALE_TOL * max(1.0, cap):
            raise SolverError(f"point {m} is not contained at the given alpha; alpha is stale")
        deltas[k] = sol.x[-1]
    return [int(m) for m in idx[deltas <= delta_tol]], deltas


class _Refitter:
    def __init__(self, prob):
        self.prob = prob
        self.cache = {}
        self.lp_solves = 0

    def __call__(self, removed):
        key = tuple(sorted(removed))
        if key not in self.cache:
            keep = np.setdiff1d(np.arange(self.prob.n_points), key)
            self.cache[key] = self.prob.solve(keep)
            self.lp_solves += 1
        return self.cache[key]

    def keep(self, removed):
        return np.setdiff1d(np.arange(self.prob.n_points), removed)


def _check_n_out(prob, n_out):
    if n_out < 0:
        raise ValueError("n_out must be nonnegative")
    if n_out >= prob.n_points:
        raise DataError(f"cannot remove {n_out} of {prob.n_points} calibration points")


def detect_search(prob: CalibrationProblem, n_out, delta_tol=DELTA_TOL) -> OutlierResult:
    """Exhaustive tree over boundary points, memoised by removal set."""
    _check_n_out(prob, n_out)
    refit = _Refitter(prob)
    frontier = {()}
    leaves = {}
    nodes = 0
    for depth in range(n_out):
        nxt = set()
        for node in sorted(frontier):
            sol = refit(node)
            bnd, _ = boundary_points(prob, sol.alpha, refit.keep(node), delta_tol)
            refit.lp_solves += len(refit.keep(node))
            nodes += 1
            if not bnd:
                leaves[node] = sol.objective
            for b in bnd:
                nxt.add(tuple(sorted(node + (b,))))
        frontier = nxt
    for node in frontier:
        leaves[node] = refit(node).objective
    best = min(leaves, key=lambda k: (leaves[k], len(k), k))
    sol = refit(best)
    return OutlierResult(list(best), sol.objective, sol.alpha, "search", nodes=nodes + len(frontier),
                         lp_solves=refit.lp_solves)


def detect_greedy(prob: CalibrationProblem, n_out, delta_tol=DELTA_TOL) -> OutlierResult:
    """Keep only the cheapest child per level; ties go to the lowest point index."""
    _check_n_out(prob, n_out)
    refit = _Refitter(prob)
    node = ()
    sol = refit(node)
    path = []
    nodes = 1
    for _ in range(n_out):
        keep = refit.keep(node)
        bnd, _ = boundary_points(prob, sol.alpha, keep, delta_tol)
        refit.lp_solves += keep.size
        if not bnd:
            break
        best = None
        for b in sorted(bnd):
            child = refit(node + (b,))
            nodes += 1
            if best is None or child.objective < best[1].objective:
                best = (b, child)
        node = tuple(sorted(node + (best[0],)))
        sol = best[1]
        path.append((best[0], sol.objective))
    return OutlierResult(list(node), sol.objective, sol.alpha, "greedy", nodes=nodes,
                         lp_solves=refit.lp_solves, path=path)


def detect_milp(prob: CalibrationProblem, n_out, node_cap=10_000) -> OutlierResult:
    _check_n_out(prob, n_out)
    if n_out == 0:
        sol = prob.solve()
        return OutlierResult([], sol.objective, sol.alpha, "milp", nodes=1, lp_solves=1)
    _, _, removed, msol = prob.solve_milp(n_out, node_cap=node_cap)
    removed = sorted(int(i) for i in removed)
    sol = prob.solve(np.setdiff1d(np.arange(prob.n_points), removed))
    return OutlierResult(removed, sol.objective, sol.alpha, "milp", nodes=msol.nodes,
                         lp_solves=msol.nodes + 1, proven_optimal=msol.proven_optimal)


def detect_rmse(prob: CalibrationProblem, n_out) -> OutlierResult:
    """Drop the n_out points with the largest ||y - f(x)||_2 (ties: lowest index), then refit."""
    _check_n_out(prob, n_out)
    err = np.linalg.norm(prob.resid, axis=1)
    order = np.lexsort((np.arange(err.size), -err))
    removed = sorted(int(i) for i in order[:n_out])
    sol = prob.solve(np.setdiff1d(np.arange(prob.n_points), removed))
    return OutlierResult(removed, sol.objective, sol.alpha, "rmse", nodes=1, lp_solves=1)


METHODS = {"search": detect_search, "greedy": detect_greedy, "milp": detect_milp, "rmse": detect_rmse}


def detect(prob: CalibrationProblem, n_out, method="greedy") -> OutlierResult:
    try:
        fn = METHODS[method]
    except KeyError:
        raise ValueError(f"unknown outlier method {method!r}; choose from {sorted(METHODS)}") from None
    return fn(prob, n_out)


def fit_zcp(net, placement, X, Y, task="regression", cost=None, n_out=0, method="greedy",
            lp_backend="auto"):
    """Calibrate scaling factors with up to ``n_out`` outliers removed by ``method``.

    Returns (ZcpModel, OutlierResult).
    """
    prob = CalibrationProblem(net, placement, X, Y, task, cost, lp_backend)
    res = detect(prob, n_out, method)
    model = ZcpModel(net, placement, res.alpha, task, prob.cost, res.objective, res.removed)
    return model, res
