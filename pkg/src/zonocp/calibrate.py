"""Identification of the uncertainty scaling factors alpha by linear programming.

The prediction set for input x is <f(x), D(x) G_u diag(alpha)> where D(x) is
the uncertainty Jacobian of the base network. Calibration picks alpha >= 0
minimising a linear size surrogate summed over the calibration points subject
to every point being covered (regression) or having its class among the
classes of its prediction set (classification).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .data import expand_multilabel
from .exceptions import DimensionError, InfeasibleError, SolverError
from .lp import LinearProgram, MilpProgram, solve_lp, solve_milp
from .mlp import Mlp
from .placement import Placement
from .zonotope import Zonotope

log = logging.getLogger(__name__)

COST_KINDS = ("interval", "rotated_interval", "generator_lengths", "score", "score_difference")
ELASTIC_TOL = 1e-7


@dataclass
class CostConfig:
    kind: str = "rotated_interval"
    n_rotations: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise ValueError(f"unknown cost {self.kind!r}; choose from {COST_KINDS}")
        if self.kind == "rotated_interval" and self.n_rotations < 0:
            raise ValueError("n_rotations must be nonnegative")

    def to_dict(self):
        return {"kind": self.kind, "n_rotations": self.n_rotations, "seed": self.seed}


def random_rotations(n_y, n_r, seed=0):
    """[I, R_1, ..., R_{n_r}] with Haar-distributed orthogonal R_i."""
    if n_r < 0:
        raise ValueError("n_r must be nonnegative")
    rng = np.random.default_rng(seed)
    out = [np.eye(n_y)]
    for _ in range(n_r):
        Q, R = np.linalg.qr(rng.standard_normal((n_y, n_y)))
        out.append(Q * np.where(np.diag(R) < 0, -1.0, 1.0))
    return out


def cost_rows(A, cost: CostConfig, labels=None, rotations=None):
    """Objective coefficients on alpha contributed by each point.

    ``A`` holds D(x_m) G_u for every point, shape (N, n_y, nu); returns (N, nu).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim == 2:
        A = A[None]
    n, n_y, _ = A.shape
    if cost.kind in ("interval", "rotated_interval"):
        if rotations is None:
            n_r = cost.n_rotations if cost.kind == "rotated_interval" else 0
            rotations = random_rotations(n_y, n_r, cost.seed)
        return sum(np.abs(np.einsum("ij,mjk->mik", R, A)).sum(axis=1) for R in rotations)
    if cost.kind == "generator_lengths":
        return np.linalg.norm(A, axis=1)
    if labels is None:
        raise ValueError(f"cost {cost.kind!r} is only defined for classification")
    labels = np.asarray(labels, dtype=int)
    rows = np.arange(n)
    correct = A[rows, labels][:, None, :]  # (N, 1, nu)
    wrong = np.ones((n, n_y), dtype=bool)
    wrong[rows, labels] = False
    if cost.kind == "score":
        return (np.abs(A) * wrong[:, :, None]).sum(axis=1)
    return (np.abs(A - correct) * wrong[:, :, None]).sum(axis=1)


def class_matrix(label, n_y):
    """T = 1 e_label^T - I; T z >= 0 iff class ``label`` attains the maximum of z."""
    T = -np.eye(n_y)
    T[:, label] += 1.0
    return T


@dataclass
class ZcpModel:
    net: Mlp
    placement: Placement
    alpha: np.ndarray
    task: str = "regression"
    cost: CostConfig = field(default_factory=CostConfig)
    objective: float = 0.0
    removed: list = field(default_factory=list)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).ravel()
        if self.alpha.size != self.placement.n_generators:
            raise DimensionError("alpha length must equal the number of template generators")
        if np.any(self.alpha < 0):
            raise ValueError("scaling factors must be nonnegative")

    def generator_matrices(self, X):
        return self.placement.jacobian(self.net, X) * self.alpha

    def prediction_set(self, x) -> Zonotope:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise DimensionError("prediction_set takes one input; use prediction_sets for batches")
        return Zonotope(self.net.forward(x), self.generator_matrices(x[None])[0])

    def prediction_sets(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = self.net.forward(X)
        Gs = self.generator_matrices(X)
        return [Zonotope(f, G) for f, G in zip(F, Gs)]

    def to_dict(self):
        return {"kind": "zcp", "task": self.task, "net": self.net.to_dict(),
                "placement": self.placement.to_dict(), "alpha": self.alpha.tolist(),
                "cost": self.cost.to_dict(), "objective": self.objective,
                "removed": [int(i) for i in self.removed]}

    @classmethod
    def from_dict(cls, d):
        return cls(Mlp.from_dict(d["net"]), Placement.from_dict(d["placement"]), d["alpha"],
                   d["task"], CostConfig(**d["cost"]), d["objective"], d.get("removed", []))


@dataclass
class CalibrationSolution:
    alpha: np.ndarray
    objective: float
    beta: np.ndarray  # (k, nu) for the points that were solved
    indices: np.ndarray


class CalibrationProblem:
    """Calibration data pre-processed for repeated LP solves on subsets.

    Holds A_m = D(x_m) G_u, the per-point cost rows, and the containment data
    (residuals y - f(x) for regression; f(x) and labels for classification).
    """

    def __init__(self, net: Mlp, placement: Placement, X, Y, task="regression",
                 cost: CostConfig = None, lp_backend="auto"):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.shape[0] != Y.shape[0] or X.shape[0] == 0:
            raise DimensionError("calibration needs matching, non-empty X and Y")
        if Y.shape[1] != net.n_y:
            raise DimensionError(f"outputs have {Y.shape[1]} columns, network has {net.n_y}")
        self.cost = cost or CostConfig()
        if task == "regression" and self.cost.kind in ("score", "score_difference"):
            raise ValueError(f"cost {self.cost.kind!r} is only defined for classification")
        self.source_rows = np.arange(X.shape[0])
        if task == "classification":
            X, Y, self.source_rows = expand_multilabel(X, Y)
        elif task != "regression":
            raise ValueError(f"unknown task {task!r}")
        self.net, self.placement, self.task = net, placement, task
        self.lp_backend = lp_backend
        self.X, self.Y = X, Y
        self.F = net.forward(X)
        self.A = placement.jacobian(net, X)
        self.labels = np.argmax(Y, axis=1) if task == "classification" else None
        self.resid = Y - self.F
        self.rotations = random_rotations(net.n_y, self.cost.n_rotations if self.cost.kind == "rotated_interval" else 0,
                                          self.cost.seed)
        self.C = cost_rows(self.A, self.cost, self.labels, self.rotations)
        # The objective always sums over every calibration point: exempting a
        # point drops its containment constraint, not its prediction-set size.
        self.c_alpha = self.C.sum(axis=0)

    @property
    def n_points(self):
        return self.X.shape[0]

    @property
    def n_generators(self):
        return self.A.shape[2]

    def _containment_blocks(self, idx):
        """Per point: (matrix on beta, right-hand side, kind) of the containment constraint."""
        blocks = []
        for m in idx:
            if self.task == "regression":
                blocks.append((self.A[m], self.resid[m]))
            else:
                T = np.delete(class_matrix(self.labels[m], self.net.n_y), self.labels[m], axis=0)
                # the label must win somewhere in the set: T (f + A beta) >= 0
                blocks.append((-T @ self.A[m], T @ self.F[m]))
        return blocks

    def _abs_rows(self, k, nu, extra_cols=0):
        """Rows encoding -alpha - beta_m <= 0 and -alpha + beta_m <= 0 for k points."""
        tile = sp.vstack([-sp.identity(nu)] * k) if k else sp.csr_matrix((0, nu))
        I = sp.identity(k * nu)
        Z = sp.csr_matrix((k * nu, extra_cols))
        return sp.vstack([sp.hstack([tile, -I, Z]), sp.hstack([tile, I, Z])]).tocsr()

    def build_lp(self, idx=None):
        idx = np.arange(self.n_points) if idx is None else np.asarray(idx, dtype=int)
        k, nu = idx.size, self.n_generators
        c = np.concatenate([self.c_alpha, np.zeros(k * nu)])
        bounds = np.vstack([np.tile([0.0, np.inf], (nu, 1)), np.tile([-np.inf, np.inf], (k * nu, 1))])
        blocks = self._containment_blocks(idx)
        M = sp.block_diag([b[0] for b in blocks], format="csr") if k else sp.csr_matrix((0, 0))
        rhs = np.concatenate([b[1] for b in blocks]) if k else np.zeros(0)
        M = sp.hstack([sp.csr_matrix((M.shape[0], nu)), M]).tocsr()
        abs_rows = self._abs_rows(k, nu)
        if self.task == "regression":
            return LinearProgram(c, abs_rows, np.zeros(abs_rows.shape[0]), M, rhs, bounds)
        return LinearProgram(c, sp.vstack([abs_rows, M]).tocsr(),
                             np.concatenate([np.zeros(abs_rows.shape[0]), rhs]), None, None, bounds)

    def solve(self, idx=None) -> CalibrationSolution:
        idx = np.arange(self.n_points) if idx is None else np.asarray(idx, dtype=int)
        p = self.build_lp(idx)
        sol = solve_lp(p, backend=self.lp_backend)
        if sol.status == "infeasible":
            bad = self.diagnose_infeasibility(idx)
            raise InfeasibleError(
                "calibration LP is infeasible; the placed uncertainties cannot reach "
                f"measurements {bad[:10]}{'...' if len(bad) > 10 else ''}", bad)
        if not sol.optimal:
            raise SolverError(f"calibration LP returned {sol.status}")
        nu = self.n_generators
        alpha = np.maximum(sol.x[:nu], 0.0)
        return CalibrationSolution(alpha, float(sol.objective), sol.x[nu:].reshape(-1, nu), idx)

    def diagnose_infeasibility(self, idx):
        """Indices (into the original data) whose containment needs elastic slack."""
        idx = np.asarray(idx, dtype=int)
        p = self.build_lp(idx)
        nu = self.n_generators
        blocks = self._containment_blocks(idx)
        sizes = np.array([b[1].size for b in blocks])
        owner = np.repeat(idx, sizes)
        r = sizes.sum()
        n = p.n_vars
        if self.task == "regression":
            # A beta + s_plus - s_minus = resid
            A_eq = sp.hstack([p.A_eq, sp.identity(r), -sp.identity(r)]).tocsr()
            A_ub = sp.hstack([p.A_ub, sp.csr_matrix((p.A_ub.shape[0], 2 * r))]).tocsr()
            c = np.concatenate([np.zeros(n), np.ones(2 * r)])
            q = LinearProgram(c, A_ub, p.b_ub, A_eq, p.b_eq,
                              np.vstack([p.bounds, np.tile([0.0, np.inf], (2 * r, 1))]))
            sol = solve_lp(q, backend=self.lp_backend)
            slack = sol.x[n:n + r] + sol.x[n + r:] if sol.optimal else np.ones(r)
        else:
            n_abs = 2 * idx.size * nu
            S = sp.vstack([sp.csr_matrix((n_abs, r)), -sp.identity(r)])
            A_ub = sp.hstack([p.A_ub, S]).tocsr()
            c = np.concatenate([np.zeros(n), np.ones(r)])
            q = LinearProgram(c, A_ub, p.b_ub, None, None,
                              np.vstack([p.bounds, np.tile([0.0, np.inf], (r, 1))]))
            sol = solve_lp(q, backend=self.lp_backend)
            slack = sol.x[n:] if sol.optimal else np.ones(r)
        bad = np.unique(owner[slack > ELASTIC_TOL])
        return [int(self.source_rows[m]) for m in bad]

    def build_milp(self, n_out, idx=None):
        """Calibration MILP in which up to ``n_out`` points may violate containment.

        Variables (alpha, beta_1..beta_k, rho_1..rho_k); rho_m = 0 exempts point m.
        """
        idx = np.arange(self.n_points) if idx is None else np.asarray(idx, dtype=int)
        k, nu = idx.size, self.n_generators
        if not 0 <= n_out < k:
            raise ValueError(f"n_out must satisfy 0 <= n_out < {k}")
        c = np.concatenate([self.c_alpha, np.zeros(k * nu), np.zeros(k)])
        bounds = np.vstack([np.tile([0.0, np.inf], (nu, 1)), np.tile([-np.inf, np.inf], (k * nu, 1)),
                            np.tile([0.0, 1.0], (k, 1))])
        blocks = self._containment_blocks(idx)
        M = sp.block_diag([b[0] for b in blocks], format="csr")
        # the rhs moves onto rho: M beta (op) rhs * rho
        R = sp.block_diag([b[1][:, None] for b in blocks], format="csr")
        abs_rows = self._abs_rows(k, nu, extra_cols=k)
        card = sp.hstack([sp.csr_matrix((1, nu + k * nu)), -np.ones((1, k))]).tocsr()
        if self.task == "regression":
            A_eq = sp.hstack([sp.csr_matrix((M.shape[0], nu)), M, -R]).tocsr()
            A_ub = sp.vstack([abs_rows, card]).tocsr()
            b_ub = np.concatenate([np.zeros(abs_rows.shape[0]), [-(k - n_out)]])
            lp = LinearProgram(c, A_ub, b_ub, A_eq, np.zeros(M.shape[0]), bounds)
        else:
            cont = sp.hstack([sp.csr_matrix((M.shape[0], nu)), M, -R]).tocsr()
            A_ub = sp.vstack([abs_rows, cont, card]).tocsr()
            b_ub = np.concatenate([np.zeros(abs_rows.shape[0] + M.shape[0]), [-(k - n_out)]])
            lp = LinearProgram(c, A_ub, b_ub, None, None, bounds)
        binary = np.arange(nu + k * nu, nu + k * nu + k)
        return MilpProgram(lp, binary)

    def solve_milp(self, n_out, idx=None, node_cap=10_000):
        idx = np.arange(self.n_points) if idx is None else np.asarray(idx, dtype=int)
        p = self.build_milp(n_out, idx)
        sol = solve_milp(p, node_cap=node_cap, backend=self.lp_backend)
        if sol.status == "infeasible":
            raise InfeasibleError("outlier MILP is infeasible even with n_out exemptions")
        if not sol.optimal:
            raise SolverError(f"outlier MILP returned {sol.status}")
        nu = self.n_generators
        rho = np.round(sol.x[p.binary])
        return np.maximum(sol.x[:nu], 0.0), float(sol.objective), idx[rho < 0.5], sol


def _fit(net, placement, X, Y, task, cost, lp_backend):
    prob = CalibrationProblem(net, placement, X, Y, task, cost or CostConfig(), lp_backend)
    sol = prob.solve()
    return ZcpModel(net, placement, sol.alpha, task, prob.cost, sol.objective)


def fit_regression(net, placement, X, Y, cost=None, lp_backend="auto") -> ZcpModel:
    return _fit(net, placement, X, Y, "regression", cost, lp_backend)


def fit_classification(net, placement, X, Y, cost=None, lp_backend="auto") -> ZcpModel:
    """``Y`` holds one-hot (or multi-hot) label rows."""
    return _fit(net, placement, X, Y, "classification", cost, lp_backend)
