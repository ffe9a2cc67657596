"""Comparison predictors: split conformal prediction and the interval predictor model."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .calibrate import CostConfig, ZcpModel
from .exceptions import DataError, DimensionError
from .mlp import Mlp, softmax
from .outliers import fit_zcp
from .placement import Placement
from .zonotope import Zonotope, box_hull


def order_statistic(scores, n_out):
    """The (n - n_out)-th smallest score: the n_out largest are allowed to violate."""
    s = np.sort(np.asarray(scores, dtype=float), axis=0, kind="stable")
    n = s.shape[0]
    if n == 0:
        raise DataError("no calibration scores")
    if not 0 <= n_out < n:
        raise DataError(f"n_out must lie in [0, {n}), got {n_out}")
    return s[n - 1 - n_out]


def cp_quantile(scores, epsilon):
    """Split-conformal threshold: the k-th smallest score, k = ceil((n + 1)(1 - epsilon))."""
    s = np.sort(np.asarray(scores, dtype=float).ravel())
    n = s.size
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    # round away float noise such as 100 * 0.9 = 90.00000000000001 before the ceiling
    k = math.ceil(round((n + 1) * (1.0 - epsilon), 9))
    if k > n:
        raise DataError(f"quantile index {k} exceeds the {n} calibration scores; "
                        "use more calibration points or a larger epsilon")
    return float(s[max(k, 1) - 1])


@dataclass
class CpModel:
    net: Mlp
    task: str
    q: np.ndarray  # (n_y,) for regression, shape () for classification
    n_out: int = 0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if self.task == "regression":
            self.q = self.q.reshape(-1)
            if self.q.size != self.net.n_y or np.any(self.q < 0):
                raise ValueError("regression quantiles must be nonnegative, one per output")
        elif self.task == "classification":
            self.q = self.q.reshape(())
            if not 0.0 <= float(self.q) <= 1.0:
                raise ValueError("classification threshold must lie in [0, 1]")
        else:
            raise ValueError(f"unknown task {self.task!r}")

    def prediction_sets(self, X):
        if self.task != "regression":
            raise DataError("CP classification predicts class sets; use class_sets")
        F = self.net.forward(np.atleast_2d(np.asarray(X, dtype=float)))
        G = np.diag(self.q)
        return [Zonotope(f, G) for f in F]

    def class_sets(self, X):
        if self.task != "classification":
            raise DataError("class sets need a classification model")
        P = softmax(self.net.forward(np.atleast_2d(np.asarray(X, dtype=float))), axis=1)
        q = float(self.q)
        return [set(np.flatnonzero(1.0 - p <= q).tolist()) for p in P]

    def to_dict(self):
        return {"kind": "cp", "task": self.task, "net": self.net.to_dict(),
                "q": self.q.tolist(), "n_out": self.n_out}

    @classmethod
    def from_dict(cls, d):
        return cls(Mlp.from_dict(d["net"]), d["task"], d["q"], d.get("n_out", 0))


def _xy(X, Y, n_y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] != Y.shape[0]:
        raise DimensionError("X and Y have different numbers of rows")
    if Y.shape[1] != n_y:
        raise DimensionError(f"outputs have {Y.shape[1]} columns, network has {n_y}")
    return X, Y


def regression_scores(net, X, Y):
    X, Y = _xy(X, Y, net.n_y)
    return np.abs(net.forward(X) - Y)


def classification_scores(net, X, Y):
    """1 - softmax probability of the labelled class; multi-hot rows give one score per label."""
    X, Y = _xy(X, Y, net.n_y)
    P = softmax(net.forward(X), axis=1)
    rows, labels = np.nonzero(Y > 0.5)
    if np.unique(rows).size != X.shape[0]:
        raise DataError("every classification row needs at least one label")
    return 1.0 - P[rows, labels]


def cp_fit_regression(net, X, Y, n_out=0) -> CpModel:
    return CpModel(net, "regression", order_statistic(regression_scores(net, X, Y), n_out), n_out)


def cp_fit_classification(net, X, Y, n_out=0) -> CpModel:
    q = min(float(order_statistic(classification_scores(net, X, Y), n_out)), 1.0)
    return CpModel(net, "classification", q, n_out)


@dataclass
class IpmModel:
    """A ZCP with identity template whose prediction sets are replaced by their box hulls."""

    zcp: ZcpModel

    def __post_init__(self):
        if not self.zcp.placement.identity_template:
            raise ValueError("interval predictor models need an identity generator template")

    @property
    def task(self):
        return self.zcp.task

    @property
    def net(self):
        return self.zcp.net

    def prediction_set(self, x):
        return box_hull(self.zcp.prediction_set(x))

    def prediction_sets(self, X):
        return [box_hull(z) for z in self.zcp.prediction_sets(X)]

    def to_dict(self):
        d = self.zcp.to_dict()
        d["kind"] = "ipm"
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(ZcpModel.from_dict(d))


def ipm_fit(net, placement: Placement, X, Y, task="regression", cost=None, n_out=0,
            method="greedy", lp_backend="auto"):
    """Returns (IpmModel, OutlierResult)."""
    if not placement.identity_template:
        raise ValueError("interval predictor models need an identity generator template")
    zcp, res = fit_zcp(net, placement, X, Y, task, cost or CostConfig("interval"), n_out, method,
                       lp_backend)
    return IpmModel(zcp), res


def model_from_dict(d):
    kind = d.get("kind")
    if kind == "zcp":
        return ZcpModel.from_dict(d)
    if kind == "ipm":
        return IpmModel.from_dict(d)
    if kind == "cp":
        return CpModel.from_dict(d)
    raise DataError(f"unknown model kind {kind!r}")
