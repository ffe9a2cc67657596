"""scikit-learn style wrappers around a pre-trained network.

The network is a constructor parameter and is never refit; ``fit`` only
calibrates the prediction sets on the data it is given.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .baselines import cp_fit_classification, cp_fit_regression, ipm_fit
from .calibrate import CostConfig
from .coverage import guaranteed_coverage, n_theta_for
from .evaluation import classes_of_zonotope
from .exceptions import DimensionError
from .mlp import Mlp
from .outliers import fit_zcp
from .placement import make_placement


def _check_net(net):
    if not isinstance(net, Mlp):
        raise TypeError(f"net must be an Mlp, got {type(net).__name__}")
    return net


def _one_hot(y, n_classes):
    y = np.asarray(y)
    if y.ndim == 2:
        if y.shape[1] != n_classes:
            raise DimensionError(f"label matrix has {y.shape[1]} columns, network has {n_classes}")
        return y.astype(float)
    labels = y.astype(int)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= n_classes:
        raise ValueError(f"class labels must lie in [0, {n_classes})")
    return np.eye(n_classes)[labels]


class _SetPredictor(BaseEstimator):
    _task = "regression"

    def _validate(self, X, y):
        net = _check_net(self.net)
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        if X.shape[1] != net.n_x:
            raise DimensionError(f"X has {X.shape[1]} features, network expects {net.n_x}")
        Y = y.reshape(len(y), -1) if self._task == "regression" else _one_hot(y, net.n_y)
        self.n_features_in_ = X.shape[1]
        return net, X, Y

    def _check_X(self, X):
        check_is_fitted(self)
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def predict(self, X):
        X = self._check_X(X)
        out = self.net.forward(X)
        if self._task == "classification":
            return np.argmax(out, axis=1)
        return out[:, 0] if out.shape[1] == 1 else out

    def predict_set(self, X):
        """One zonotope per row of X."""
        X = self._check_X(X)
        return self.model_.prediction_sets(X)

    def predict_classes(self, X):
        """Set of possible class indices per row of X."""
        if self._task != "classification":
            raise AttributeError("predict_classes is only available for classifiers")
        X = self._check_X(X)
        if hasattr(self.model_, "class_sets"):
            return self.model_.class_sets(X)
        return [classes_of_zonotope(z) for z in self.model_.prediction_sets(X)]

    def guaranteed_coverage(self, confidence=0.9):
        check_is_fitted(self)
        n_theta = n_theta_for(self._kind, self._task, self.net.n_y, self._n_alpha())
        return guaranteed_coverage(confidence, self.n_calibration_, n_theta, self.n_out)

    def _n_alpha(self):
        return None


class _ZonoBase(_SetPredictor):
    _kind = "zcp"
    _default_cost = "rotated_interval"

    def __init__(self, net=None, placement="orand", p_p=0.1, cost=None, n_rotations=10,
                 n_out=0, outlier_method="greedy", lp_backend="auto", random_state=0):
        self.net = net
        self.placement = placement
        self.p_p = p_p
        self.cost = cost
        self.n_rotations = n_rotations
        self.n_out = n_out
        self.outlier_method = outlier_method
        self.lp_backend = lp_backend
        self.random_state = random_state

    def fit(self, X, y):
        net, X, Y = self._validate(X, y)
        seed = 0 if self.random_state is None else int(self.random_state)
        placement = make_placement(self.placement, net, self.p_p, seed, X)
        cost = CostConfig(self.cost or self._default_cost, self.n_rotations, seed)
        self.placement_ = placement
        self.model_, self.outliers_ = self._fit_model(net, placement, X, Y, cost)
        self.alpha_ = self.model_.alpha if hasattr(self.model_, "alpha") else self.model_.zcp.alpha
        self.n_calibration_ = X.shape[0]
        return self

    def _fit_model(self, net, placement, X, Y, cost):
        return fit_zcp(net, placement, X, Y, self._task, cost, self.n_out, self.outlier_method,
                       self.lp_backend)

    def _n_alpha(self):
        return self.placement_.n_generators


class ZonoConformalRegressor(RegressorMixin, _ZonoBase):
    """Zonotopic prediction sets for a pre-trained regression network."""


class ZonoConformalClassifier(ClassifierMixin, _ZonoBase):
    """Zonotopic prediction sets over the logits of a pre-trained classifier."""

    _task = "classification"


class _IpmBase(_ZonoBase):
    _kind = "ipm"
    _default_cost = "interval"

    def _fit_model(self, net, placement, X, Y, cost):
        return ipm_fit(net, placement, X, Y, self._task, cost, self.n_out, self.outlier_method,
                       self.lp_backend)


class IntervalPredictorRegressor(RegressorMixin, _IpmBase):
    """Axis-aligned boxes: the box hull of a ZCP with identity generator template."""


class IntervalPredictorClassifier(ClassifierMixin, _IpmBase):
    _task = "classification"


class _CpBase(_SetPredictor):
    _kind = "cp"

    def __init__(self, net=None, n_out=0):
        self.net = net
        self.n_out = n_out

    def fit(self, X, y):
        net, X, Y = self._validate(X, y)
        fit = cp_fit_regression if self._task == "regression" else cp_fit_classification
        self.model_ = fit(net, X, Y, self.n_out)
        self.q_ = self.model_.q
        self.n_calibration_ = X.shape[0]
        return self


class SplitConformalRegressor(RegressorMixin, _CpBase):
    """Per-output intervals f(x) +/- q_j from absolute-error order statistics."""


class SplitConformalClassifier(ClassifierMixin, _CpBase):
    """Classes whose softmax score 1 - p_i stays below the calibrated threshold."""

    _task = "classification"
