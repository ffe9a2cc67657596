"""Zonotopic conformal prediction sets for neural networks.

Prediction sets are zonotopes <f(x), D(x) G_u diag(alpha)> whose scaling
factors alpha are calibrated by linear programming so that every retained
calibration point is covered.
"""
from .baselines import CpModel, IpmModel, cp_fit_classification, cp_fit_regression, cp_quantile, ipm_fit
from .calibrate import CalibrationProblem, CostConfig, ZcpModel, fit_classification, fit_regression
from .coverage import guaranteed_coverage, solve_epsilon, zeta
from .estimators import (
    IntervalPredictorClassifier,
    IntervalPredictorRegressor,
    SplitConformalClassifier,
    SplitConformalRegressor,
    ZonoConformalClassifier,
    ZonoConformalRegressor,
)
from .exceptions import DataError, DimensionError, InfeasibleError, SolverError, ZonoError
from .mlp import Mlp, train
from .outliers import detect, fit_zcp
from .placement import Placement, make_placement
from .zonotope import Zonotope, box_hull, contains_point, volume

__version__ = "0.1.0"

__all__ = [
    "CalibrationProblem", "CostConfig", "CpModel", "DataError", "DimensionError", "InfeasibleError",
    "IntervalPredictorClassifier", "IntervalPredictorRegressor", "IpmModel", "Mlp", "Placement",
    "SolverError", "SplitConformalClassifier", "SplitConformalRegressor", "ZcpModel", "ZonoError",
    "ZonoConformalClassifier", "ZonoConformalRegressor", "Zonotope", "box_hull", "contains_point",
    "cp_fit_classification", "cp_fit_regression", "cp_quantile", "detect", "fit_classification",
    "fit_regression", "fit_zcp", "guaranteed_coverage", "ipm_fit", "make_placement", "solve_epsilon",
    "train", "volume", "zeta",
]
