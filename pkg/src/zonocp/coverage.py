"""Scenario-approach coverage guarantees.

For a predictor identified from ``n_m`` points with ``n_theta`` decision
variables and ``n_out`` discarded points,

    P{coverage >= 1 - eps} > 1 - zeta(eps),
    zeta(eps) = C(n_out + n_theta - 1, n_out) * sum_{i < n_out + n_theta} C(n_m, i) eps^i (1 - eps)^(n_m - i).
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.special import gammaln, logsumexp

EPS_TOL = 1e-13


class VacuousBoundWarning(UserWarning):
    """zeta exceeds 1, so the guarantee says nothing."""


def _check(n_m, n_theta, n_out):
    if n_m < 1 or n_theta < 1 or not 0 <= n_out < n_m:
        raise ValueError(f"need n_m >= 1, n_theta >= 1, 0 <= n_out < n_m (got {n_m}, {n_theta}, {n_out})")


def log_zeta(eps, n_m, n_theta, n_out=0):
    _check(n_m, n_theta, n_out)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    k = n_out + n_theta - 1
    log_lead = gammaln(k + 1) - gammaln(n_out + 1) - gammaln(n_theta)
    i = np.arange(min(k, n_m) + 1)
    terms = (gammaln(n_m + 1) - gammaln(i + 1) - gammaln(n_m - i + 1)
             + i * math.log(eps) + (n_m - i) * math.log1p(-eps))
    return float(log_lead + logsumexp(terms))


def zeta(eps, n_m, n_theta, n_out=0, warn=True):
    value = math.exp(log_zeta(eps, n_m, n_theta, n_out))
    if warn and value > 1.0:
        warnings.warn(f"zeta = {value:.4g} > 1: the coverage bound is vacuous", VacuousBoundWarning,
                      stacklevel=2)
    return value


def solve_epsilon(confidence, n_m, n_theta, n_out=0, tol=EPS_TOL):
    """Smallest eps whose guarantee holds with probability ``confidence`` (zeta = 1 - confidence).

    Returns eps; the guaranteed coverage is ``1 - eps``.
    """
    _check(n_m, n_theta, n_out)
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    target = math.log1p(-confidence)
    lo, hi = 1e-15, 1.0 - 1e-15
    f_lo = log_zeta(lo, n_m, n_theta, n_out) - target
    f_hi = log_zeta(hi, n_m, n_theta, n_out) - target
    if f_lo < 0:
        raise ValueError("zeta stays below the target for every eps: any coverage is guaranteed")
    if f_hi > 0:
        raise ValueError("zeta stays above the target for every eps in (0, 1): no guarantee "
                         "is possible; use more calibration points or fewer outliers")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if log_zeta(mid, n_m, n_theta, n_out) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def guaranteed_coverage(confidence, n_m, n_theta, n_out=0):
    return 1.0 - solve_epsilon(confidence, n_m, n_theta, n_out)


def n_theta_for(kind, task, n_y, n_u=None):
    """Decision-variable count entering zeta for each predictor kind."""
    if kind == "cp":
        return n_y if task == "regression" else 1
    if n_u is None:
        raise ValueError("ZCP/IPM guarantees need the number of identified uncertainties n_u")
    return n_u
