"""Coverage and conservatism metrics, class extraction, bootstrap intervals, report files."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .calibrate import class_matrix
from .exceptions import DataError, SolverError
from .lp import LinearProgram, solve_lp
from .zonotope import CONTAINMENT_TOL, Zonotope, contains_point, projected_volume, vertices_2d, volume

CLASS_TOL = 1e-9


def classes_of_vector(y):
    y = np.asarray(y, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("empty score vector")
    return set(np.flatnonzero(y == y.max()).tolist())


def _class_margin(z: Zonotope, i):
    """max over the set of min_j (z_i - z_j), by LP over (beta, t)."""
    n, nu = z.dim, z.n_generators
    T = np.delete(class_matrix(i, n), i, axis=0)
    TG, Tc = T @ z.generators, T @ z.center
    # -T G beta + t <= T c, |beta| <= 1, t <= 0
    A_ub = np.hstack([-TG, np.ones((n - 1, 1))])
    c = np.zeros(nu + 1)
    c[-1] = -1.0
    bounds = np.vstack([np.tile([-1.0, 1.0], (nu, 1)), [[-np.inf, 0.0]]])
    sol = solve_lp(LinearProgram(c, A_ub, Tc, bounds=bounds))
    if not sol.optimal:
        raise SolverError(f"class LP returned {sol.status}")
    return sol.x[-1]


def classes_of_zonotope(z: Zonotope, tol=CLASS_TOL):
    """Classes i for which some point of ``z`` has z_i as its largest entry."""
    if z.dim < 1:
        raise ValueError("zonotope must have dimension >= 1")
    if z.dim == 1:
        return {0}
    c = z.center
    radius = np.abs(z.generators).sum(axis=1)
    out = set()
    top = c.max()
    for i in range(z.dim):
        if c[i] >= top - tol:
            out.add(i)
            continue
        # cheap reject: some class beats i everywhere by the support bound
        diff = z.generators[i] - z.generators
        upper = c[i] - c + np.abs(diff).sum(axis=1)
        if np.any(upper < -tol):
            continue
        if radius.sum() == 0:
            continue
        if _class_margin(z, i) >= -tol:
            out.add(i)
    return out


def _class_sets(model, X):
    if hasattr(model, "class_sets"):
        return model.class_sets(X)
    return [classes_of_zonotope(z) for z in model.prediction_sets(X)]


def coverage_regression(model, X, Y, tol=CONTAINMENT_TOL):
    _require_task(model, "regression")
    hits = [contains_point(z, y, tol) for z, y in zip(model.prediction_sets(X), np.atleast_2d(Y))]
    return float(np.mean(hits)), np.asarray(hits)


def coverage_classification(model, X, Y):
    _require_task(model, "classification")
    labels = np.argmax(np.atleast_2d(Y), axis=1)
    sets = _class_sets(model, X)
    hits = [int(lab) in s for lab, s in zip(labels, sets)]
    return float(np.mean(hits)), np.asarray(hits)


def volume_blocks(n_y, block=3):
    return [list(range(s, min(s + block, n_y))) for s in range(0, n_y, block)]


def set_volume(z: Zonotope, max_exact_dim=5):
    """Exact volume up to ``max_exact_dim`` outputs, else summed volumes of 3-D blocks."""
    if z.dim <= max_exact_dim:
        return volume(z)
    return sum(projected_volume(z, dims) for dims in volume_blocks(z.dim))


def conservatism_regression(model, X):
    _require_task(model, "regression")
    vols = np.array([set_volume(z) for z in model.prediction_sets(X)])
    return float(vols.mean()), vols


def conservatism_classification(model, X):
    _require_task(model, "classification")
    counts = np.array([len(s) for s in _class_sets(model, X)], dtype=float)
    return float(counts.mean()), counts


def _require_task(model, task):
    if getattr(model, "task", task) != task:
        raise DataError(f"model was fit for {model.task}, not {task}")


def normalized_metrics(values, baseline):
    """Mean of per-point ratios values / baseline (not the ratio of means)."""
    values, baseline = np.asarray(values, dtype=float), np.asarray(baseline, dtype=float)
    if values.shape != baseline.shape:
        raise DataError("normalised metrics need matched point sets")
    if np.any(baseline == 0):
        raise DataError("baseline volume is zero at some point; ratio undefined")
    return float(np.mean(values / baseline))


def bootstrap_ci(samples, level=0.95, reps=2000, seed=0, stat=np.mean):
    """Percentile bootstrap interval for ``stat`` of ``samples``."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("bootstrap needs at least one sample")
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, x.size, size=(reps, x.size))
    stats = stat(x[draws], axis=1)
    a = (1.0 - level) / 2.0
    return float(np.quantile(stats, a)), float(np.quantile(stats, 1.0 - a))


@dataclass
class EvalReport:
    predictor: str
    task: str
    n_out: int
    coverage: float
    conservatism: float
    coverage_lo: float = math.nan
    coverage_hi: float = math.nan
    conservatism_lo: float = math.nan
    conservatism_hi: float = math.nan
    n_test: int = 0
    runtime_s: float = 0.0


def evaluate(model, X, Y, predictor="zcp", n_out=0, bootstrap=True, seed=0):
    t0 = time.perf_counter()
    if model.task == "regression":
        cov, hits = coverage_regression(model, X, Y)
        cons, per_point = conservatism_regression(model, X)
    else:
        cov, hits = coverage_classification(model, X, Y)
        cons, per_point = conservatism_classification(model, X)
    rep = EvalReport(predictor, model.task, n_out, cov, cons, n_test=len(hits))
    if bootstrap:
        rep.coverage_lo, rep.coverage_hi = bootstrap_ci(hits, seed=seed)
        rep.conservatism_lo, rep.conservatism_hi = bootstrap_ci(per_point, seed=seed)
    rep.runtime_s = time.perf_counter() - t0
    return rep, per_point


def write_reports_csv(reports, path):
    rows = [asdict(r) for r in reports]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else [f for f in EvalReport.__dataclass_fields__],
                           lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def write_svg(zonotopes, points, path, size=480, margin=20):
    """Draw 2-D prediction sets as polygons with their true outputs as crosses."""
    polys = [vertices_2d(z) for z in zonotopes]
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    allp = np.vstack(polys + [pts])
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    scale = (size - 2 * margin) / span.max()

    def tr(p):
        q = (np.asarray(p) - lo) * scale + margin
        return q[..., 0], size - q[..., 1]

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">']
    for poly in polys:
        xs, ys = tr(poly)
        coords = " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))
        out.append(f'<polygon class="set" points="{coords}" fill="#2a9d8f" fill-opacity="0.2" '
                   'stroke="#2a9d8f" stroke-width="1"/>')
    for p in pts:
        x, y = tr(p)
        out.append(f'<path class="point" d="M{x - 3:.3f},{y - 3:.3f}L{x + 3:.3f},{y + 3:.3f}'
                   f'M{x - 3:.3f},{y + 3:.3f}L{x + 3:.3f},{y - 3:.3f}" stroke="#555" stroke-width="1"/>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
    return len(polys)
