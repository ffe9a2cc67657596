"""Command line interface: ``zonocp {gen,train,fit,eval,bound,sweep}``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 solver error.
The sweep worker count is read from ``ZONOCP_WORKERS`` (default 1).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import data as data_mod
from .baselines import CpModel, IpmModel, cp_fit_classification, cp_fit_regression, model_from_dict
from .calibrate import COST_KINDS, CalibrationProblem, CostConfig, ZcpModel
from .coverage import VacuousBoundWarning, solve_epsilon, zeta
from .evaluation import classes_of_zonotope, evaluate, write_reports_csv, write_svg
from .exceptions import DataError, SolverError
from .mlp import Mlp, train
from .outliers import METHODS, detect_greedy, fit_zcp
from .placement import STRATEGIES, make_placement
from .zonotope import contains_point

log = logging.getLogger("zonocp")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4
WORKERS_ENV = "ZONOCP_WORKERS"


class UsageError(Exception):
    pass


def _load_data(path):
    return data_mod.load_csv(path)


def _load_net(path):
    if not Path(path).exists():
        raise DataError(f"model file {path} does not exist")
    return Mlp.load(path)


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)


def _parse_arch(text):
    try:
        sizes = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise UsageError(f"--arch must be comma-separated integers, got {text!r}") from None
    if any(s <= 0 for s in sizes):
        raise UsageError("hidden layer sizes must be positive")
    return sizes


def _workers():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(n, 1)


# -- gen ---------------------------------------------------------------------

def cmd_gen(args):
    if args.name not in data_mod.GENERATORS:
        raise UsageError(f"unknown dataset {args.name!r}; choose from {sorted(data_mod.GENERATORS)}")
    d = data_mod.GENERATORS[args.name](args.n, seed=args.seed)
    if not args.raw:
        d = data_mod.normalize(d)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.split:
        parts = data_mod.split(d, seed=args.seed)
        stem = out.with_suffix("")
        for tag, part in zip(("train", "cal", "test"), parts):
            data_mod.save_csv(part, f"{stem}_{tag}.csv", seed=args.seed)
        print(f"wrote {stem}_{{train,cal,test}}.csv ({', '.join(str(len(p)) for p in parts)} rows)")
    else:
        data_mod.save_csv(d, out, seed=args.seed)
        print(f"wrote {out} ({len(d)} rows)")


# -- train -------------------------------------------------------------------

def cmd_train(args):
    d = _load_data(args.data)
    net = train(d.inputs, d.outputs, _parse_arch(args.arch), d.task, epochs=args.epochs, lr=args.lr,
                seed=args.seed)
    net.save(args.out)
    pred = net.forward(d.inputs)
    if d.task == "regression":
        rmse = np.sqrt(np.mean((pred - d.outputs) ** 2, axis=0))
        print(f"wrote {args.out}; training RMSE per output: {np.round(rmse, 4).tolist()}")
    else:
        acc = np.mean(np.argmax(pred, axis=1) == d.labels)
        print(f"wrote {args.out}; training accuracy: {acc:.4f}")


# -- fit ---------------------------------------------------------------------

def fit_predictor(kind, net, cal, placement="orand", p_p=0.1, seed=0, cost=None, n_rotations=10,
                  n_out=0, method="greedy", lp_backend="auto"):
    """Returns (model, outlier result or None)."""
    if kind == "cp":
        fit = cp_fit_regression if cal.task == "regression" else cp_fit_classification
        return fit(net, cal.inputs, cal.outputs, n_out), None
    if kind == "ipm":
        placement = "orand" if placement == "orand_star" else placement
        cost = cost or "interval"
    cost_cfg = CostConfig(cost or "rotated_interval", n_rotations, seed)
    pl = make_placement(placement, net, p_p, seed, cal.inputs)
    zcp, res = fit_zcp(net, pl, cal.inputs, cal.outputs, cal.task, cost_cfg, n_out, method, lp_backend)
    return (IpmModel(zcp) if kind == "ipm" else zcp), res


def audit(model, cal):
    """Calibration points (by row) that the fitted model should cover but does not."""
    if isinstance(model, CpModel):
        if cal.task == "regression":
            # each output interval is calibrated on its own, so the n_out budget is per dimension
            out = np.abs(model.net.forward(cal.inputs) - cal.outputs) > model.q + 1e-12
            over = out.sum(axis=0) > model.n_out
            return sorted(set(np.flatnonzero(out[:, over].any(axis=1)).tolist()))
        hits = [lab in s for lab, s in zip(cal.labels, model.class_sets(cal.inputs))]
        misses = [i for i, h in enumerate(hits) if not h]
        return misses if len(misses) > model.n_out else []
    zcp = model.zcp if isinstance(model, IpmModel) else model
    X, Y = cal.inputs, cal.outputs
    if cal.task == "classification":
        X, Y, _ = data_mod.expand_multilabel(X, Y)
    removed = set(int(i) for i in zcp.removed)
    bad = []
    for m, (z, y) in enumerate(zip(zcp.prediction_sets(X), Y)):
        if m in removed:
            continue
        ok = contains_point(z, y) if cal.task == "regression" else int(np.argmax(y)) in classes_of_zonotope(z)
        if not ok:
            bad.append(m)
    return bad


def cmd_fit(args):
    net = _load_net(args.model)
    cal = _load_data(args.data)
    if cal.task == "regression" and args.cost in ("score", "score_difference"):
        raise UsageError(f"cost {args.cost!r} is only defined for classification")
    if cal.n_y != net.n_y or cal.n_x != net.n_x:
        raise DataError(f"data shape ({cal.n_x} -> {cal.n_y}) does not match the network ({net.n_x} -> {net.n_y})")
    t0 = time.perf_counter()
    model, res = fit_predictor(args.predictor, net, cal, args.placement, args.p_p, args.seed, args.cost,
                               args.n_rotations, args.n_out, args.method, args.lp_backend)
    elapsed = time.perf_counter() - t0
    doc = model.to_dict()
    if res is not None:
        doc["outliers"] = res.to_dict()
    doc["n_calibration"] = len(cal)
    _write_json(doc, args.out)
    print(f"wrote {args.out} ({args.predictor}, n_out={args.n_out}, {elapsed:.2f} s)")
    if args.audit:
        bad = audit(model, cal)
        if bad:
            raise SolverError(f"containment audit failed for calibration points {bad[:10]}")
        print("audit: all retained calibration points are covered")


# -- eval --------------------------------------------------------------------

def _load_predictor(path):
    if not Path(path).exists():
        raise DataError(f"predictor file {path} does not exist")
    with open(path) as fh:
        doc = json.load(fh)
    return model_from_dict(doc), doc


def cmd_eval(args):
    model, doc = _load_predictor(args.predictor)
    test = _load_data(args.data)
    if test.task != model.task:
        raise DataError(f"predictor is for {model.task}, data is {test.task}")
    n_out = doc.get("n_out", len(doc.get("removed", [])))
    rep, _ = evaluate(model, test.inputs, test.outputs, predictor=doc["kind"], n_out=n_out, seed=args.seed)
    write_reports_csv([rep], args.out)
    print(f"coverage {rep.coverage:.4f} [{rep.coverage_lo:.4f}, {rep.coverage_hi:.4f}]  "
          f"conservatism {rep.conservatism:.6g} [{rep.conservatism_lo:.6g}, {rep.conservatism_hi:.6g}]")
    if args.svg:
        if model.task != "regression" or test.n_y != 2:
            raise UsageError("SVG overlays need a regression model with two outputs")
        k = min(args.svg_count, len(test))
        idx = np.random.default_rng(args.seed).choice(len(test), size=k, replace=False)
        n = write_svg(model.prediction_sets(test.inputs[idx]), test.outputs[idx], args.svg)
        print(f"wrote {args.svg} ({n} polygons)")


# -- bound -------------------------------------------------------------------

def cmd_bound(args):
    t0 = time.perf_counter()
    eps = solve_epsilon(args.confidence, args.n_m, args.n_theta, args.n_out)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", VacuousBoundWarning)
        z = zeta(eps, args.n_m, args.n_theta, args.n_out)
    print("n_m\tn_theta\tn_out\tconfidence\tguaranteed_coverage\tzeta")
    print(f"{args.n_m}\t{args.n_theta}\t{args.n_out}\t{args.confidence}\t{1.0 - eps:.4f}\t{z:.6g}")
    log.info("bound solved in %.4f s", time.perf_counter() - t0)


# -- sweep -------------------------------------------------------------------

def _sweep_point(job):
    kind, model_doc, test_doc, n_out, seed = job
    model = model_from_dict(model_doc)
    test = data_mod.Dataset(**test_doc)
    rep, per_point = evaluate(model, test.inputs, test.outputs, predictor=kind, n_out=n_out, seed=seed)
    return rep, per_point.tolist()


def sweep_models(net, cal, n_out_max, predictors=("zcp", "ipm", "cp"), placement="orand", p_p=0.1,
                 seed=0, cost=None, n_rotations=10, lp_backend="auto"):
    """Fitted models for n_out = 0..n_out_max.

    ZCP and IPM follow the greedy removal path: the set removed at n_out = k
    is the first k entries of the n_out_max path, each refit exactly.
    """
    out = {}
    for kind in predictors:
        if kind == "cp":
            fit = cp_fit_regression if cal.task == "regression" else cp_fit_classification
            out[kind] = [fit(net, cal.inputs, cal.outputs, k) for k in range(n_out_max + 1)]
            continue
        pl_name = "orand" if kind == "ipm" and placement == "orand_star" else placement
        kcost = cost or ("interval" if kind == "ipm" else "rotated_interval")
        cost_cfg = CostConfig(kcost, n_rotations, seed)
        pl = make_placement(pl_name, net, p_p, seed, cal.inputs)
        prob = CalibrationProblem(net, pl, cal.inputs, cal.outputs, cal.task, cost_cfg, lp_backend)
        path = [i for i, _ in detect_greedy(prob, n_out_max).path]
        models = []
        for k in range(n_out_max + 1):
            # a path shorter than k means no boundary points were left to remove
            removed = sorted(path[:k])
            sol = prob.solve(np.setdiff1d(np.arange(prob.n_points), removed))
            zcp = ZcpModel(net, pl, sol.alpha, cal.task, cost_cfg, sol.objective, removed)
            models.append(IpmModel(zcp) if kind == "ipm" else zcp)
        out[kind] = models
    return out


def cmd_sweep(args):
    net = _load_net(args.model)
    cal, test = _load_data(args.cal), _load_data(args.test)
    predictors = [p.strip() for p in args.predictors.split(",") if p.strip()]
    bad = [p for p in predictors if p not in ("zcp", "ipm", "cp")]
    if bad or not predictors:
        raise UsageError(f"unknown predictors {bad}; choose from zcp, ipm, cp")
    if args.n_out_max < 0:
        raise UsageError("--n-out-max must be nonnegative")
    models = sweep_models(net, cal, args.n_out_max, predictors, args.placement, args.p_p, args.seed,
                          args.cost, args.n_rotations, args.lp_backend)
    test_doc = {"inputs": test.inputs, "outputs": test.outputs, "task": test.task}
    jobs = [(kind, m.to_dict(), test_doc, k, args.seed) for kind in predictors for k, m in enumerate(models[kind])]
    n_workers = _workers()
    if n_workers > 1:
        with ProcessPoolExecutor(n_workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    reports = [r for r, _ in results]
    write_reports_csv(reports, args.out)
    for r in reports:
        print(f"{r.predictor}\tn_out={r.n_out}\tcoverage={r.coverage:.4f}\tconservatism={r.conservatism:.6g}")
    print(f"wrote {args.out}")


# -- parser ------------------------------------------------------------------

def _add_fit_options(p):
    p.add_argument("--placement", choices=STRATEGIES, default="orand")
    p.add_argument("--p-p", type=float, default=0.1, help="fraction of hidden biases made uncertain")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cost", choices=COST_KINDS, default=None,
                   help="calibration cost (default: rotated_interval for zcp, interval for ipm)")
    p.add_argument("--n-rotations", type=int, default=10)
    p.add_argument("--lp-backend", choices=("auto", "simplex", "highs"), default="auto")


def build_parser():
    ap = argparse.ArgumentParser(prog="zonocp", description="Zonotopic conformal prediction sets for neural networks")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("name")
    p.add_argument("--n", type=int, default=2000,
                   help="number of points (regression) or points per class (classification)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--raw", action="store_true", help="skip min-max normalisation")
    p.add_argument("--split", action="store_true", help="write train/cal/test files")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a tanh network")
    p.add_argument("data")
    p.add_argument("--arch", default="64,64")
    p.add_argument("--epochs", type=int, default=3000)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fit", help="calibrate a predictor")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--predictor", choices=("zcp", "ipm", "cp"), default="zcp")
    p.add_argument("--n-out", type=int, default=0)
    p.add_argument("--method", choices=sorted(METHODS), default="greedy")
    p.add_argument("--audit", action="store_true", help="re-check containment of retained calibration points")
    p.add_argument("--out", required=True)
    _add_fit_options(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="coverage and conservatism on a test file")
    p.add_argument("predictor")
    p.add_argument("data")
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.add_argument("--svg-count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bound", help="guaranteed coverage for a calibration budget")
    p.add_argument("--n-m", type=int, required=True)
    p.add_argument("--n-theta", type=int, required=True)
    p.add_argument("--n-out", type=int, default=0)
    p.add_argument("--confidence", type=float, default=0.9)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("sweep", help="coverage/conservatism trade-off over n_out")
    p.add_argument("model")
    p.add_argument("cal")
    p.add_argument("test")
    p.add_argument("--n-out-max", type=int, default=5)
    p.add_argument("--predictors", default="zcp,ipm,cp")
    p.add_argument("--out", required=True)
    _add_fit_options(p)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"zonocp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"zonocp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"zonocp: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"zonocp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
