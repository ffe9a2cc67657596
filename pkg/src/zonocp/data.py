"""Synthetic benchmark generators, CSV ingestion, min-max normalisation and splits."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import DataError

SDR1_V1 = np.array([-0.209, 1.129])
SDR2_V2 = np.array([0.747, -0.247])


@dataclass
class Dataset:
    inputs: np.ndarray
    outputs: np.ndarray
    task: str = "regression"
    normalization: dict = None  # {"min": [...], "max": [...]} over all columns
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.outputs = np.asarray(self.outputs, dtype=float)
        if self.outputs.ndim == 1:
            self.outputs = self.outputs[:, None]
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise DataError("inputs and outputs have different row counts")
        if self.task not in ("regression", "classification"):
            raise DataError(f"unknown task {self.task!r}")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def n_x(self):
        return self.inputs.shape[1]

    @property
    def n_y(self):
        return self.outputs.shape[1]

    @property
    def labels(self):
        return np.argmax(self.outputs, axis=1)

    def subset(self, idx):
        return replace(self, inputs=self.inputs[idx], outputs=self.outputs[idx])


def _sample_zonotope_noise(rng, n, center, G):
    lam = rng.uniform(-1.0, 1.0, size=(n, G.shape[1]))
    return center + lam @ G.T


def sdr1_noise_generators():
    return np.column_stack([0.2 * np.ones(2), 0.02 * SDR1_V1])


def sdr2_noise_generators():
    return np.column_stack([0.5 * np.ones(2), 0.05 * SDR2_V2])


def sdr1(x, u):
    x1, x2 = x[..., 0], x[..., 1]
    return np.stack([5 * np.sin(x1) + x2**2 + x1 * u[..., 0],
                     1.0 / (x1**2 + 1) + np.cos(x2) + x2 * u[..., 1]], axis=-1)


def sdr2(x, u):
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    y1 = 3 * x1**3 + np.exp(np.cos(10 * x2) * np.cos(5 * x1) ** 2) + np.exp(np.sin(7.5 * x3)) + u[..., 0]
    y2 = 2 * x1**2 + np.exp(np.cos(10 * x1) * np.cos(5 * x2) ** 2) + np.exp(np.sin(7.5 * x3**2)) + 1.5 * u[..., 1]
    return np.stack([y1, y2], axis=-1)


def gen_sdr1(n, seed=0):
    """x ~ U[-5, 5]^2, u drawn from <0, [0.2*1, 0.02*v1]> by uniform generator factors."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-5.0, 5.0, size=(n, 2))
    u = _sample_zonotope_noise(rng, n, np.zeros(2), sdr1_noise_generators())
    return Dataset(x, sdr1(x, u), "regression", meta={"name": "sd-r1", "seed": seed})


def gen_sdr2(n, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(n, 3))
    u = _sample_zonotope_noise(rng, n, 0.5 * np.ones(2), sdr2_noise_generators())
    return Dataset(x, sdr2(x, u), "regression", meta={"name": "sd-r2", "seed": seed})


def sdc1_curves(x1, u1):
    return [3 * np.sin(x1) + u1, x1**2 + u1, 2 * x1 - 10 + u1]


def sdc2_curves(x1, x2, u1):
    return [x2 * np.sin(x1) + u1,
            x1**2 + x2 + 2 * u1,
            2 * x1 - 10 + x1 * x2 + 0.5 * u1**2,
            2 * x1 - 16 + x2 * u1]


def _one_hot(labels, k):
    return np.eye(k)[labels]


def gen_sdc1(n_per_class, seed=0):
    rng = np.random.default_rng(seed)
    xs, labels = [], []
    for k in range(3):
        x1 = rng.uniform(-5.0, 5.0, n_per_class)
        u1 = rng.uniform(-2.0, 2.0, n_per_class)
        xs.append(np.column_stack([x1, sdc1_curves(x1, u1)[k]]))
        labels.append(np.full(n_per_class, k))
    return Dataset(np.vstack(xs), _one_hot(np.concatenate(labels), 3), "classification",
                   meta={"name": "sd-c1", "seed": seed})


def gen_sdc2(n_per_class, seed=0):
    rng = np.random.default_rng(seed)
    xs, labels = [], []
    for k in range(4):
        x1 = rng.uniform(-5.0, 5.0, n_per_class)
        x2 = rng.uniform(-5.0, 5.0, n_per_class)
        u1 = rng.uniform(-1.0, 1.0, n_per_class)
        xs.append(np.column_stack([x1, x2, sdc2_curves(x1, x2, u1)[k]]))
        labels.append(np.full(n_per_class, k))
    return Dataset(np.vstack(xs), _one_hot(np.concatenate(labels), 4), "classification",
                   meta={"name": "sd-c2", "seed": seed})


GENERATORS = {"sd-r1": gen_sdr1, "sd-r2": gen_sdr2, "sd-c1": gen_sdc1, "sd-c2": gen_sdc2}
N_CLASSES = {"sd-c1": 3, "sd-c2": 4}


def normalize(d: Dataset) -> Dataset:
    """Min-max scale every input and (regression) output column to [0, 1]."""
    cols = np.hstack([d.inputs, d.outputs]) if d.task == "regression" else d.inputs
    lo, hi = cols.min(axis=0), cols.max(axis=0)
    flat = np.flatnonzero(hi - lo == 0)
    if flat.size:
        raise DataError(f"column {int(flat[0])} is constant; cannot min-max normalise")
    scaled = (cols - lo) / (hi - lo)
    out = scaled[:, d.n_x:] if d.task == "regression" else d.outputs
    return replace(d, inputs=scaled[:, :d.n_x], outputs=out,
                   normalization={"min": lo.tolist(), "max": hi.tolist()})


def denormalize(d: Dataset) -> Dataset:
    if d.normalization is None:
        return d
    lo, hi = np.asarray(d.normalization["min"]), np.asarray(d.normalization["max"])
    cols = np.hstack([d.inputs, d.outputs]) if d.task == "regression" else d.inputs
    raw = cols * (hi - lo) + lo
    out = raw[:, d.n_x:] if d.task == "regression" else d.outputs
    return replace(d, inputs=raw[:, :d.n_x], outputs=out, normalization=None)


def split(d: Dataset, fractions=(0.75, 0.10, 0.15), seed=0):
    """Seeded shuffle then contiguous (train, cal, test); rounding remainder goes to train."""
    fractions = np.asarray(fractions, dtype=float)
    if fractions.size != 3 or np.any(fractions < 0) or abs(fractions.sum() - 1.0) > 1e-9:
        raise DataError(f"split fractions must be three nonnegative numbers summing to 1, got {fractions}")
    n = len(d)
    perm = np.random.default_rng(seed).permutation(n)
    n_cal = int(np.floor(fractions[1] * n + 1e-9))
    n_test = int(np.floor(fractions[2] * n + 1e-9))
    n_train = n - n_cal - n_test
    return (d.subset(perm[:n_train]), d.subset(perm[n_train:n_train + n_cal]),
            d.subset(perm[n_train + n_cal:]))


def expand_multilabel(X, Y):
    """One row (x, e_i) per positive class i of every multi-hot row of ``Y``."""
    X, Y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
    rows, cols = np.nonzero(Y > 0.5)
    if np.unique(rows).size != X.shape[0]:
        raise DataError("every classification row needs at least one positive class")
    return X[rows], np.eye(Y.shape[1])[cols], rows


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def save_csv(d: Dataset, path, seed=None):
    path = Path(path)
    header = [f"x{j + 1}" for j in range(d.n_x)] + [f"y{j + 1}" for j in range(d.n_y)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in np.hstack([d.inputs, d.outputs]):
            w.writerow([repr(float(v)) for v in row])
    meta = {"task": d.task, "n_y": d.n_y, "normalization": d.normalization,
            "seed": seed if seed is not None else d.meta.get("seed"), "name": d.meta.get("name")}
    with open(sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def load_csv(path, task=None, n_y=None) -> Dataset:
    """Read a headed CSV whose last ``n_y`` columns are outputs.

    ``task``/``n_y`` default to the JSON sidecar written by :func:`save_csv`.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file {path} does not exist")
    meta = {}
    if sidecar_path(path).exists():
        with open(sidecar_path(path)) as fh:
            meta = json.load(fh)
    task = task or meta.get("task", "regression")
    n_y = n_y or meta.get("n_y")
    if n_y is None:
        raise DataError("number of output columns unknown: pass n_y or provide a sidecar")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DataError(f"{path}: expected a header and at least one data row")
    width = len(rows[0])
    try:
        arr = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric entry ({exc})") from None
    if arr.shape[1] != width or width <= n_y:
        raise DataError(f"{path}: rows must have {width} columns with more than n_y={n_y}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: non-finite values")
    return Dataset(arr[:, :-n_y], arr[:, -n_y:], task, normalization=meta.get("normalization"),
                   meta={k: meta.get(k) for k in ("name", "seed")})
