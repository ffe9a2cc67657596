"""Feed-forward tanh networks: the deterministic base predictor f(x).

Hidden layers apply tanh, the last layer is affine. Uncertainties are additive
perturbations of hidden-layer biases (pre-activations) or of the outputs.
"""
from __future__ import annotations

import json
import logging
from typing import NamedTuple

import numpy as np

from .exceptions import DimensionError, TrainingError

log = logging.getLogger(__name__)


class UncertaintyIndex(NamedTuple):
    kind: str  # "bias" (hidden layer bias) or "output"
    layer: int  # hidden layer index, -1 for outputs
    neuron: int

    def to_list(self):
        return [self.kind, self.layer, self.neuron]


def softmax(v, axis=-1):
    v = np.asarray(v, dtype=float)
    e = np.exp(v - v.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


class Mlp:
    """Immutable layered network; ``layers`` is a list of ``(W, b)`` with ``W`` of shape (out, in)."""

    def __init__(self, layers):
        self.layers = []
        for W, b in layers:
            W = np.array(W, dtype=float, ndmin=2)
            b = np.array(b, dtype=float).ravel()
            if W.shape[0] != b.size:
                raise DimensionError(f"weight rows {W.shape[0]} != bias length {b.size}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError("network parameters must be finite")
            W.flags.writeable = False
            b.flags.writeable = False
            self.layers.append((W, b))
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        for (W0, _), (W1, _) in zip(self.layers, self.layers[1:]):
            if W1.shape[1] != W0.shape[0]:
                raise DimensionError("consecutive layer dimensions do not chain")

    @property
    def n_x(self):
        return self.layers[0][0].shape[1]

    @property
    def n_y(self):
        return self.layers[-1][0].shape[0]

    @property
    def hidden_sizes(self):
        return [W.shape[0] for W, _ in self.layers[:-1]]

    @property
    def n_p(self):
        """Number of hidden-layer biases, i.e. parametric uncertainty candidates."""
        return sum(self.hidden_sizes)

    def candidate_indices(self):
        """All candidate uncertainties: hidden biases layer by layer, then outputs."""
        idx = [UncertaintyIndex("bias", l, j) for l, h in enumerate(self.hidden_sizes) for j in range(h)]
        return idx + [UncertaintyIndex("output", -1, j) for j in range(self.n_y)]

    def _check_x(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        if X.shape[1] != self.n_x:
            raise DimensionError(f"input has {X.shape[1]} features, network expects {self.n_x}")
        return X, single

    def _hidden(self, X):
        hs = []
        h = X
        for W, b in self.layers[:-1]:
            h = np.tanh(h @ W.T + b)
            hs.append(h)
        return hs

    def forward(self, x):
        X, single = self._check_x(x)
        hs = self._hidden(X)
        W, b = self.layers[-1]
        out = (hs[-1] if hs else X) @ W.T + b
        return out[0] if single else out

    predict = forward

    def bias_jacobians(self, x):
        """d f / d z_l for every hidden pre-activation z_l; list of (N, n_y, h_l) arrays."""
        X, _ = self._check_x(x)
        hs = self._hidden(X)
        n = X.shape[0]
        jacs = []
        J = np.broadcast_to(self.layers[-1][0], (n,) + self.layers[-1][0].shape)  # d f / d h_last
        for l in range(len(hs) - 1, -1, -1):
            Jz = J * (1.0 - hs[l] ** 2)[:, None, :]
            jacs.append(Jz)
            if l > 0:
                J = Jz @ self.layers[l][0]
        return jacs[::-1]

    def uncertainty_jacobian(self, x, indices):
        """Columns d f / d u_k at u = 0 for the given uncertainties.

        Returns (n_y, n_u) for a single input, (N, n_y, n_u) for a batch.
        """
        X, single = self._check_x(x)
        n = X.shape[0]
        D = np.zeros((n, self.n_y, len(indices)))
        hidden = self.hidden_sizes
        need_bias = any(i.kind == "bias" for i in indices)
        jacs = self.bias_jacobians(X) if need_bias else None
        for k, idx in enumerate(indices):
            if idx.kind == "output":
                if not 0 <= idx.neuron < self.n_y:
                    raise DimensionError(f"output index {idx.neuron} out of range")
                D[:, idx.neuron, k] = 1.0
            elif idx.kind == "bias":
                if not (0 <= idx.layer < len(hidden) and 0 <= idx.neuron < hidden[idx.layer]):
                    raise DimensionError(f"bias index {idx} out of range")
                D[:, :, k] = jacs[idx.layer][:, :, idx.neuron]
            else:
                raise ValueError(f"unknown uncertainty kind {idx.kind!r}")
        return D[0] if single else D

    def perturbed_forward(self, x, indices, u):
        """f~(x, u): forward pass with additive bias/output perturbations ``u``."""
        X, single = self._check_x(x)
        bias_add = [np.zeros(h) for h in self.hidden_sizes]
        out_add = np.zeros(self.n_y)
        for idx, val in zip(indices, np.asarray(u, dtype=float)):
            if idx.kind == "bias":
                bias_add[idx.layer][idx.neuron] += val
            else:
                out_add[idx.neuron] += val
        h = X
        for (W, b), db in zip(self.layers[:-1], bias_add):
            h = np.tanh(h @ W.T + b + db)
        W, b = self.layers[-1]
        out = h @ W.T + b + out_add
        return out[0] if single else out

    def to_dict(self):
        return {"layers": [{"w": W.tolist(), "b": b.tolist()} for W, b in self.layers], "activation": "tanh"}

    @classmethod
    def from_dict(cls, d):
        if d.get("activation", "tanh") != "tanh":
            raise ValueError(f"unsupported activation {d['activation']!r}")
        return cls([(layer["w"], layer["b"]) for layer in d["layers"]])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def __repr__(self):
        return f"Mlp({self.n_x} -> {self.hidden_sizes} -> {self.n_y})"


def init_network(n_x, hidden, n_y, seed=0):
    rng = np.random.default_rng(seed)
    sizes = [n_x, *hidden, n_y]
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        s = 1.0 / np.sqrt(fan_in)
        layers.append((rng.uniform(-s, s, (fan_out, fan_in)), rng.uniform(-s, s, fan_out)))
    return Mlp(layers)


def train(X, Y, hidden=(64, 64), task="regression", epochs=3000, lr=0.05, momentum=0.9, seed=0):
    """Full-batch momentum gradient descent on MSE or softmax cross-entropy.

    Inputs (and regression targets) are standardised during training and the
    affine maps are folded back into the first and last layers, so the
    returned network acts on raw data.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0] or X.shape[0] == 0:
        raise DimensionError("train needs non-empty 2-D X and Y with equal row counts")
    if task not in ("regression", "classification"):
        raise ValueError(f"unknown task {task!r}")
    if epochs == 0:
        return init_network(X.shape[1], list(hidden), Y.shape[1], seed)
    x_mu, x_sd = X.mean(0), X.std(0)
    x_sd[x_sd == 0] = 1.0
    Xs = (X - x_mu) / x_sd
    if task == "regression":
        y_mu, y_sd = Y.mean(0), Y.std(0)
        y_sd[y_sd == 0] = 1.0
    else:
        y_mu, y_sd = np.zeros(Y.shape[1]), np.ones(Y.shape[1])
    Ys = (Y - y_mu) / y_sd

    net = init_network(X.shape[1], list(hidden), Y.shape[1], seed)
    params = [[W.copy(), b.copy()] for W, b in net.layers]
    vel = [[np.zeros_like(W), np.zeros_like(b)] for W, b in params]
    n = X.shape[0]
    for epoch in range(epochs):
        hs = [Xs]
        for W, b in params[:-1]:
            hs.append(np.tanh(hs[-1] @ W.T + b))
        out = hs[-1] @ params[-1][0].T + params[-1][1]
        if task == "regression":
            with np.errstate(over="ignore", invalid="ignore"):
                loss = np.mean((out - Ys) ** 2)
            g = 2.0 * (out - Ys) / out.size
        else:
            p = softmax(out)
            loss = -np.mean(np.sum(Ys * np.log(np.clip(p, 1e-300, None)), axis=1))
            g = (p - Ys) / n
        if not np.isfinite(loss):
            raise TrainingError(f"loss became non-finite at epoch {epoch}; lower the learning rate")
        for l in range(len(params) - 1, -1, -1):
            W, b = params[l]
            gW, gb = g.T @ hs[l], g.sum(0)
            if l > 0:
                g = (g @ W) * (1.0 - hs[l] ** 2)
            vel[l][0] = momentum * vel[l][0] - lr * gW
            vel[l][1] = momentum * vel[l][1] - lr * gb
            W += vel[l][0]
            b += vel[l][1]
        if epoch % 500 == 0:
            log.debug("epoch %d loss %.6g", epoch, loss)

    W0, b0 = params[0]
    params[0] = [W0 / x_sd, b0 - (W0 / x_sd) @ x_mu]
    WL, bL = params[-1]
    params[-1] = [WL * y_sd[:, None], bL * y_sd + y_mu]
    return Mlp([(W, b) for W, b in params])
