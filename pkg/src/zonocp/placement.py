"""Uncertainty placement: which candidate uncertainties to identify, and the template G_u."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError
from .mlp import Mlp, UncertaintyIndex

STRATEGIES = ("orand", "orand_star", "qr", "rand")


def round_half_away(x):
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


@dataclass
class Placement:
    indices: list
    template: np.ndarray  # (n_u, nu)
    strategy: str = "orand"
    seed: int = None

    def __post_init__(self):
        self.indices = [UncertaintyIndex(*i) for i in self.indices]
        self.template = np.asarray(self.template, dtype=float).reshape(len(self.indices), -1)
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("duplicate uncertainty index in placement")

    @property
    def n_u(self):
        return len(self.indices)

    @property
    def n_generators(self):
        return self.template.shape[1]

    @property
    def identity_template(self):
        return self.template.shape[0] == self.template.shape[1] and np.array_equal(
            self.template, np.eye(self.n_u))

    def jacobian(self, net: Mlp, X):
        """D(x) G_u for a batch of inputs: (N, n_y, nu)."""
        D = net.uncertainty_jacobian(np.atleast_2d(X), self.indices)
        return D @ self.template

    def to_dict(self):
        return {"indices": [i.to_list() for i in self.indices], "template": self.template.tolist(),
                "strategy": self.strategy, "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls([tuple(i) for i in d["indices"]], d["template"], d.get("strategy", "orand"), d.get("seed"))


def _check_fraction(p_p):
    if not 0.0 <= p_p <= 1.0:
        raise ValueError(f"p_p must lie in [0, 1], got {p_p}")


def _output_indices(net):
    return [UncertaintyIndex("output", -1, j) for j in range(net.n_y)]


def _orand_indices(net, p_p, rng):
    _check_fraction(p_p)
    pool = net.candidate_indices()[:net.n_p]
    k = round_half_away(p_p * net.n_p)
    chosen = sorted(rng.choice(len(pool), size=k, replace=False)) if k else []
    return [pool[i] for i in chosen] + _output_indices(net)


def place_orand(net: Mlp, p_p=0.1, seed=0) -> Placement:
    """All output uncertainties plus round(p_p * n_p) random hidden biases; identity template."""
    rng = np.random.default_rng(seed)
    idx = _orand_indices(net, p_p, rng)
    return Placement(idx, np.eye(len(idx)), "orand", seed)


def place_orand_star(net: Mlp, p_p=0.1, seed=0) -> Placement:
    """As ORand, with template [I | Q], Q standard normal (drawn after the index sample)."""
    rng = np.random.default_rng(seed)
    idx = _orand_indices(net, p_p, rng)
    n_u = len(idx)
    Q = rng.standard_normal((n_u, n_u))
    return Placement(idx, np.hstack([np.eye(n_u), Q]), "orand_star", seed)


def place_rand(net: Mlp, p_p=0.1, seed=0) -> Placement:
    _check_fraction(p_p)
    rng = np.random.default_rng(seed)
    pool = net.candidate_indices()
    k = min(round_half_away(p_p * net.n_p) + net.n_y, len(pool))
    chosen = sorted(rng.choice(len(pool), size=k, replace=False))
    return Placement([pool[i] for i in chosen], np.eye(k), "rand", seed)


def pivoted_qr_order(V):
    """Column order chosen by Householder QR with column pivoting (Businger-Golub).

    At every step the column with the largest remaining norm (orthogonal to
    the columns already picked) is moved to the front.
    """
    A = np.array(V, dtype=float)
    m, n = A.shape
    perm = np.arange(n)
    norms = np.einsum("ij,ij->j", A, A)
    for k in range(min(m, n)):
        j = k + int(np.argmax(norms[k:]))
        if j != k:
            A[:, [k, j]] = A[:, [j, k]]
            perm[[k, j]] = perm[[j, k]]
            norms[[k, j]] = norms[[j, k]]
        x = A[k:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            break
        v = x.copy()
        v[0] += np.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        A[k:, k:] -= 2.0 * np.outer(v, v @ A[k:, k:])
        # recompute instead of downdating: V is small and this avoids cancellation
        norms[k + 1:] = np.einsum("ij,ij->j", A[k + 1:, k + 1:], A[k + 1:, k + 1:])
    return perm


def place_qr(net: Mlp, X, p_p=0.1) -> Placement:
    """All outputs plus the first n_u - n_y non-output pivots of the stacked Jacobian V."""
    _check_fraction(p_p)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise DataError("QR placement needs at least one calibration input")
    pool = net.candidate_indices()
    D = net.uncertainty_jacobian(X, pool)  # (N, n_y, n_cand)
    V = D.reshape(-1, len(pool))
    n_extra = round_half_away(p_p * net.n_p)
    chosen = []
    for i in pivoted_qr_order(V):
        if len(chosen) == n_extra:
            break
        if pool[i].kind == "bias":
            chosen.append(pool[i])
    chosen = sorted(chosen) + _output_indices(net)
    return Placement(chosen, np.eye(len(chosen)), "qr", None)


def make_placement(strategy, net, p_p=0.1, seed=0, X=None) -> Placement:
    if strategy == "orand":
        return place_orand(net, p_p, seed)
    if strategy == "orand_star":
        return place_orand_star(net, p_p, seed)
    if strategy == "rand":
        return place_rand(net, p_p, seed)
    if strategy == "qr":
        return place_qr(net, X, p_p)
    raise ValueError(f"unknown placement strategy {strategy!r}; choose from {STRATEGIES}")
