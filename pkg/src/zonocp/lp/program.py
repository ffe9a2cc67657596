"""Problem containers for the LP/MILP layer."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..exceptions import DimensionError

FEAS_TOL = 1e-8
OPT_TOL = 1e-9
INT_TOL = 1e-6


def _as_matrix(a, n):
    if a is None:
        return sp.csr_matrix((0, n))
    if sp.issparse(a):
        return sp.csr_matrix(a, dtype=float)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return sp.csr_matrix((0, n))
    return sp.csr_matrix(a)


@dataclass
class LinearProgram:
    """``min c @ x`` s.t. ``A_ub x <= b_ub``, ``A_eq x == b_eq``, ``lo <= x <= hi``.

    Constraint matrices are stored as CSR; dense inputs are converted.
    ``bounds`` is an ``(n, 2)`` array, ``None`` means ``x >= 0``.
    """

    c: np.ndarray
    A_ub: sp.csr_matrix = None
    b_ub: np.ndarray = None
    A_eq: sp.csr_matrix = None
    b_eq: np.ndarray = None
    bounds: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_ub = _as_matrix(self.A_ub, n)
        self.A_eq = _as_matrix(self.A_eq, n)
        self.b_ub = np.asarray(self.b_ub if self.b_ub is not None else [], dtype=float).ravel()
        self.b_eq = np.asarray(self.b_eq if self.b_eq is not None else [], dtype=float).ravel()
        if self.bounds is None:
            self.bounds = np.column_stack([np.zeros(n), np.full(n, np.inf)])
        else:
            self.bounds = np.array(self.bounds, dtype=float).reshape(n, 2)
        if self.A_ub.shape != (self.b_ub.size, n):
            raise DimensionError(f"A_ub has shape {self.A_ub.shape}, expected ({self.b_ub.size}, {n})")
        if self.A_eq.shape != (self.b_eq.size, n):
            raise DimensionError(f"A_eq has shape {self.A_eq.shape}, expected ({self.b_eq.size}, {n})")
        for name, arr in (("c", self.c), ("A_ub", self.A_ub.data), ("A_eq", self.A_eq.data),
                          ("b_ub", self.b_ub), ("b_eq", self.b_eq)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if np.any(self.bounds[:, 0] > self.bounds[:, 1]):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n_vars(self):
        return self.c.size

    @property
    def n_constraints(self):
        return self.b_ub.size + self.b_eq.size

    def residual(self, x):
        """Largest primal constraint violation of ``x`` (bounds included)."""
        x = np.asarray(x, dtype=float)
        r = [0.0]
        if self.b_ub.size:
            r.append(np.max(self.A_ub @ x - self.b_ub))
        if self.b_eq.size:
            r.append(np.max(np.abs(self.A_eq @ x - self.b_eq)))
        r.append(np.max(self.bounds[:, 0] - x, initial=0.0))
        r.append(np.max(x - self.bounds[:, 1], initial=0.0))
        return float(max(r))


@dataclass
class MilpProgram:
    """A linear program whose ``binary`` variables must take values in {0, 1}."""

    lp: LinearProgram
    binary: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        self.binary = np.unique(np.asarray(self.binary, dtype=int))
        if self.binary.size and (self.binary.min() < 0 or self.binary.max() >= self.lp.n_vars):
            raise DimensionError("binary variable index out of range")


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray = None
    objective: float = np.nan
    duals_ub: np.ndarray = None
    duals_eq: np.ndarray = None
    iterations: int = 0
    nodes: int = 0
    proven_optimal: bool = True
    backend: str = ""

    @property
    def optimal(self):
        return self.status == "optimal"


def dump_lp(p, binary=(), names=None):
    """Render a program in a plain CPLEX-like LP text format (debugging aid)."""
    if isinstance(p, MilpProgram):
        binary, p = p.binary, p.lp
    n = p.n_vars
    names = names or [f"x{j}" for j in range(n)]

    def expr(coefs, idx):
        terms = [f"{v:+.17g} {names[j]}" for v, j in zip(coefs, idx) if v != 0.0]
        return " ".join(terms) if terms else "0"

    lines = ["Minimize", " obj: " + expr(p.c, range(n)), "Subject To"]
    for i in range(p.b_ub.size):
        row = p.A_ub.getrow(i)
        lines.append(f" ub{i}: {expr(row.data, row.indices)} <= {p.b_ub[i]:.17g}")
    for i in range(p.b_eq.size):
        row = p.A_eq.getrow(i)
        lines.append(f" eq{i}: {expr(row.data, row.indices)} = {p.b_eq[i]:.17g}")
    lines.append("Bounds")
    for j, (lo, hi) in enumerate(p.bounds):
        lo_s = "-inf" if np.isneginf(lo) else f"{lo:.17g}"
        hi_s = "+inf" if np.isposinf(hi) else f"{hi:.17g}"
        lines.append(f" {lo_s} <= {names[j]} <= {hi_s}")
    if len(binary):
        lines.append("Binary")
        lines.append(" " + " ".join(names[j] for j in binary))
    lines.append("End")
    return "\n".join(lines) + "\n"
