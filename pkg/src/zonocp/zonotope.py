"""Zonotopes <c, G> = {c + G @ lam : lam in [-1, 1]^nu} and the set operations on them."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .exceptions import DimensionError, SolverError, VolumeBudgetError
from .lp import LinearProgram, solve_lp

CONTAINMENT_TOL = 1e-6
VOLUME_TERM_CAP = 10**6


@dataclass(frozen=True, eq=False)
class Zonotope:
    center: np.ndarray
    generators: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).ravel()
        G = np.asarray(self.generators, dtype=float)
        if G.size == 0:
            G = np.zeros((c.size, 0))
        G = G.reshape(c.size, -1)
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(G))):
            raise ValueError("zonotope entries must be finite")
        c.flags.writeable = False
        G.flags.writeable = False
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", G)

    @property
    def dim(self):
        return self.center.size

    @property
    def n_generators(self):
        return self.generators.shape[1]

    @classmethod
    def box(cls, center, radii):
        return cls(center, np.diag(np.asarray(radii, dtype=float)))

    def sample(self, n, rng=None):
        """Points c + G lam with lam uniform on the unit cube (not uniform on the set)."""
        rng = np.random.default_rng(rng)
        lam = rng.uniform(-1.0, 1.0, size=(n, self.n_generators))
        return self.center + lam @ self.generators.T

    def to_dict(self):
        return {"center": self.center.tolist(), "generators": self.generators.tolist()}

    @classmethod
    def from_dict(cls, d):
        c = np.asarray(d["center"], dtype=float)
        return cls(c, np.asarray(d["generators"], dtype=float).reshape(c.size, -1))

    def __repr__(self):
        return f"Zonotope(dim={self.dim}, n_generators={self.n_generators})"


def interval_norm(z: Zonotope) -> float:
    return float(np.abs(z.generators).sum())


def linear_map(m, z: Zonotope) -> Zonotope:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[1] != z.dim:
        raise DimensionError(f"cannot map a {z.dim}-D zonotope with a {m.shape} matrix")
    return Zonotope(m @ z.center, m @ z.generators)


def minkowski_sum(a: Zonotope, b: Zonotope) -> Zonotope:
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return Zonotope(a.center + b.center, np.hstack([a.generators, b.generators]))


def box_hull(z: Zonotope) -> Zonotope:
    return Zonotope.box(z.center, np.abs(z.generators).sum(axis=1))


def containment_gap(z: Zonotope, y) -> float:
    """min over |beta| <= 1 of ||c + G beta - y||_inf; zero iff y lies in z."""
    y = np.asarray(y, dtype=float).ravel()
    if y.size != z.dim:
        raise DimensionError(f"point has {y.size} entries, zonotope is {z.dim}-D")
    d = y - z.center
    n, nu = z.dim, z.n_generators
    if nu == 0:
        return float(np.abs(d).max(initial=0.0))
    G = z.generators
    # variables (beta, t): minimise t s.t. -t <= G beta - d <= t
    ones = np.ones((n, 1))
    A_ub = np.block([[G, -ones], [-G, -ones]])
    b_ub = np.concatenate([d, -d])
    bounds = np.vstack([np.tile([-1.0, 1.0], (nu, 1)), [[0.0, np.inf]]])
    c = np.zeros(nu + 1)
    c[-1] = 1.0
    sol = solve_lp(LinearProgram(c, A_ub, b_ub, bounds=bounds))
    if not sol.optimal:
        raise SolverError(f"containment LP returned {sol.status}")
    return max(float(sol.objective), 0.0)


def contains_point(z: Zonotope, y, tol=CONTAINMENT_TOL) -> bool:
    return containment_gap(z, y) <= tol


def _n_volume_terms(z):
    return comb(z.n_generators, z.dim)


def volume(z: Zonotope, term_cap=VOLUME_TERM_CAP) -> float:
    """Exact volume 2^n * sum of |det| over all n-column subsets of G."""
    n, nu = z.dim, z.n_generators
    if nu < n:
        return 0.0
    if n == 1:
        return float(2.0 * np.abs(z.generators).sum())
    n_terms = _n_volume_terms(z)
    if n_terms > term_cap:
        raise VolumeBudgetError(
            f"exact volume needs C({nu},{n}) = {n_terms} determinants (cap {term_cap}); "
            "use projected_volume on a subset of dimensions")
    G = z.generators
    total = 0.0
    chunk = 20000
    subsets = combinations(range(nu), n)
    while True:
        idx = np.fromiter((j for s in _take(subsets, chunk) for j in s), dtype=int)
        if idx.size == 0:
            break
        blocks = G[:, idx.reshape(-1, n)].transpose(1, 0, 2)
        total += np.abs(np.linalg.det(blocks)).sum()
    return float(2.0**n * total)


def _take(it, k):
    for _ in range(k):
        try:
            yield next(it)
        except StopIteration:
            return


def projected_volume(z: Zonotope, dims, term_cap=VOLUME_TERM_CAP) -> float:
    dims = [int(d) for d in dims]
    if len(set(dims)) != len(dims) or min(dims) < 0 or max(dims) >= z.dim:
        raise DimensionError(f"invalid projection indices {dims} for a {z.dim}-D zonotope")
    return volume(linear_map(np.eye(z.dim)[dims], z), term_cap=term_cap)


def vertices_2d(z: Zonotope) -> np.ndarray:
    """Polygon vertices of a 2-D zonotope, counter-clockwise, as a (k, 2) array."""
    if z.dim != 2:
        raise DimensionError("vertices_2d needs a 2-D zonotope")
    G = z.generators[:, np.linalg.norm(z.generators, axis=0) > 0]
    if G.shape[1] == 0:
        return z.center.reshape(1, 2).copy()
    # point every generator into the upper half plane, sort by angle
    flip = (G[1] < 0) | ((G[1] == 0) & (G[0] < 0))
    G = np.where(flip, -G, G)
    G = G[:, np.argsort(np.arctan2(G[1], G[0]), kind="stable")]
    start = z.center - G.sum(axis=1)
    # lowest point first, walk with 2*g steps: first ascending angles, then their negatives
    steps = np.hstack([2 * G, -2 * G])
    pts = start + np.vstack([np.zeros(2), np.cumsum(steps.T, axis=0)[:-1]])
    # drop collinear repeats
    keep = [0]
    for i in range(1, len(pts)):
        if not np.allclose(pts[i], pts[keep[-1]], atol=1e-14 * (1 + np.abs(pts).max())):
            keep.append(i)
    pts = pts[keep]
    if len(pts) > 2:
        # turning angle between unit edge directions; short edges must not look collinear
        d_in = pts - np.roll(pts, 1, axis=0)
        d_out = np.roll(pts, -1, axis=0) - pts
        d_in /= np.linalg.norm(d_in, axis=1, keepdims=True)
        d_out /= np.linalg.norm(d_out, axis=1, keepdims=True)
        cross = d_in[:, 0] * d_out[:, 1] - d_in[:, 1] * d_out[:, 0]
        strict = np.abs(cross) > 1e-12
        if strict.sum() >= 2:
            pts = pts[strict]
    return pts


def shoelace_area(pts) -> float:
    pts = np.asarray(pts, dtype=float)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
