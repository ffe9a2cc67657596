"""Independent reference computations used by the tests.

Each oracle takes a different route from the package code: facet enumeration
instead of determinant sums, vertex enumeration instead of simplex pivoting,
exhaustive search instead of branch and bound, and so on.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

from zonocp.mlp import Mlp


def facet_normals(G):
    """Candidate facet normals of a full-dimensional 2-D or 3-D zonotope."""
    n = G.shape[0]
    if n == 2:
        N = np.stack([-G[1], G[0]], axis=1)
    elif n == 3:
        N = np.array([np.cross(G[:, i], G[:, j]) for i, j in itertools.combinations(range(G.shape[1]), 2)])
    else:
        raise ValueError("facet enumeration oracle supports 2-D and 3-D only")
    N = N[np.linalg.norm(N, axis=1) > 1e-12]
    return N


def member_mask(center, G, Y):
    """Halfspace membership |n.(y - c)| <= sum_i |n.g_i| for every candidate facet normal."""
    N = facet_normals(G)
    h = np.abs(N @ G).sum(axis=1)
    return np.all(np.abs((Y - center) @ N.T) <= h * (1 + 1e-12), axis=1)


def mc_volume(center, G, n_samples=1_000_000, seed=0, chunk=250_000):
    """Rejection-sampling volume over the bounding box."""
    r = np.abs(G).sum(axis=1)
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        Y = center + rng.uniform(-1, 1, size=(k, center.size)) * r
        hits += int(member_mask(center, G, Y).sum())
        done += k
    return float(np.prod(2 * r) * hits / n_samples)


def lp_vertex_enumeration(c, A_ub, b_ub, A_eq=None, b_eq=None, lo=None, hi=None):
    """Best objective over all basic feasible points of a bounded LP, or None if infeasible."""
    c = np.asarray(c, dtype=float)
    n = c.size
    rows, rhs = [np.atleast_2d(A_ub)], [np.asarray(b_ub, float)]
    eq_rows = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float))
    eq_rhs = np.zeros(0) if b_eq is None else np.asarray(b_eq, float)
    if lo is not None:
        rows.append(-np.eye(n))
        rhs.append(-np.asarray(lo, float))
    if hi is not None:
        rows.append(np.eye(n))
        rhs.append(np.asarray(hi, float))
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    k = eq_rows.shape[0]
    best = None
    for S in itertools.combinations(range(A.shape[0]), n - k):
        M = np.vstack([eq_rows, A[list(S)]])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, np.concatenate([eq_rhs, b[list(S)]]))
        if np.all(A @ x <= b + 1e-9) and (k == 0 or np.allclose(eq_rows @ x, eq_rhs, atol=1e-9)):
            val = float(c @ x)
            best = val if best is None else min(best, val)
    return best


def milp_enumeration(c, A_ub, b_ub, binary, bounds):
    """Exhaustive search over the binary variables, continuous part by HiGHS."""
    best = None
    bounds = np.array(bounds, dtype=float)
    for assign in itertools.product((0.0, 1.0), repeat=len(binary)):
        bb = bounds.copy()
        bb[binary, 0] = assign
        bb[binary, 1] = assign
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[tuple(r) for r in bb], method="highs")
        if res.status == 0 and (best is None or res.fun < best):
            best = float(res.fun)
    return best


def finite_difference_jacobian(net: Mlp, x, indices, h=1e-5):
    cols = []
    for k in range(len(indices)):
        e = np.zeros(len(indices))
        e[k] = h
        cols.append((net.perturbed_forward(x, indices, e) - net.perturbed_forward(x, indices, -e)) / (2 * h))
    return np.stack(cols, axis=1)


def gram_schmidt_pivot_order(V):
    """Greedy column order: repeatedly take the largest residual column, project it out."""
    R = np.array(V, dtype=float)
    remaining = list(range(R.shape[1]))
    order = []
    while remaining:
        norms = [np.linalg.norm(R[:, j]) for j in remaining]
        j = remaining[int(np.argmax(norms))]
        order.append(j)
        remaining.remove(j)
        q = R[:, j]
        nq = np.linalg.norm(q)
        if nq > 1e-12:
            q = q / nq
            for i in remaining:
                R[:, i] -= (q @ R[:, i]) * q
    return order


def class_margin_linprog(center, G, i):
    """max t s.t. (c + G beta)_i - (c + G beta)_j >= t for all j != i, |beta| <= 1 (HiGHS)."""
    n, nu = G.shape
    others = [j for j in range(n) if j != i]
    A = np.array([np.concatenate([-(G[i] - G[j]), [1.0]]) for j in others])
    b = np.array([center[i] - center[j] for j in others])
    c = np.zeros(nu + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=A, b_ub=b, bounds=[(-1, 1)] * nu + [(None, None)], method="highs")
    return -res.fun


def random_net(rng, n_x=None, hidden=None, n_y=None, scale=1.0):
    n_x = n_x or int(rng.integers(1, 4))
    hidden = hidden if hidden is not None else [int(h) for h in rng.integers(2, 6, size=rng.integers(1, 3))]
    n_y = n_y or int(rng.integers(1, 4))
    sizes = [n_x, *hidden, n_y]
    return Mlp([(scale * rng.standard_normal((o, i)), scale * rng.standard_normal(o))
                for i, o in zip(sizes[:-1], sizes[1:])])


def calibration_objective_linprog(A, resid, c_alpha, keep):
    """Regression calibration optimum with containment on ``keep`` only, via HiGHS.

    Variables (alpha, beta_m for m in keep); beta is bounded by |beta| <= alpha.
    """
    keep = list(keep)
    nu = A.shape[2]
    k = len(keep)
    n = nu * (k + 1)
    c = np.concatenate([c_alpha, np.zeros(k * nu)])
    A_eq = np.zeros((k * A.shape[1], n))
    b_eq = np.zeros(k * A.shape[1])
    A_ub = np.zeros((2 * k * nu, n))
    for j, m in enumerate(keep):
        r = slice(j * A.shape[1], (j + 1) * A.shape[1])
        A_eq[r, nu * (j + 1):nu * (j + 2)] = A[m]
        b_eq[r] = resid[m]
        for s, sign in enumerate((1.0, -1.0)):
            rows = slice((2 * j + s) * nu, (2 * j + s + 1) * nu)
            A_ub[rows, :nu] = -np.eye(nu)
            A_ub[rows, nu * (j + 1):nu * (j + 2)] = sign * np.eye(nu)
    bounds = [(0, None)] * nu + [(None, None)] * (k * nu)
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(A_ub.shape[0]), A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs")
    return res.fun if res.status == 0 else np.inf


def brute_force_removal(A, resid, c_alpha, n_out):
    """Minimum calibration objective over every removal set of size n_out."""
    n = A.shape[0]
    return min(calibration_objective_linprog(A, resid, c_alpha, [m for m in range(n) if m not in drop])
               for drop in itertools.combinations(range(n), n_out))
