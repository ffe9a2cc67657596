"""Dense two-phase tableau simplex.

Dantzig pricing by default; after ``stall`` consecutive degenerate pivots the
solver switches to Bland's rule for the rest of the phase, which rules out
cycling.
"""
from __future__ import annotations

import numpy as np

from ..exceptions import IterationLimitError
from .program import FEAS_TOL, OPT_TOL, LinearProgram, LpSolution

PIVOT_TOL = 1e-10


class _StandardForm:
    """``min c_s @ s`` s.t. ``A s = b``, ``s >= 0`` with ``x = offset + M @ s``."""

    def __init__(self, p: LinearProgram):
        n = p.n_vars
        lo, hi = p.bounds[:, 0], p.bounds[:, 1]
        cols = []  # (original var, sign)
        offset = np.zeros(n)
        ub_rows = []  # (standard column, capacity)
        for j in range(n):
            if np.isfinite(lo[j]):
                offset[j] = lo[j]
                cols.append((j, 1.0))
                if np.isfinite(hi[j]):
                    ub_rows.append((len(cols) - 1, hi[j] - lo[j]))
            elif np.isfinite(hi[j]):
                offset[j] = hi[j]
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        ns = len(cols)
        M = np.zeros((n, ns))
        for k, (j, s) in enumerate(cols):
            M[j, k] = s
        self.M, self.offset = M, offset
        self.const = float(p.c @ offset)
        c_s = p.c @ M

        A_ub = p.A_ub.toarray() @ M
        b_ub = p.b_ub - p.A_ub @ offset
        U = np.zeros((len(ub_rows), ns))
        for r, (k, cap) in enumerate(ub_rows):
            U[r, k] = 1.0
        A_ineq = np.vstack([A_ub, U])
        b_ineq = np.concatenate([b_ub, [cap for _, cap in ub_rows]])
        A_eq = p.A_eq.toarray() @ M
        b_eq = p.b_eq - p.A_eq @ offset

        m_in, m_eq = A_ineq.shape[0], A_eq.shape[0]
        m = m_in + m_eq
        A = np.zeros((m, ns + m_in))
        A[:m_in, :ns] = A_ineq
        A[:m_in, ns:] = np.eye(m_in)
        A[m_in:, :ns] = A_eq
        b = np.concatenate([b_ineq, b_eq])
        sign = np.where(b < 0, -1.0, 1.0)
        A *= sign[:, None]
        b *= sign
        self.A, self.b, self.sign = A, b, sign
        self.c = np.concatenate([c_s, np.zeros(m_in)])
        self.n_orig_ub, self.n_ineq, self.n_eq = p.b_ub.size, m_in, m_eq
        self.n_struct = ns


def _pivot(T, r, k):
    T[r] /= T[r, k]
    col = T[:, k].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run_phase(T, basis, allowed, opt_tol, max_iter, stall, it0):
    """Iterate on tableau ``T`` (last row = reduced costs). Returns status, iterations."""
    m = T.shape[0] - 1
    it = it0
    degenerate_run = 0
    bland = False
    while True:
        rc = T[m, :-1]
        candidates = np.flatnonzero((rc < -opt_tol) & allowed)
        if candidates.size == 0:
            return "optimal", it
        if it >= max_iter:
            raise IterationLimitError(it)
        k = candidates[0] if bland else candidates[np.argmin(rc[candidates])]
        col = T[:m, k]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            return "unbounded", it
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = tied[np.argmin(basis[tied])]
        degenerate_run = degenerate_run + 1 if best <= 1e-12 else 0
        if degenerate_run > stall:
            bland = True
        _pivot(T, r, k)
        basis[r] = k
        it += 1


def simplex_solve(p: LinearProgram, feas_tol=FEAS_TOL, opt_tol=OPT_TOL, max_iter=None, stall=50):
    sf = _StandardForm(p)
    A, b = sf.A, sf.b
    m, n = A.shape
    max_iter = max_iter or max(5000, 20 * (m + n))

    # Initial basis: slack columns with +1 coefficient, artificials elsewhere.
    basis = np.full(m, -1)
    for r in range(sf.n_ineq):
        if sf.sign[r] > 0:
            basis[r] = sf.n_struct + r
    need_art = np.flatnonzero(basis < 0)
    n_art = need_art.size
    T = np.zeros((m + 1, n + n_art + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    for a, r in enumerate(need_art):
        T[r, n + a] = 1.0
        basis[r] = n + a

    it = 0
    if n_art:
        T[m, n:n + n_art] = 1.0
        for r in need_art:
            T[m] -= T[r]
        allowed = np.ones(n + n_art, dtype=bool)
        _, it = _run_phase(T, basis, allowed, opt_tol, max_iter, stall, it)
        if -T[m, -1] > feas_tol * max(1.0, np.abs(b).max(initial=0.0)):
            return LpSolution("infeasible", iterations=it, backend="simplex")
        # Drive remaining (zero-level) artificials out of the basis.
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= n:
                nz = np.flatnonzero(np.abs(T[r, :n]) > 1e-9)
                if nz.size:
                    _pivot(T, r, nz[0])
                    basis[r] = nz[0]
                else:
                    keep[r] = False
        rows = np.concatenate([np.flatnonzero(keep), [m]])
        T = T[rows][:, np.r_[0:n, T.shape[1] - 1]]
        basis = basis[keep]
        A_kept, b_kept, row_ids = A[keep], b[keep], np.flatnonzero(keep)
    else:
        A_kept, b_kept, row_ids = A, b, np.arange(m)

    mk = basis.size
    T[mk, :] = 0.0
    T[mk, :n] = sf.c
    for r in range(mk):
        T[mk] -= sf.c[basis[r]] * T[r]
    status, it = _run_phase(T, basis, np.ones(n, dtype=bool), opt_tol, max_iter, stall, it)
    if status == "unbounded":
        return LpSolution("unbounded", iterations=it, backend="simplex")

    # Recompute basic values and duals from the original data for accuracy.
    B = A_kept[:, basis]
    s = np.zeros(n)
    try:
        s[basis] = np.linalg.solve(B, b_kept)
        y = np.linalg.solve(B.T, sf.c[basis])
    except np.linalg.LinAlgError:
        s[basis] = T[:mk, -1]
        y = np.linalg.lstsq(B.T, sf.c[basis], rcond=None)[0]
    s = np.maximum(s, 0.0)
    x = sf.offset + sf.M @ s[:sf.n_struct]

    y_full = np.zeros(m)
    y_full[row_ids] = y
    y_full *= sf.sign
    duals_ub = y_full[:sf.n_orig_ub]
    duals_eq = y_full[sf.n_ineq:]
    return LpSolution("optimal", x=x, objective=float(p.c @ x), duals_ub=duals_ub,
                      duals_eq=duals_eq, iterations=it, backend="simplex")
