from __future__ import annotations

import heapq
import logging

import numpy as np
from scipy.optimize import linprog

from ..exceptions import SolverError
from .program import FEAS_TOL, INT_TOL, OPT_TOL, LinearProgram, LpSolution, MilpProgram
from .simplex import simplex_solve

log = logging.getLogger(__name__)

# Problems with more (vars + constraints) than this go to HiGHS under "auto".
AUTO_SIMPLEX_LIMIT = 400


def _solve_highs(p: LinearProgram, feas_tol, opt_tol):
    res = linprog(
        p.c,
        A_ub=p.A_ub if p.b_ub.size else None,
        b_ub=p.b_ub if p.b_ub.size else None,
        A_eq=p.A_eq if p.b_eq.size else None,
        b_eq=p.b_eq if p.b_eq.size else None,
        bounds=[(None if np.isneginf(lo) else lo, None if np.isposinf(hi) else hi) for lo, hi in p.bounds],
        method="highs-ds",
        options={"primal_feasibility_tolerance": max(feas_tol, 1e-10),
                 "dual_feasibility_tolerance": max(opt_tol, 1e-10)},
    )
    if res.status == 0:
        return LpSolution("optimal", x=res.x, objective=float(res.fun),
                          duals_ub=getattr(res.ineqlin, "marginals", None),
                          duals_eq=getattr(res.eqlin, "marginals", None),
                          iterations=int(res.nit), backend="highs")
    if res.status == 2:
        return LpSolution("infeasible", iterations=int(res.nit), backend="highs")
    if res.status == 3:
        return LpSolution("unbounded", iterations=int(res.nit), backend="highs")
    raise SolverError(f"HiGHS failed (status {res.status}): {res.message}")


def solve_lp(p: LinearProgram, feas_tol=FEAS_TOL, opt_tol=OPT_TOL, backend="auto", max_iter=None):
    """Solve ``p``; ``backend`` is ``"simplex"``, ``"highs"`` or ``"auto"``.

    ``"auto"`` uses the in-house simplex for small programs and HiGHS
    (dual simplex) for the large calibration LPs.
    """
    if backend == "auto":
        backend = "simplex" if p.n_vars + p.n_constraints <= AUTO_SIMPLEX_LIMIT else "highs"
    if backend == "simplex":
        return simplex_solve(p, feas_tol=feas_tol, opt_tol=opt_tol, max_iter=max_iter)
    if backend == "highs":
        return _solve_highs(p, feas_tol, opt_tol)
    raise ValueError(f"unknown LP backend {backend!r}")


def solve_milp(p: MilpProgram, feas_tol=FEAS_TOL, opt_tol=OPT_TOL, int_tol=INT_TOL,
               node_cap=10_000, backend="auto"):
    """Best-first branch and bound over the binary variables of ``p``.

    Branches on the most fractional binary. If ``node_cap`` LP relaxations are
    spent before the tree is closed, the best incumbent is returned with
    ``proven_optimal=False``.
    """
    lp = p.lp
    binary = p.binary
    base = lp.bounds.copy()
    base[binary, 0] = np.maximum(base[binary, 0], 0.0)
    base[binary, 1] = np.minimum(base[binary, 1], 1.0)

    def relax(bounds):
        q = LinearProgram(lp.c, lp.A_ub, lp.b_ub, lp.A_eq, lp.b_eq, bounds)
        return solve_lp(q, feas_tol=feas_tol, opt_tol=opt_tol, backend=backend)

    root = relax(base)
    nodes = 1
    if not root.optimal:
        root.nodes = nodes
        return root

    counter = 0
    gap_tol = opt_tol * max(1.0, abs(root.objective))

    def rounded(sol):
        vals = sol.x[binary]
        if np.abs(vals - np.round(vals)).max(initial=0.0) > int_tol:
            return None
        x = sol.x.copy()
        x[binary] = np.round(vals)
        return LpSolution("optimal", x=x, objective=float(lp.c @ x), backend=sol.backend)

    # integral relaxations become incumbents as soon as they are solved, so a
    # node cap can stop the search with a feasible but unproven answer
    incumbent = rounded(root)
    heap = [] if incumbent is not None else [(root.objective, counter, base, root)]
    closed = True
    while heap:
        bound, _, bnds, sol = heapq.heappop(heap)
        if incumbent is not None and bound >= incumbent.objective - gap_tol:
            continue
        vals = sol.x[binary]
        j = binary[np.argmax(np.abs(vals - np.round(vals)))]
        for v in (0.0, 1.0):
            if nodes >= node_cap:
                closed = False
                break
            child = bnds.copy()
            child[j] = (v, v)
            cs = relax(child)
            nodes += 1
            if not cs.optimal or (incumbent is not None and cs.objective >= incumbent.objective - gap_tol):
                continue
            cand = rounded(cs)
            if cand is not None:
                incumbent = cand
            else:
                counter += 1
                heapq.heappush(heap, (cs.objective, counter, child, cs))
        if not closed:
            break

    if incumbent is None:
        if closed:
            return LpSolution("infeasible", nodes=nodes)
        raise SolverError(f"node cap {node_cap} reached without an integer-feasible incumbent")
    incumbent.nodes = nodes
    incumbent.proven_optimal = closed
    if not closed:
        log.warning("branch and bound stopped at node cap %d; incumbent may be suboptimal", node_cap)
    return incumbent
