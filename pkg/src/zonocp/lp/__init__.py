"""Linear and mixed-binary programming used by calibration and outlier search."""
from .program import FEAS_TOL, INT_TOL, OPT_TOL, LinearProgram, LpSolution, MilpProgram, dump_lp
from .solve import solve_lp, solve_milp

__all__ = [
    "FEAS_TOL", "INT_TOL", "OPT_TOL",
    "LinearProgram", "LpSolution", "MilpProgram",
    "dump_lp", "solve_lp", "solve_milp",
]
