from .blahut import blahut_arimoto_rd, conditional_rd
from .oracle import OracleBracket, oracle_grid
from .penalty import solve, solve_psi, solve_psi_limit, verify_result
from .problem import ProblemSpec, SolveResult, SolverOptions, Status
from .wyner_ziv import wyner_ziv_rd

__all__ = [
    "ProblemSpec",
    "SolveResult",
    "SolverOptions",
    "Status",
    "OracleBracket",
    "blahut_arimoto_rd",
    "conditional_rd",
    "oracle_grid",
    "solve",
    "solve_psi",
    "solve_psi_limit",
    "verify_result",
    "wyner_ziv_rd",
]
