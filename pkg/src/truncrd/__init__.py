"""Rate-distortion style minimizations with truncated and extended-real distortions."""

__version__ = "0.1.0"

from .constraints import (  # noqa: E402
    ConsistencySpec,
    ConstraintSystem,
    DistortionBall,
    MarkovChainSpec,
    check_ball,
    check_membership,
    restrict_support,
)
from .errors import ConfigError, InfeasibleError, LayoutMismatchError, NumericalViolationError  # noqa: E402
from .extended import INFINITE, ext_add, ext_mul, to_extended  # noqa: E402
from .objective import MITerm, ObjectiveSpec, evaluate, parse_term  # noqa: E402
from .pmf import (  # noqa: E402
    AlphabetLayout,
    ExtendedDistortionVector,
    JointPmf,
    conditional_mutual_information,
    expected_distortion,
    marginalize,
)
from .scenarios import (  # noqa: E402
    ScenarioConfig,
    build_dsbs,
    build_erasure_distortion,
    build_hamming_distortion,
    build_problem,
    conditional_problem,
    generic_problem,
    lift_distortion,
    shannon_problem,
    wyner_ziv_problem,
)
from .solvers import (  # noqa: E402
    OracleBracket,
    ProblemSpec,
    SolveResult,
    SolverOptions,
    Status,
    blahut_arimoto_rd,
    conditional_rd,
    oracle_grid,
    solve,
    solve_psi,
    solve_psi_limit,
    wyner_ziv_rd,
)
from .truncation import ConvergenceReport, TruncationSchedule, converge_sweep, make_truncated  # noqa: E402
