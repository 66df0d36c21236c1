from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..constraints import ConstraintSystem
from ..errors import LayoutMismatchError
from ..objective import ObjectiveSpec
from ..pmf import AlphabetLayout, JointPmf

__all__ = ["Status", "ProblemSpec", "SolveResult", "SolverOptions", "DEFAULT_LAMBDAS", "TOL_BA", "SLACK"]

DEFAULT_LAMBDAS = tuple(10.0**i for i in range(7))
TOL_BA = 1e-6
# slack allowed between solver values that must be ordered
SLACK = 1e-6


class Status(str, enum.Enum):
    OPTIMAL = "optimal-certified"
    LOCAL = "locally-optimal"
    INFEASIBLE = "infeasible"

    def __str__(self):
        return self.value


ROLES = ("source", "side-information", "auxiliary", "reconstruction")
_DEFAULT_ROLE = {"X": "source", "Y": "side-information", "U": "auxiliary", "Xh": "reconstruction"}


@dataclass(frozen=True)
class ProblemSpec:
    """The pair (objective, constraint set) over one layout.

    ``kind`` lets the dispatcher pick a specialized solver; ``generic``
    problems always go through the penalty solver.
    """

    layout: AlphabetLayout
    objective: ObjectiveSpec
    constraints: ConstraintSystem
    kind: str = "generic"
    roles: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.constraints.layout != self.layout:
            raise LayoutMismatchError("objective and constraints must share the problem layout")
        self.objective.check_layout(self.layout)
        roles = dict(self.roles) or {f: _DEFAULT_ROLE[f] for f in self.layout.factors}
        for f, r in roles.items():
            if r not in ROLES:
                raise ValueError(f"unknown role {r!r} for factor {f}")
        object.__setattr__(self, "roles", tuple(sorted(roles.items())))


@dataclass(frozen=True)
class SolverOptions:
    restarts: int = 32
    seed: int = 0
    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS
    method: str = "auto"  # "auto" picks specialized solvers where the problem kind allows
    workers: int = 1
    max_iter: int = 3000

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.method not in ("auto", "generic"):
            raise ValueError("method must be 'auto' or 'generic'")


@dataclass(frozen=True, eq=False)
class SolveResult:
    value: float | None
    argmin: JointPmf | None
    status: Status
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status is not Status.INFEASIBLE

    @classmethod
    def infeasible(cls, **diag) -> SolveResult:
        return cls(None, None, Status.INFEASIBLE, diag)
