"""Truncated distortion sequences d_n = min(d_inf, M_n) and convergence sweeps.

As the caps grow, the truncated balls shrink toward the limit ball, so the
truncated values can only go up and stay below the limit value.  A sweep
computes the limit once by support restriction, then the truncated values,
and checks both inequalities numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constraints import DistortionBall
from .errors import InfeasibleError, NumericalViolationError
from .pmf import ExtendedDistortionVector
from .solvers.penalty import solve, solve_psi_limit
from .solvers.problem import SLACK, ProblemSpec, SolveResult, SolverOptions, Status

__all__ = ["make_truncated", "TruncationSchedule", "SweepEntry", "ConvergenceReport", "converge_sweep"]


def make_truncated(d_inf: ExtendedDistortionVector, M: float) -> ExtendedDistortionVector:
    """Componentwise min(d_inf, M); every entry of the result is finite."""
    M = float(M)
    if not (math.isfinite(M) and M > 0):
        raise ValueError("cap M must be a finite positive real")
    fin = np.where(d_inf.infinite, M, np.minimum(d_inf.finite, M))
    return ExtendedDistortionVector._raw(d_inf.layout, fin, np.zeros(len(d_inf), bool))


@dataclass(frozen=True, eq=False)
class TruncationSchedule:
    d_inf: ExtendedDistortionVector
    caps: tuple[float, ...]

    def __post_init__(self):
        caps = tuple(float(c) for c in self.caps)
        if not caps:
            raise ValueError("schedule needs at least one cap")
        if any(not (math.isfinite(c) and c > 0) for c in caps):
            raise ValueError("caps must be finite positive reals")
        if any(b <= a for a, b in zip(caps, caps[1:])):
            raise ValueError("caps must be strictly increasing")
        object.__setattr__(self, "caps", caps)

    @classmethod
    def geometric(cls, d_inf, n_max: int = 10, base: float = 2.0) -> TruncationSchedule:
        return cls(d_inf, tuple(base**j for j in range(1, n_max + 1)))

    @classmethod
    def arithmetic(cls, d_inf, n_max: int = 10, step: float = 1.0, start: float | None = None) -> TruncationSchedule:
        start = step if start is None else start
        return cls(d_inf, tuple(start + step * j for j in range(n_max)))

    def __len__(self):
        return len(self.caps)

    def truncated(self, n: int) -> ExtendedDistortionVector:
        """d_n for 1-based index n."""
        return make_truncated(self.d_inf, self.caps[n - 1])


@dataclass(frozen=True, eq=False)
class SweepEntry:
    n: int
    cap: float
    result: SolveResult

    @property
    def value(self):
        return self.result.value

    @property
    def status(self) -> Status:
        return self.result.status


@dataclass(eq=False)
class ConvergenceReport:
    D: float
    entries: list[SweepEntry]
    limit: SolveResult
    tol: float | None
    monotone: bool = True
    violations: list[str] = field(default_factory=list)

    @property
    def psi_inf(self) -> float:
        return self.limit.value

    @property
    def values(self) -> list[float]:
        return [e.value for e in self.entries]

    @property
    def gaps(self) -> list[float]:
        return [self.psi_inf - e.value for e in self.entries]

    @property
    def first_within_tol(self) -> int | None:
        if self.tol is None:
            return None
        for e, g in zip(self.entries, self.gaps):
            if g <= self.tol:
                return e.n
        return None

    @property
    def ok(self) -> bool:
        return self.monotone and not self.violations

    def summary(self) -> str:
        lines = [f"D = {self.D:g}   psi_inf = {self.psi_inf:.9f} bits"]
        lines.append(f"{'n':>3} {'M_n':>10} {'psi_n':>14} {'gap':>12}  status")
        for e, g in zip(self.entries, self.gaps):
            lines.append(f"{e.n:>3} {e.cap:>10g} {e.value:>14.9f} {g:>12.3e}  {e.status}")
        tail = f"monotone: {'yes' if self.monotone else 'NO'}"
        if self.tol is not None:
            tail += f"; first n with gap <= {self.tol:g}: {self.first_within_tol}"
        lines.append(tail)
        lines += [f"violation: {v}" for v in self.violations]
        return "\n".join(lines)


def converge_sweep(problem: ProblemSpec, schedule: TruncationSchedule, D: float, tol: float | None = None,
                   n_max: int | None = None, opts: SolverOptions | None = None) -> ConvergenceReport:
    """Limit value, then truncated values for n = 1..n_max (stopping once the gap is <= tol).

    Raises InfeasibleError if the limit problem is infeasible and
    NumericalViolationError if some truncated value exceeds the limit by
    more than the solver slack.
    """
    opts = opts or SolverOptions()
    n_max = len(schedule) if n_max is None else min(n_max, len(schedule))
    limit = solve_psi_limit(problem, schedule.d_inf, D, opts)
    if not limit.feasible:
        raise InfeasibleError(f"limit problem infeasible at D={D}: {limit.diagnostics.get('reason')}")
    entries: list[SweepEntry] = []
    prev_arg = None
    for n in range(1, n_max + 1):
        ball = DistortionBall(schedule.truncated(n), D)
        # warm start from the previous argmin alongside the cold multi-start batch
        res = solve(problem, ball, opts, initial=[prev_arg] if prev_arg is not None else None)
        entries.append(SweepEntry(n, schedule.caps[n - 1], res))
        if not res.feasible:
            raise InfeasibleError(f"truncated problem n={n} infeasible although the limit is feasible")
        prev_arg = res.argmin
        if tol is not None and limit.value - res.value <= tol:
            break
    report = ConvergenceReport(float(D), entries, limit, tol)
    for a, b in zip(entries, entries[1:]):
        if b.value < a.value - SLACK:
            report.monotone = False
            report.violations.append(f"psi_{b.n} = {b.value:.9f} < psi_{a.n} = {a.value:.9f}")
    bad = [e for e in entries if e.value > limit.value + SLACK]
    if bad:
        e = bad[0]
        raise NumericalViolationError(
            f"psi_{e.n}(D={D}) = {e.value:.9f} exceeds psi_inf = {limit.value:.9f} by more than {SLACK}")
    return report
