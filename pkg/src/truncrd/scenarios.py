"""Builders for sources, distortions and canonical problems."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .constraints import ConsistencySpec, ConstraintSystem, DistortionBall, MarkovChainSpec
from .errors import ConfigError
from .extended import INFINITE, to_extended
from .objective import MITerm, ObjectiveSpec
from .pmf import AlphabetLayout, ExtendedDistortionVector, JointPmf, marginalize
from .solvers.problem import ProblemSpec, SolverOptions
from .truncation import TruncationSchedule

__all__ = [
    "KINDS",
    "ScenarioConfig",
    "build_dsbs",
    "build_erasure_distortion",
    "build_hamming_distortion",
    "lift_distortion",
    "shannon_problem",
    "conditional_problem",
    "wyner_ziv_problem",
    "generic_problem",
    "build_problem",
]

KINDS = ("shannon", "conditional", "wyner-ziv", "generic")


def build_dsbs(p: float) -> JointPmf:
    """Doubly-symmetric binary source: uniform X, Y = X through a BSC(p)."""
    p = float(p)
    if not 0.0 <= p <= 0.5:
        raise ValueError("DSBS crossover must lie in [0, 1/2]")
    return JointPmf(AlphabetLayout.of(X=2, Y=2), [(1 - p) / 2, p / 2, p / 2, (1 - p) / 2])


def build_erasure_distortion(src_size: int) -> ExtendedDistortionVector:
    """0 on agreement, 1 on the erasure symbol (last index), INFINITE otherwise."""
    n = int(src_size)
    if n < 2:
        raise ValueError("src_size must be >= 2")
    table = [[0.0 if h == x else (1.0 if h == n else INFINITE) for h in range(n + 1)] for x in range(n)]
    return ExtendedDistortionVector(AlphabetLayout.of(X=n, Xh=n + 1), [v for row in table for v in row])


def build_hamming_distortion(n: int, n_hat: int | None = None) -> ExtendedDistortionVector:
    n_hat = n if n_hat is None else n_hat
    d = [[0.0 if h == x else 1.0 for h in range(n_hat)] for x in range(n)]
    return ExtendedDistortionVector(AlphabetLayout.of(X=n, Xh=n_hat), np.array(d).ravel())


def lift_distortion(d: ExtendedDistortionVector, layout: AlphabetLayout) -> ExtendedDistortionVector:
    """Broadcast a distortion over X x Xh (or X x Y x Xh) to ``layout``, constant in the other factors."""
    src = d.layout
    if not set(src.factors) <= set(layout.factors):
        raise ConfigError(f"distortion over {src} does not fit problem layout {layout}")
    for f in src.factors:
        if src.size(f) != layout.size(f):
            raise ConfigError(f"distortion size of {f} is {src.size(f)}, problem has {layout.size(f)}")
    if "U" in src.factors:
        raise ConfigError("distortion must not depend on U")
    shape = [layout.size(f) if f in src.factors else 1 for f in layout.factors]
    fin = np.broadcast_to(d.finite.reshape(shape), layout.shape).reshape(-1)
    inf = np.broadcast_to(d.infinite.reshape(shape), layout.shape).reshape(-1)
    return ExtendedDistortionVector._raw(layout, fin.copy(), inf.copy())


def _system(layout, marginal: JointPmf, chains=()):
    return ConstraintSystem(layout, (ConsistencySpec(marginal),), tuple(chains))


def shannon_problem(p_x: JointPmf, n_hat: int) -> ProblemSpec:
    lay = AlphabetLayout.of(X=p_x.layout.k, Xh=n_hat)
    return ProblemSpec(lay, ObjectiveSpec.single("X", "Xh"), _system(lay, p_x), kind="shannon")


def conditional_problem(p_xy: JointPmf, n_hat: int) -> ProblemSpec:
    nx, ny = p_xy.layout.shape
    lay = AlphabetLayout.of(X=nx, Y=ny, Xh=n_hat)
    return ProblemSpec(lay, ObjectiveSpec.single("X", "Xh", "Y"), _system(lay, p_xy), kind="conditional")


def wyner_ziv_problem(p_xy: JointPmf, n_hat: int, u_card: int | None = None) -> ProblemSpec:
    """I(X;U|Y) with U - X - Y and the decoder written as the chain X - (U,Y) - Xh."""
    nx, ny = p_xy.layout.shape
    u_card = nx + 1 if u_card is None else u_card
    lay = AlphabetLayout.of(X=nx, Y=ny, U=u_card, Xh=n_hat)
    chains = (MarkovChainSpec(("U",), ("X",), ("Y",)), MarkovChainSpec(("X",), ("U", "Y"), ("Xh",)))
    return ProblemSpec(lay, ObjectiveSpec.single("X", "U", "Y"), _system(lay, p_xy, chains), kind="wyner-ziv")


def generic_problem(p_xy: JointPmf, n_hat: int, u_card: int, objective: ObjectiveSpec,
                    chains=()) -> ProblemSpec:
    sizes = dict(zip(p_xy.layout.factors, p_xy.layout.shape))
    lay = AlphabetLayout.of(**sizes, U=u_card, Xh=n_hat)
    return ProblemSpec(lay, objective, _system(lay, p_xy, chains), kind="generic")


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Everything needed to build and run one scenario.

    ``source_table`` is p(x) (1-D) or p(x, y) (2-D); if given it overrides
    ``crossover``.  ``distortion_table`` rows are source symbols, columns
    reconstructions (or a 3-D x, y, xh table); entries may be INFINITE.
    """

    kind: str = "shannon"
    crossover: float | None = 0.25
    source_table: object = None
    distortion: str = "erasure"
    distortion_table: object = None
    n_hat: int | None = None
    u_card: int | None = None
    objective: tuple[MITerm, ...] = ()
    markov: tuple[MarkovChainSpec, ...] = ()
    D_grid: tuple[float, ...] = (0.25,)
    caps: tuple[float, ...] | None = None
    n_max: int = 10
    schedule: str = "geometric"
    step: float = 1.0
    tol: float | None = None
    oracle_resolution: int = 64
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"problem kind must be one of {KINDS}")
        if self.source_table is None:
            if self.crossover is None or not 0.0 <= float(self.crossover) <= 0.5:
                raise ConfigError("DSBS crossover must lie in [0, 1/2]")
        if not self.D_grid:
            raise ConfigError("D grid must not be empty")
        for D in self.D_grid:
            if not (math.isfinite(D) and D >= 0):
                raise ConfigError("D must be a finite nonnegative real")
        if self.caps is not None:
            if any(b <= a for a, b in zip(self.caps, self.caps[1:])):
                raise ConfigError("caps must be strictly increasing")
            if any(not (math.isfinite(c) and c > 0) for c in self.caps):
                raise ConfigError("caps must be finite positive reals")
        if self.schedule not in ("geometric", "arithmetic"):
            raise ConfigError("schedule must be geometric or arithmetic")
        if self.kind == "generic" and not self.objective:
            raise ConfigError("generic kind needs an explicit objective")
        if self.kind != "generic" and (self.objective or self.markov):
            warnings.warn(f"objective/markov entries are ignored for kind {self.kind}", stacklevel=2)
        if any(t.coefficient < 0 for t in self.objective):
            warnings.warn("objective has negative coefficients", stacklevel=2)

    def source(self) -> JointPmf:
        if self.source_table is None:
            return build_dsbs(self.crossover)
        t = np.asarray(self.source_table, float)
        if t.ndim == 1:
            return JointPmf(AlphabetLayout.of(X=len(t)), t)
        if t.ndim == 2:
            return JointPmf(AlphabetLayout.of(X=t.shape[0], Y=t.shape[1]), t.ravel())
        raise ConfigError("source table must be 1-D p(x) or 2-D p(x, y)")

    def base_distortion(self, nx: int, ny: int | None) -> ExtendedDistortionVector:
        if self.distortion == "erasure":
            return build_erasure_distortion(nx)
        if self.distortion == "hamming":
            return build_hamming_distortion(nx, self.n_hat)
        if self.distortion == "table":
            if self.distortion_table is None:
                raise ConfigError("distortion kind 'table' needs a table")
            t = np.asarray(self.distortion_table, dtype=object)
            if t.ndim == 2:
                lay = AlphabetLayout.of(X=t.shape[0], Xh=t.shape[1])
            elif t.ndim == 3:
                lay = AlphabetLayout.of(X=t.shape[0], Y=t.shape[1], Xh=t.shape[2])
            else:
                raise ConfigError("distortion table must be 2-D or 3-D")
            try:
                vals = [to_extended(v) for v in t.ravel()]
                return ExtendedDistortionVector(lay, vals)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        raise ConfigError(f"unknown distortion kind {self.distortion!r}")


def build_problem(cfg: ScenarioConfig) -> tuple[ProblemSpec, list[DistortionBall], TruncationSchedule]:
    """Problem, one limit ball per D in the grid, and the truncation schedule."""
    src = cfg.source()
    has_y = src.layout.has("Y")
    nx = src.layout.size("X")
    ny = src.layout.size("Y") if has_y else None
    d = cfg.base_distortion(nx, ny)
    if d.layout.size("X") != nx:
        raise ConfigError("distortion table rows must match the source alphabet")
    n_hat = d.layout.size("Xh")
    if d.layout.has("Y") and (not has_y or d.layout.size("Y") != ny):
        raise ConfigError("distortion depends on Y but the source has no matching Y")

    if cfg.kind == "shannon":
        if d.layout.has("Y"):
            raise ConfigError("shannon kind needs a distortion over X x Xh")
        problem = shannon_problem(marginalize(src, "X") if has_y else src, n_hat)
    else:
        if not has_y:
            raise ConfigError(f"{cfg.kind} kind requires side information Y in the source")
        if cfg.kind == "conditional":
            problem = conditional_problem(src, n_hat)
        elif cfg.kind == "wyner-ziv":
            problem = wyner_ziv_problem(src, n_hat, cfg.u_card)
        else:
            problem = generic_problem(src, n_hat, cfg.u_card or nx + 1, ObjectiveSpec(cfg.objective), cfg.markov)
    d_full = lift_distortion(d, problem.layout)
    balls = [DistortionBall(d_full, D) for D in cfg.D_grid]
    if cfg.caps is not None:
        schedule = TruncationSchedule(d_full, cfg.caps)
    elif cfg.schedule == "arithmetic":
        schedule = TruncationSchedule.arithmetic(d_full, cfg.n_max, cfg.step)
    else:
        schedule = TruncationSchedule.geometric(d_full, cfg.n_max)
    return problem, balls, schedule
