"""Marginal-consistency and Markov-chain constraints, and distortion balls."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, LayoutMismatchError
from .extended import INFINITE
from .pmf import (
    AlphabetLayout,
    ExtendedDistortionVector,
    JointPmf,
    as_factors,
    cmi_array,
    expected_distortion,
    marginalize,
)

__all__ = [
    "EPS_MARG",
    "EPS_MARKOV",
    "EPS_MARKOV_ACCEPT",
    "EPS_D",
    "ConsistencySpec",
    "MarkovChainSpec",
    "ConstraintSystem",
    "DistortionBall",
    "MembershipVerdict",
    "BallVerdict",
    "SupportRestriction",
    "check_membership",
    "check_ball",
    "restrict_support",
]

EPS_MARG = 1e-9
EPS_MARKOV = 1e-9
EPS_MARKOV_ACCEPT = 1e-6
EPS_D = 1e-8


@dataclass(frozen=True, eq=False)
class ConsistencySpec:
    """Require the marginal of the joint pmf on ``factors`` to equal ``marginal``."""

    marginal: JointPmf

    @property
    def factors(self) -> tuple[str, ...]:
        return self.marginal.layout.factors


@dataclass(frozen=True)
class MarkovChainSpec:
    """The chain a - b - c, i.e. I(a; c | b) = 0."""

    a: tuple[str, ...]
    b: tuple[str, ...]
    c: tuple[str, ...]

    def __post_init__(self):
        a, b, c = as_factors(self.a), as_factors(self.b), as_factors(self.c)
        if not a or not c:
            raise ValueError("Markov chain ends must be nonempty")
        if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
            raise ValueError("Markov chain subsets must be pairwise disjoint")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @classmethod
    def parse(cls, text: str) -> MarkovChainSpec:
        """``"U - X - Y"`` or ``"X - U,Y - Xh"``."""
        parts = [s.strip() for s in text.split("-")]
        if len(parts) != 3:
            raise ValueError(f"Markov chain needs exactly three groups: {text!r}")
        return cls(*(as_factors(p) for p in parts))

    def factors(self) -> set[str]:
        return set(self.a) | set(self.b) | set(self.c)

    def residual(self, p: JointPmf) -> float:
        lay = p.layout
        return cmi_array(p.table, lay.axes(self.a), lay.axes(self.c), lay.axes(self.b))

    def __str__(self):
        return f"{','.join(self.a)} - {','.join(self.b) or '{}'} - {','.join(self.c)}"


@dataclass(frozen=True)
class ConstraintSystem:
    layout: AlphabetLayout
    consistency: tuple[ConsistencySpec, ...] = ()
    markov: tuple[MarkovChainSpec, ...] = ()
    eps_marg: float = EPS_MARG
    eps_markov: float = EPS_MARKOV

    def __post_init__(self):
        object.__setattr__(self, "consistency", tuple(self.consistency))
        object.__setattr__(self, "markov", tuple(self.markov))
        for c in self.consistency:
            self.layout.axes(c.factors)
        for m in self.markov:
            self.layout.axes(m.factors())


@dataclass(frozen=True)
class DistortionBall:
    d: ExtendedDistortionVector
    D: float

    def __post_init__(self):
        D = float(self.D)
        if not math.isfinite(D) or D < 0:
            raise ValueError("D must be a finite nonnegative real")
        object.__setattr__(self, "D", D)


@dataclass(frozen=True)
class MembershipVerdict:
    feasible: bool
    marginal_residuals: tuple[float, ...]
    markov_residuals: tuple[float, ...]

    @property
    def max_residual(self) -> float:
        return max(self.marginal_residuals + self.markov_residuals, default=0.0)


@dataclass(frozen=True)
class BallVerdict:
    feasible: bool
    slack: object  # float or INFINITE: <p,d> - D
    distortion: object


def check_membership(p: JointPmf, sys: ConstraintSystem, eps_markov: float | None = None,
                     eps_marg: float | None = None) -> MembershipVerdict:
    """Residuals are l-infinity marginal errors and Markov CMI values (bits)."""
    if p.layout != sys.layout:
        raise LayoutMismatchError(f"pmf layout {p.layout} != constraint layout {sys.layout}")
    eps_markov = sys.eps_markov if eps_markov is None else eps_markov
    eps_marg = sys.eps_marg if eps_marg is None else eps_marg
    marg = tuple(
        float(np.max(np.abs(marginalize(p, c.factors).mass - c.marginal.mass))) for c in sys.consistency
    )
    mk = tuple(m.residual(p) for m in sys.markov)
    ok = all(r <= eps_marg for r in marg) and all(r <= eps_markov for r in mk)
    return MembershipVerdict(ok, marg, mk)


def check_ball(p: JointPmf, ball: DistortionBall, tol: float = 0.0) -> BallVerdict:
    """Feasible iff <p, d> <= D + tol in the extended reals."""
    e = expected_distortion(p, ball.d)
    if e is INFINITE:
        return BallVerdict(False, INFINITE, INFINITE)
    return BallVerdict(e <= ball.D + tol, e - ball.D, e)


@dataclass(frozen=True, eq=False)
class SupportRestriction:
    layout: AlphabetLayout
    mask: np.ndarray = field(repr=False)
    finite_cost: np.ndarray = field(repr=False)

    @property
    def cells(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def masked_inner(self, p: JointPmf) -> float:
        return float(np.dot(p.mass[self.mask], self.finite_cost))

    def finite_vector(self) -> ExtendedDistortionVector:
        """The distortion with masked-out cells set to cost 0; use only with the mask enforced."""
        return ExtendedDistortionVector._raw(self.layout, np.where(self.mask, self.full_cost(), 0.0),
                                            np.zeros(self.layout.k, bool))

    def full_cost(self) -> np.ndarray:
        out = np.zeros(self.layout.k)
        out[self.mask] = self.finite_cost
        return out


def restrict_support(layout: AlphabetLayout, d_inf: ExtendedDistortionVector) -> SupportRestriction:
    """Cells with finite cost; any pmf of finite expected distortion lives on them."""
    if d_inf.layout != layout:
        raise LayoutMismatchError("distortion layout does not match")
    mask = ~d_inf.infinite
    if not mask.any():
        raise InfeasibleError("every cell has infinite cost; no pmf has finite distortion")
    mask = mask.copy()
    mask.setflags(write=False)
    fin = d_inf.finite[mask].copy()
    fin.setflags(write=False)
    return SupportRestriction(layout, mask, fin)
