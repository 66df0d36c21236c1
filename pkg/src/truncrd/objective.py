"""Objectives that are finite linear combinations of conditional mutual informations."""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass

import numpy as np

from .pmf import AlphabetLayout, JointPmf, as_factors, cmi_array, cmi_gradient

__all__ = ["MITerm", "ObjectiveSpec", "evaluate", "parse_term"]


@dataclass(frozen=True)
class MITerm:
    """coefficient * I(a; b | c)."""

    coefficient: float
    a: tuple[str, ...]
    b: tuple[str, ...]
    c: tuple[str, ...] = ()

    def __post_init__(self):
        a, b, c = as_factors(self.a), as_factors(self.b), as_factors(self.c)
        if not a or not b:
            raise ValueError("MI term needs nonempty a and b")
        if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
            raise ValueError(f"MI term sets must be pairwise disjoint: {a}, {b}, {c}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    def factors(self) -> set[str]:
        return set(self.a) | set(self.b) | set(self.c)

    def __str__(self):
        cond = f"|{','.join(self.c)}" if self.c else ""
        return f"{self.coefficient:g}*I({','.join(self.a)};{','.join(self.b)}{cond})"


_TERM_RE = re.compile(r"^\s*([-+]?[0-9.eE+-]+)?\s*\*?\s*I?\(?\s*([^;|()]+);([^;|()]+)(?:\|([^;|()]*))?\)?\s*$")


def parse_term(text: str) -> MITerm:
    """Parse ``"1.0 X;U|Y"`` or ``"2*I(X;Xh|Y,U)"`` into an MITerm."""
    m = _TERM_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse MI term {text!r}")
    coef = float(m.group(1)) if m.group(1) else 1.0
    return MITerm(coef, as_factors(m.group(2)), as_factors(m.group(3)), as_factors(m.group(4) or ""))


@dataclass(frozen=True)
class ObjectiveSpec:
    terms: tuple[MITerm, ...]

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("objective needs at least one term")
        object.__setattr__(self, "terms", terms)
        if any(t.coefficient < 0 for t in terms):
            warnings.warn("objective has negative coefficients; the usual rate expressions are nonnegative combinations",
                          stacklevel=2)

    @classmethod
    def single(cls, a, b, c=()) -> ObjectiveSpec:
        return cls((MITerm(1.0, a, b, c),))

    def factors(self) -> set[str]:
        return set().union(*(t.factors() for t in self.terms))

    def check_layout(self, layout: AlphabetLayout):
        for t in self.terms:
            layout.axes(t.factors())

    def __add__(self, other: ObjectiveSpec) -> ObjectiveSpec:
        return ObjectiveSpec(self.terms + other.terms)

    def __str__(self):
        return " + ".join(str(t) for t in self.terms)


def _term_axes(layout, t: MITerm):
    return layout.axes(t.a), layout.axes(t.b), layout.axes(t.c)


def evaluate(obj: ObjectiveSpec, p: JointPmf) -> float:
    """Sum of coefficient * I(a;b|c) on ``p``, in bits."""
    obj.check_layout(p.layout)
    return float(sum(t.coefficient * cmi_array(p.table, *_term_axes(p.layout, t)) for t in obj.terms))


def evaluate_batch(obj: ObjectiveSpec, layout: AlphabetLayout, tables: np.ndarray) -> np.ndarray:
    """Objective over a batch of tables shaped ``(N, *layout.shape)``."""
    out = np.zeros(tables.shape[0])
    for t in obj.terms:
        out += t.coefficient * cmi_array(tables, *_term_axes(layout, t), batch=True)
    return out


def value_and_grad(obj: ObjectiveSpec, layout: AlphabetLayout, table: np.ndarray,
                   floor: float = 1e-300) -> tuple[float, np.ndarray]:
    """Objective value and its gradient with respect to each cell."""
    val = 0.0
    grad = np.zeros(layout.shape)
    for t in obj.terms:
        v, g = cmi_gradient(table, *_term_axes(layout, t), floor=floor)
        val += t.coefficient * v
        grad += t.coefficient * g
    return val, grad
