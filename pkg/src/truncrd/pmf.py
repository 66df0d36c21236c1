"""Joint pmfs over small product alphabets and their information measures.

Cells are stored densely in row-major order over the present factors, which
are always kept in the canonical order X, Y, U, Xh.  All information
quantities are in bits.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import LayoutMismatchError
from .extended import INFINITE, to_extended

__all__ = [
    "FACTORS",
    "EPS_PMF",
    "MAX_CELLS",
    "AlphabetLayout",
    "JointPmf",
    "ExtendedDistortionVector",
    "as_factors",
    "marginalize",
    "conditional_mutual_information",
    "expected_distortion",
    "cmi_array",
    "cmi_gradient",
]

FACTORS = ("X", "Y", "U", "Xh")
EPS_PMF = 1e-12
MAX_CELLS = 65536

_ALIASES = {"x": "X", "y": "Y", "u": "U", "xh": "Xh", "xhat": "Xh", "x̂": "Xh"}


def _canon(name: str) -> str:
    key = name.strip().lower()
    if key not in _ALIASES:
        raise ValueError(f"unknown factor {name!r}; expected one of {FACTORS}")
    return _ALIASES[key]


def as_factors(subset) -> tuple[str, ...]:
    """Normalize a factor subset to a canonical-order tuple of names.

    Accepts a single name, a comma/space separated string ("X,U"), or an
    iterable of names.  ``None`` and "" give the empty subset.
    """
    if subset is None:
        return ()
    if isinstance(subset, str):
        parts = [s for s in subset.replace(",", " ").split() if s]
    else:
        parts = list(subset)
    names = {_canon(p) for p in parts}
    return tuple(f for f in FACTORS if f in names)


@dataclass(frozen=True)
class AlphabetLayout:
    """Sizes of the present factors, in canonical order."""

    factors: tuple[str, ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        if len(self.factors) != len(self.shape) or not self.factors:
            raise ValueError("layout needs one size per factor and at least one factor")
        if tuple(f for f in FACTORS if f in self.factors) != self.factors:
            raise ValueError(f"factors must be distinct and in canonical order {FACTORS}")
        if any(int(s) < 1 for s in self.shape):
            raise ValueError("every factor size must be >= 1")
        if self.k > MAX_CELLS:
            raise ValueError(f"layout has {self.k} cells; the cap is {MAX_CELLS}")

    @classmethod
    def of(cls, **sizes: int) -> AlphabetLayout:
        """``AlphabetLayout.of(X=2, Xh=3)``; absent factors are simply omitted."""
        canon = {_canon(k): int(v) for k, v in sizes.items() if v is not None}
        factors = tuple(f for f in FACTORS if f in canon)
        return cls(factors, tuple(canon[f] for f in factors))

    @property
    def k(self) -> int:
        return int(np.prod(self.shape))

    def size(self, factor: str) -> int:
        return self.shape[self.factors.index(_canon(factor))]

    def has(self, factor: str) -> bool:
        return _canon(factor) in self.factors

    def axes(self, subset) -> tuple[int, ...]:
        names = as_factors(subset)
        missing = [n for n in names if n not in self.factors]
        if missing:
            raise LayoutMismatchError(f"factors {missing} not present in layout {self.factors}")
        return tuple(self.factors.index(n) for n in names)

    def sub(self, subset) -> AlphabetLayout:
        axes = self.axes(subset)
        return AlphabetLayout(tuple(self.factors[a] for a in axes), tuple(self.shape[a] for a in axes))

    def index(self, coord: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(coord), self.shape))

    def coord(self, index: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(index, self.shape))

    def __str__(self):
        return "x".join(f"{f}{s}" for f, s in zip(self.factors, self.shape))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class JointPmf:
    layout: AlphabetLayout
    mass: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float).reshape(-1)
        if m.size != self.layout.k:
            raise LayoutMismatchError(f"pmf has {m.size} entries, layout {self.layout} needs {self.layout.k}")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValueError("pmf entries must be finite and nonnegative")
        if abs(m.sum() - 1.0) > EPS_PMF:
            raise ValueError(f"pmf sums to {m.sum()!r}, not 1 within {EPS_PMF}")
        object.__setattr__(self, "mass", _frozen(m))

    @classmethod
    def from_table(cls, layout: AlphabetLayout, table, normalize: bool = False) -> JointPmf:
        m = np.asarray(table, dtype=float).reshape(-1)
        if normalize:
            m = np.clip(m, 0.0, None)
            m = m / m.sum()
        return cls(layout, m)

    @classmethod
    def uniform(cls, layout: AlphabetLayout) -> JointPmf:
        return cls(layout, np.full(layout.k, 1.0 / layout.k))

    @property
    def table(self) -> np.ndarray:
        return self.mass.reshape(self.layout.shape)

    def __eq__(self, other):
        if not isinstance(other, JointPmf):
            return NotImplemented
        return self.layout == other.layout and np.array_equal(self.mass, other.mass)

    __hash__ = None


class ExtendedDistortionVector:
    """Per-cell nonnegative cost, each finite or INFINITE.

    Stored as a finite-part array (0 at infinite cells) plus a boolean mask of
    infinite cells, so no IEEE infinities ever enter arithmetic.
    """

    __slots__ = ("layout", "finite", "infinite")

    def __init__(self, layout: AlphabetLayout, cost):
        vals = [to_extended(v) for v in np.asarray(cost, dtype=object).reshape(-1)]
        if len(vals) != layout.k:
            raise LayoutMismatchError(f"distortion has {len(vals)} entries, layout {layout} needs {layout.k}")
        inf = np.array([v is INFINITE for v in vals], dtype=bool)
        if inf.all():
            raise ValueError("at least one finite distortion entry required")
        fin = np.array([0.0 if v is INFINITE else v for v in vals], dtype=float)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "finite", _frozen(fin))
        inf.setflags(write=False)
        object.__setattr__(self, "infinite", inf)

    def __setattr__(self, name, value):
        raise AttributeError("ExtendedDistortionVector is immutable")

    @classmethod
    def _raw(cls, layout, finite, infinite) -> ExtendedDistortionVector:
        obj = object.__new__(cls)
        object.__setattr__(obj, "layout", layout)
        object.__setattr__(obj, "finite", _frozen(finite))
        inf = np.array(infinite, dtype=bool)
        inf.setflags(write=False)
        object.__setattr__(obj, "infinite", inf)
        return obj

    def __len__(self):
        return self.layout.k

    def __getitem__(self, i):
        return INFINITE if self.infinite[i] else float(self.finite[i])

    def to_list(self) -> list:
        return [self[i] for i in range(len(self))]

    @property
    def all_finite(self) -> bool:
        return not self.infinite.any()

    def as_float_array(self) -> np.ndarray:
        """Costs with IEEE inf at infinite cells; for display and comparisons only."""
        return np.where(self.infinite, np.inf, self.finite)

    def __le__(self, other: ExtendedDistortionVector) -> bool:
        """Componentwise order in the extended reals."""
        if self.layout != other.layout:
            raise LayoutMismatchError("distortion layouts differ")
        return bool(np.all(other.infinite | (~self.infinite & (self.finite <= other.finite))))

    def __eq__(self, other):
        if not isinstance(other, ExtendedDistortionVector):
            return NotImplemented
        return (
            self.layout == other.layout
            and np.array_equal(self.infinite, other.infinite)
            and np.array_equal(self.finite, other.finite)
        )

    __hash__ = None

    def __repr__(self):
        return f"ExtendedDistortionVector({self.layout}, {self.to_list()})"


def marginalize(p: JointPmf, keep) -> JointPmf:
    names = as_factors(keep)
    if not names:
        raise ValueError("keep must be a nonempty factor subset")
    axes = p.layout.axes(names)
    drop = tuple(i for i in range(len(p.layout.factors)) if i not in axes)
    t = p.table.sum(axis=drop) if drop else p.table
    m = t.reshape(-1)
    # renormalize away rounding so the output is a valid pmf
    return JointPmf(p.layout.sub(names), m / m.sum())


def _check_cmi_args(layout: AlphabetLayout, a, b, c):
    a, b, c = as_factors(a), as_factors(b), as_factors(c)
    if not a or not b:
        raise ValueError("a and b must be nonempty")
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise ValueError("a, b, c must be pairwise disjoint")
    return layout.axes(a), layout.axes(b), layout.axes(c)


def _marginal_tables(t: np.ndarray, a, b, c, offset: int):
    """Keepdims marginals p_abc, p_ac, p_bc, p_c of an array with ``offset`` batch axes."""
    nd = t.ndim
    sh = lambda axes: tuple(ax + offset for ax in axes)  # noqa: E731
    a, b, c = sh(a), sh(b), sh(c)
    rest = tuple(i for i in range(offset, nd) if i not in a + b + c)
    abc = t.sum(axis=rest, keepdims=True) if rest else t
    ac = abc.sum(axis=b, keepdims=True)
    bc = abc.sum(axis=a, keepdims=True)
    cc = ac.sum(axis=a, keepdims=True)
    return abc, ac, bc, cc


def cmi_array(t: np.ndarray, a_axes, b_axes, c_axes, batch: bool = False) -> np.ndarray | float:
    """I(A;B|C) in bits of a (possibly batched) table, by direct summation.

    With ``batch=True`` the leading axis indexes independent pmfs.
    """
    offset = 1 if batch else 0
    abc, ac, bc, cc = _marginal_tables(t, a_axes, b_axes, c_axes, offset)
    pos = abc > 0
    num = np.where(pos, abc * cc, 1.0)
    den = np.where(pos, ac * bc, 1.0)
    terms = np.where(pos, abc * np.log2(num / den), 0.0)
    red = tuple(range(offset, t.ndim))
    out = np.maximum(terms.sum(axis=red), 0.0)
    return out if batch else float(out)


_TINY = 1e-300


def cmi_gradient(t: np.ndarray, a_axes, b_axes, c_axes, floor: float = _TINY) -> tuple[float, np.ndarray]:
    """Value and gradient (w.r.t. every cell of ``t``) of I(A;B|C), bits.

    d I / d p(cell) = log2 p_abc + log2 p_c - log2 p_ac - log2 p_bc at the
    cell's projection; the +1 terms of the entropy derivatives cancel.
    """
    abc, ac, bc, cc = _marginal_tables(t, a_axes, b_axes, c_axes, 0)
    lg = lambda v: np.log2(np.maximum(v, floor))  # noqa: E731
    g = lg(abc) + lg(cc) - lg(ac) - lg(bc)
    pos = abc > 0
    val = float(np.where(pos, abc * g, 0.0).sum())
    return max(val, 0.0), np.broadcast_to(g, t.shape)


def conditional_mutual_information(p: JointPmf, a, b, c=()) -> float:
    """I(A;B|C) in bits; c may be empty, giving plain mutual information."""
    axes = _check_cmi_args(p.layout, a, b, c)
    return cmi_array(p.table, *axes)


def expected_distortion(p: JointPmf, d: ExtendedDistortionVector):
    """<p, d> with 0 * INFINITE := 0; INFINITE iff positive mass meets an infinite cell."""
    if p.layout != d.layout:
        raise LayoutMismatchError(f"pmf layout {p.layout} != distortion layout {d.layout}")
    if np.any(p.mass[d.infinite] > 0):
        return INFINITE
    return float(np.dot(p.mass, d.finite))
