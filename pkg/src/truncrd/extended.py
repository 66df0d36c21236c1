"""Nonnegative extended reals: finite floats plus a distinguished INFINITE tag.

Floating-point ``inf`` is deliberately not used for costs because ``0 * inf``
is NaN in IEEE arithmetic.  Here the product with zero is guarded to give 0
and addition saturates.
"""

from __future__ import annotations

import functools
import math
import numbers

__all__ = ["INFINITE", "Infinite", "ext_add", "ext_mul", "ext_sum", "is_infinite", "to_extended"]


@functools.total_ordering
class Infinite:
    """Singleton tag for +infinity in the nonnegative extended reals."""

    _instance: Infinite | None = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITE"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (Infinite, ())

    def __hash__(self):
        return hash("truncrd.INFINITE")

    def __eq__(self, other):
        return other is self

    def __lt__(self, other):
        if other is self or isinstance(other, numbers.Real):
            return False
        return NotImplemented

    def __float__(self):
        return math.inf

    def __add__(self, other):
        if other is self or isinstance(other, numbers.Real):
            return self
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, numbers.Real) and not isinstance(other, bool):
            return self
        if other is self:
            raise ArithmeticError("INFINITE - INFINITE is undefined")
        return NotImplemented

    def __rsub__(self, other):
        raise ArithmeticError("finite - INFINITE leaves the nonnegative extended reals")

    def __mul__(self, other):
        return ext_mul(self, other)

    __rmul__ = __mul__


INFINITE = Infinite()


def is_infinite(v) -> bool:
    return v is INFINITE


def to_extended(v):
    """Coerce float('inf') / the string 'inf' to INFINITE; validate finite values are >= 0."""
    if v is INFINITE:
        return v
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "infinite", "infinity"):
            return INFINITE
        v = float(s)
    v = float(v)
    if math.isnan(v):
        raise ValueError("NaN is not an extended real")
    if math.isinf(v):
        if v < 0:
            raise ValueError("negative infinity is not allowed")
        return INFINITE
    if v < 0:
        raise ValueError(f"extended reals here are nonnegative, got {v}")
    return v


def ext_add(a, b):
    if a is INFINITE or b is INFINITE:
        return INFINITE
    return a + b


def ext_mul(a, b):
    """Product with the convention 0 * INFINITE := 0."""
    if a is INFINITE or b is INFINITE:
        other = b if a is INFINITE else a
        if other is INFINITE:
            return INFINITE
        if other == 0:
            return 0.0
        if other < 0:
            raise ArithmeticError("negative times INFINITE is outside the nonnegative extended reals")
        return INFINITE
    return a * b


def ext_sum(values):
    total = 0.0
    for v in values:
        total = ext_add(total, v)
        if total is INFINITE:
            return INFINITE
    return total
