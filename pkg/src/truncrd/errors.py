class LayoutMismatchError(ValueError):
    """Two objects that must share an alphabet layout do not."""


class InfeasibleError(Exception):
    """The constraint set is empty (or provably so at the requested resolution)."""


class NumericalViolationError(Exception):
    """A computed value contradicts an inequality that must hold (solver suboptimality)."""


class ConfigError(ValueError):
    """Invalid scenario configuration."""
