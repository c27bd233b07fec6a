"""Exception types raised across the package."""


class LyapboundError(Exception):
    """Base class for all package errors."""


class NotML(LyapboundError, ValueError):
    """A matrix has a negative off-diagonal entry."""

    def __init__(self, i, j, value):
        self.i, self.j, self.value = i, j, value
        super().__init__(f"negative off-diagonal entry a[{i}][{j}] = {value!r}")


class MatrixFormatError(LyapboundError, ValueError):
    pass


class NoConvergence(LyapboundError, RuntimeError):
    def __init__(self, max_iter):
        self.max_iter = max_iter
        super().__init__(f"no convergence within {max_iter} iterations")


class BadRange(LyapboundError, ValueError):
    pass


class DimensionError(LyapboundError, ValueError):
    pass


class DimensionMismatch(LyapboundError, ValueError):
    pass


class ReducibleChain(LyapboundError, ValueError):
    pass


class InvalidGenerator(LyapboundError, ValueError):
    pass


class AbsorbingMode(UserWarning):
    """Emitted when a simulated chain reaches a mode it can never leave."""

    def __init__(self, mode):
        self.mode = mode
        super().__init__(f"mode {mode} is absorbing; path is constant from here on")


class StepTooLarge(LyapboundError, ValueError):
    pass


class NonPositiveSpectralRadius(LyapboundError, ArithmeticError):
    pass


class ConfigError(LyapboundError, ValueError):
    """Invalid experiment config; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
