"""Exception types raised across weylbox."""


class WeylboxError(Exception):
    """Base class for all library errors."""


class NumericalError(WeylboxError):
    """A numerical procedure could not produce a trustworthy answer."""


# fieldlab
class DivergenceTooLarge(WeylboxError, ValueError):
    def __init__(self, value: float, tol: float):
        super().__init__(f"relative divergence {value:.3e} exceeds tolerance {tol:.1e}")
        self.value = value
        self.tol = tol


class CubeOutsideGrid(WeylboxError, ValueError):
    def __init__(self, index: int):
        super().__init__(f"cube {index} lies outside the field grid")
        self.index = index


class NotPiecewiseConstant(WeylboxError, ValueError):
    pass


class GridMismatch(WeylboxError, ValueError):
    pass


# weylcoeff
class NegativeGamma(WeylboxError, ValueError):
    pass


class NegativeB(WeylboxError, ValueError):
    pass


class GammaZero(WeylboxError, ValueError):
    pass


# effectivefield
class InvalidExponent(WeylboxError, ValueError):
    pass


class NonpositiveLambda(WeylboxError, ValueError):
    pass


# magop
class GridTooSmall(WeylboxError, ValueError):
    pass


class NonIntegerFlux(WeylboxError, ValueError):
    def __init__(self, defect: float):
        super().__init__(f"mu*Phi/hbar is {defect:.3e} away from an integer")
        self.defect = defect


# speccount
class DimensionTooLarge(WeylboxError, ValueError):
    pass


class ShiftTooCloseToEigenvalue(NumericalError):
    def __init__(self, tau: float, suggested: float):
        super().__init__(
            f"shift {tau!r} sits on an eigenvalue; perturb it by about {suggested:.3e}"
        )
        self.tau = tau
        self.suggested = suggested


class NoConvergence(NumericalError):
    def __init__(self, iterations: int, message: str = ""):
        super().__init__(message or f"no convergence after {iterations} iterations")
        self.iterations = iterations


class LambdaOutOfRange(WeylboxError, ValueError):
    pass


# reference
class NonpositiveField(WeylboxError, ValueError):
    pass


# tessellate
class RTooLarge(WeylboxError, ValueError):
    pass


class GridTooCoarseForMargin(WeylboxError, ValueError):
    pass


# semicli
class ConfigError(WeylboxError):
    pass


class ParseError(ConfigError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.column = column
        self.message = message


class ValidationError(ConfigError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class EmptySweep(WeylboxError, ValueError):
    pass
