"""Exception hierarchy; ``exit_code`` is what the CLI returns."""


class StochPowerError(Exception):
    exit_code = 1


class ConfigError(StochPowerError, ValueError):
    exit_code = 2


class MatrixFileError(ConfigError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class AsymmetricMatrixError(MatrixFileError):
    pass


class DimensionError(StochPowerError, ValueError):
    """Vector/matrix dimensions do not match, or a problem is too large."""


class PopulationControlError(StochPowerError):
    """The walker population left the range the controller can handle."""

    exit_code = 3


class PopulationCollapse(PopulationControlError):
    """Every walker died."""


class PopulationExplosion(PopulationControlError):
    """The population passed its safety cap."""


class NonConvergence(StochPowerError):
    exit_code = 4

    def __init__(self, message: str, residual: float | None = None, iterations: int | None = None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class DegenerateIterate(StochPowerError):
    """The iterate became the zero vector (possible with Bernoulli compression)."""

    exit_code = 5


class UndefinedEstimator(StochPowerError, ArithmeticError):
    """An estimator's denominator vanished or its precondition failed."""

    exit_code = 5
