"""Exception types shared by the library and the CLI exit-code mapping."""


class ConfigError(ValueError):
    """Contradictory or out-of-range configuration. CLI exit code 2."""


class DataError(ValueError):
    """Malformed, missing or insufficient input data. CLI exit code 3."""


class ConvergenceError(RuntimeError):
    """The dual solver stopped before reaching its KKT tolerance. CLI exit code 4."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations
