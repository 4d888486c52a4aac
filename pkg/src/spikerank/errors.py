"""Exception types shared across the package."""


class ParseError(ValueError):
    """Malformed event CSV input; ``line`` is the 1-based physical line."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DomainError(ValueError):
    """A parameter lies outside the range where the model is defined."""


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual, iterations):
        super().__init__(f"{message} (residual={residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations
