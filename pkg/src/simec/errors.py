"""Exception hierarchy shared by all modules."""


class SimecError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(SimecError, ValueError):
    """Invalid configuration, arguments or model file."""


class InputShapeError(SimecError, ValueError):
    """Array dimensions do not chain with the model or metric."""


class NumericalError(SimecError, ArithmeticError):
    """A numerical routine failed (non-convergence, non-finite values)."""


class DegenerateMetricError(NumericalError):
    """The requested eigenspace of a metric is empty.

    ``step`` carries the trace step at which it happened, when known.
    """

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class TrainingDivergedError(NumericalError):
    def __init__(self, epoch):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch
