"""Exception hierarchy shared by all modules."""


class FFPATError(Exception):
    """Base class for errors raised by ffpat."""


class ConfigError(FFPATError, ValueError):
    """Invalid configuration or parameter values."""


class ShapeError(FFPATError, ValueError):
    """Array or operator shapes do not match the declared spaces."""


class DivergenceError(FFPATError, FloatingPointError):
    """A time stepper or iterative solver produced non-finite values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NumericalError(FFPATError, RuntimeError):
    """An inner linear solve failed or broke down."""


class VerificationError(FFPATError, AssertionError):
    """A verification suite check did not meet its tolerance."""
