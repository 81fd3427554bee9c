"""Exception hierarchy shared by every module.

Each concrete class carries an ``exit_code`` so the command-line front end can
map failures to distinct process exit statuses.
"""


class ClutterError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DomainError(ClutterError, ValueError):
    """Input outside the support of a distribution or operation."""

    exit_code = 3


class DegenerateDataError(ClutterError, ValueError):
    """Samples carry no spread, so the estimator has no finite solution."""

    exit_code = 4


class ConvergenceError(ClutterError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance.

    Parameters
    ----------
    message : str
        Human readable description.
    last_iterate : float, optional
        Value of the unknown when the solver gave up.
    iterations : int, optional
        Number of iterations performed.
    """

    exit_code = 5

    def __init__(self, message, last_iterate=None, iterations=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


class DivergenceError(ConvergenceError):
    """The likelihood has no finite maximiser (e.g. identical samples)."""

    exit_code = 6


class FormatError(ClutterError, ValueError):
    """A file does not follow the expected layout."""

    exit_code = 7


class LengthError(FormatError):
    """A file payload is shorter than its header promises."""

    exit_code = 8


class DataError(ClutterError, ValueError):
    """Decoded data violates a physical constraint (e.g. negative magnitude)."""

    exit_code = 9


class UnsupportedModelError(ClutterError, ValueError):
    """The requested clutter family has no closed-form CFAR threshold."""

    exit_code = 10


class BorderError(ClutterError, ValueError):
    """A CFAR window does not fit inside the image."""

    exit_code = 11


class ConfigError(ClutterError, ValueError):
    """Invalid detector or run configuration."""

    exit_code = 12
