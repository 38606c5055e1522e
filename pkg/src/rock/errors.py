"""Exception hierarchy with machine-parsable error categories.

Every error raised by this package derives from :class:`RockError` and
carries a stable ``category`` token.  The service layer reports the category
in HTTP error bodies and the command-line client prints it as a one-line
``error category=<token>`` message, so downstream tooling can branch on it
without parsing prose.
"""


class RockError(Exception):
    """Base class for all package errors."""

    category = "internal"


class ConfigError(RockError):
    """Invalid configuration, hyperparameter, or schema violation."""

    category = "schema"


class DataError(RockError):
    """Malformed or inconsistent input data (bad CSV, short trajectory, ...)."""

    category = "data"


class ShapeError(RockError):
    """Array dimension mismatch between operands."""

    category = "shape"


class StorageError(RockError):
    """Missing file, unreadable container, or other I/O problem."""

    category = "io"


class NumericalError(RockError):
    """A linear solve failed even after jitter escalation."""

    category = "numerical"

    def __init__(self, message, jitters=()):
        super().__init__(message)
        self.jitters = tuple(jitters)


class DivergenceError(RockError):
    """A forecast or generator blew up (NaN/overflow in the state)."""

    category = "divergence"

    def __init__(self, message, when=None):
        super().__init__(message)
        #: time (ODE) or step index (PDE) at which the blow-up was detected
        self.when = when


class SearchError(RockError):
    """Hyperparameter search failed for every configuration."""

    category = "search-failure"

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)
