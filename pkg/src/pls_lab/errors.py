"""Exception types shared across the package."""


class PlsLabError(Exception):
    """Base class for all package-specific errors."""


class DivergenceError(PlsLabError):
    """A value that must stay finite became NaN/Inf (or blew past the loss cap).

    ``step`` is the 1-based iteration at which the explosion was detected,
    when known.
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class SingularSystemError(PlsLabError):
    """A linear solve hit an (anti-)resonance and has no unique solution."""


class ConsistencyError(PlsLabError):
    """Two routes that must agree (certificate vs. eigenvalues) disagreed."""


class IdxFormatError(PlsLabError):
    """Malformed IDX file. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ConfigError(PlsLabError):
    """Invalid experiment configuration. ``field`` is the offending key path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
