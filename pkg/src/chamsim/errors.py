"""Exception types shared across the simulator."""


class ChamsimError(Exception):
    """Base class for all simulator-specific errors."""


class InvalidConfigError(ChamsimError, ValueError):
    """A cache or experiment configuration violates one of its constraints."""


class InternalConsistencyError(ChamsimError, RuntimeError):
    """The simulator detected a broken internal invariant (e.g. duplicate tag)."""


class EstimatorPrecisionError(ChamsimError, ValueError):
    """A statistical estimator was invoked with too few samples."""


class TraceParseError(ChamsimError, ValueError):
    """A trace file could not be parsed; carries the offending line number."""

    def __init__(self, path, lineno, reason):
        super().__init__(f"{path}:{lineno}: {reason}")
        self.path = path
        self.lineno = lineno
