"""Exception types shared across the package."""


class LhblError(Exception):
    """Base class for all package errors."""


class MalformedStateError(LhblError, ValueError):
    pass


class ConfigError(LhblError, ValueError):
    """Invalid configuration, dimension mismatch or unsupported combination."""


class CheckpointFormatError(LhblError):
    pass


class DomainMismatchError(LhblError):
    pass


class InvalidStateError(LhblError, RuntimeError):
    """Operation called on an object in the wrong state (e.g. path of an unsolved run)."""


class DeadEndError(LhblError, RuntimeError):
    pass


class TrainingDivergedError(LhblError, RuntimeError):
    pass


class OracleTooLargeError(LhblError):
    def __init__(self, estimate, cap):
        super().__init__(f"state space estimate {estimate:.3g} exceeds oracle cap {cap:.3g}")
        self.estimate = estimate
        self.cap = cap
