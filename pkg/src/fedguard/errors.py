"""Exception types shared across the package."""


class FedGuardError(Exception):
    """Base class for every package-specific error."""


class ParameterError(FedGuardError, ValueError):
    """An argument violates an operation's preconditions."""


class ShapeError(FedGuardError, ValueError):
    """Vector or matrix dimensions do not line up."""


class IngestionError(FedGuardError, ValueError):
    """A CSV file could not be turned into a dataset."""


class ContractError(FedGuardError, RuntimeError):
    """A cross-module invariant was violated by a caller."""


class NoParticipantsError(FedGuardError, RuntimeError):
    """Every client has been eliminated; training cannot continue."""


class ConfigError(FedGuardError, ValueError):
    """Malformed experiment configuration; the message names the field path."""
