"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid argument values (non-finite positions, bad shapes, ...)."""


class ConfigError(InputError):
    """Malformed or inconsistent scenario configuration."""


class DegenerateInputError(InputError):
    """Inputs for which the requested construction does not exist."""


class ContractError(InputError):
    """A closed-form result was requested outside its regime of validity."""


class ResourceLimitError(RuntimeError):
    """Problem size exceeds a configured engine cap."""


class NotPositiveSemidefiniteError(ValueError):
    """A matrix that must be PSD has an eigenvalue below tolerance."""


class IntegrationDivergedError(RuntimeError):
    """State invariants were violated mid-integration; reduce dt."""


class SamplingGridError(ValueError):
    """A required time point is missing from the sampled series."""


class UndefinedWidthError(ValueError):
    """Packet width is undefined for the given profile."""


class StepExtractionError(RuntimeError):
    """No transfer-quality step could be located in a sweep curve."""
