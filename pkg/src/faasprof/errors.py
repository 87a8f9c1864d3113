"""Exception hierarchy shared across the toolchain."""


class FaasprofError(Exception):
    """Base class for all toolchain errors."""


class ConfigurationError(FaasprofError):
    """Invalid workflow/resource/campaign configuration.

    Carries the full list of problems so callers can report them all at once.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class CapacityError(ConfigurationError):
    """Requested parallelism exceeds what the assigned resource provides."""


class SimulationError(FaasprofError):
    """Simulator misuse (missing law, bad measurement window, ...)."""


class DatasetError(FaasprofError):
    """Dataset loading or transformation failure."""


class ModelError(FaasprofError):
    """Regressor fitting or prediction failure."""


class PersistenceError(FaasprofError):
    """Model file cannot be read back (version or checksum mismatch)."""
