"""Exception types shared across the package."""


class BiorecError(Exception):
    """Base class for all package errors."""


class ConfigError(BiorecError):
    """Invalid experiment configuration (CLI exit code 1)."""


class DatasetError(BiorecError):
    """Unreadable or malformed dataset (CLI exit code 2)."""


class TrainingDivergedError(BiorecError):
    """Training produced a non-finite loss and could not recover (exit code 3)."""


class BundleError(BiorecError):
    """Corrupt, truncated, or incompatible model bundle."""
