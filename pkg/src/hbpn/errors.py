class ConfigError(ValueError):
    """Bad configuration key or value."""


class DataError(RuntimeError):
    """Missing, empty or unreadable dataset."""


class TrainingAborted(FloatingPointError):
    """Training hit a non-finite loss; the last good checkpoint is kept."""
