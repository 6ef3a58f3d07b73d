"""Exception types shared across the package."""


class AmTransferError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(AmTransferError):
    """A CSV file does not match the expected column schema."""


class ParseError(AmTransferError):
    """A CSV cell could not be parsed; the message names the row."""


class EmptyDatasetError(AmTransferError):
    """A dataset with no samples where at least one is required."""


class DegenerateFeatureError(AmTransferError):
    """A feature has no spread, so the requested scaling is undefined."""


class SizeError(AmTransferError):
    """Requested sample counts exceed what a dataset can provide."""


class ConfigError(AmTransferError):
    """Invalid or contradictory run configuration."""


class DivergenceError(AmTransferError):
    """Training produced a non-finite loss."""
