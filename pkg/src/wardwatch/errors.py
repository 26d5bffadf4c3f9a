"""Exception hierarchy shared across the pipeline.

Exit-code mapping for the CLI lives in cli.py: validation/configuration
problems exit 2, corpus-level failures exit 3.
"""


class WardwatchError(Exception):
    """Base class for all pipeline errors."""


class ConfigurationError(WardwatchError):
    """A config value or pipeline wiring is invalid (bad date range, rate,
    mismatched manifest, mixed embedding dimensions, ...)."""


class InputValidationError(WardwatchError):
    """A single input fails its contract (unknown categorical level,
    dimension mismatch, dangling feedback reference, ...)."""


class CorpusError(WardwatchError):
    """The input file as a whole looks wrong (mostly malformed lines)."""


class TrainingError(WardwatchError):
    """Training cannot proceed (single-class training set, empty grid cell)."""


class SplitError(WardwatchError):
    """A chronological split cannot produce three non-empty partitions."""


class UndefinedMetricError(WardwatchError):
    """A metric has no defined value for the given inputs (single-class AUROC)."""
