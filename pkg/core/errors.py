"""
Exception hierarchy for the arena.

Validation conflicts are returned as values (see core.batch_validation);
these exceptions cover everything that should stop the current operation.
"""


class ArenaError(Exception):
    """Base class for all arena errors."""


class GenerationInfeasibleError(ArenaError):
    """Scenario constraints could not be met within the resample budget."""


class LabelBankError(ArenaError):
    """The label bank is missing a requested tier or is empty."""


class TraceSchemaError(ArenaError):
    """An event or trace file does not match the trace schema."""


class TraceParseError(ArenaError):
    """A trace file could not be parsed as JSON."""

    def __init__(self, path: str, byte_offset: int, reason: str):
        self.path = path
        self.byte_offset = byte_offset
        super().__init__(f"Cannot parse trace {path} at byte {byte_offset}: {reason}")


class ConfigError(ArenaError):
    """Suite, lineup or engine configuration is invalid."""


class ReportError(ArenaError):
    """Metric computation is missing required inputs (e.g. oracle statistics)."""


class InvalidBatchError(ArenaError):
    """apply_batch was called with a batch that does not validate."""
