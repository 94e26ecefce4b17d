"""Exception types raised across the package."""


class DrocksError(Exception):
    """Base class for all package errors."""


class InvalidInput(DrocksError, ValueError):
    """An argument violates an operation's precondition."""


class InvalidConfig(DrocksError, ValueError):
    """A federation or experiment configuration is inconsistent."""


class ProtocolError(DrocksError, ValueError):
    """A wire message could not be decoded or is structurally invalid."""


class FormatError(DrocksError, ValueError):
    """A dataset file does not follow the UCR TSV layout."""


class UnsupportedDataset(DrocksError, ValueError):
    """The dataset is well formed but outside what the pipeline handles (NaNs, ragged lengths)."""


class UnsupportedTask(DrocksError, ValueError):
    """The method cannot handle the task, e.g. FROCKS on a multiclass problem."""
