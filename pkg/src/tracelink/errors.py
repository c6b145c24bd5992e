"""Exception types surfaced to CLI and service callers."""


class TraceToolError(Exception):
    """Base class for all data and configuration errors in this package."""


class LoadError(TraceToolError):
    """A dataset, model, or matrix file is missing or unreadable."""


class ValidationError(TraceToolError):
    """Loaded data violates a structural invariant."""
