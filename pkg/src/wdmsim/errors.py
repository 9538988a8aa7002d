class WdmSimError(Exception):
    """Base class for all simulator errors."""


class ConfigError(WdmSimError, ValueError):
    """Invalid run configuration or workload description."""


class InvariantViolation(WdmSimError, RuntimeError):
    """A protocol or resource invariant was breached during a run."""
