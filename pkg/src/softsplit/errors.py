"""Exception types shared across the simulator."""


class SoftSplitError(Exception):
    """Base class for all package errors."""


class ConfigError(SoftSplitError):
    """Invalid or inconsistent configuration values."""


class SchemaError(ConfigError):
    """Structured input (config file, cost table) violates its schema."""


class TopologyError(SoftSplitError):
    """Reference to an unknown AP/EC or an inconsistent topology."""


class ProtocolError(SoftSplitError):
    """Turn-based environment called out of order."""


class ActionError(SoftSplitError):
    """Action outside the valid set for the acting agent."""


class InactiveUserError(SoftSplitError):
    """Delay requested for a user that is not being served this step."""


class TrainingError(SoftSplitError):
    """Optimization diverged (non-finite loss or parameters)."""
