"""Exception hierarchy shared by every treecp module."""


class TreeCPError(Exception):
    """Base class for all errors raised by treecp."""


class DomainError(TreeCPError, ValueError):
    """An argument lies outside the domain of the operation."""


class SizeError(TreeCPError, OverflowError):
    """A requested object would be too large to represent."""


class PreconditionError(TreeCPError, ValueError):
    """A documented precondition of an estimator does not hold."""


class DataError(TreeCPError, ValueError):
    """Sample data cannot support the requested statistic."""


class ConstructionError(TreeCPError, ValueError):
    """A kernel or parameter set violates a defining inequality."""


class ConfigError(TreeCPError, ValueError):
    """An experiment configuration failed to parse or validate.

    ``field`` names the offending key and ``rule`` the violated constraint,
    so the CLI can emit them as machine-readable JSON.
    """

    def __init__(self, message, field=None, rule=None):
        super().__init__(message)
        self.field = field
        self.rule = rule
