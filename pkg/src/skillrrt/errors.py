"""Exception types shared across the package."""


class SkillRRTError(Exception):
    """Base class for all package errors."""


class InvalidArgument(SkillRRTError, ValueError):
    """Raised when an operation receives malformed or non-finite inputs."""


class ConfigError(SkillRRTError):
    """Raised on malformed configuration files or unresolvable references."""


class NoPreContactError(SkillRRTError):
    """Raised when a prehensile skill has no common feasible grasp."""
