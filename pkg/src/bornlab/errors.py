"""Exception types shared across the library and mapped to CLI exit codes."""


class BornlabError(Exception):
    """Base class for all library errors."""


class ConfigError(BornlabError):
    """Invalid or inconsistent configuration (CLI exit code 1)."""


class BudgetExceededError(BornlabError):
    """A compute or memory guard was hit (CLI exit code 2)."""


class NumericError(BornlabError):
    """A numeric failure such as a NaN loss (CLI exit code 3)."""
