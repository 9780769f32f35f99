"""Exception types shared across the package."""


class ContractError(ValueError):
    """An operation was called in a way that violates its contract."""


class NumericError(ArithmeticError):
    """A numeric-domain failure (non-finite inputs, divergence)."""


class ConfigError(ValueError):
    """Invalid or infeasible configuration."""


class CorpusError(ValueError):
    """Unreadable or malformed corpus data."""
