"""Exception types shared across the package."""


class ConfigError(ValueError):
    """An invalid configuration value; ``field`` names the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ProfileFormatError(ValueError):
    """A profile file that cannot be parsed.

    ``offset`` is a byte offset (binary files) or character offset (JSON);
    JSON errors also carry ``line`` and ``column``.
    """

    def __init__(self, message, line=None, column=None, offset=None):
        self.line, self.column, self.offset = line, column, offset
        where = []
        if line is not None:
            where.append(f"line {line} column {column}")
        if offset is not None:
            where.append(f"offset {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ProfileValidationError(ValueError):
    """A parsed profile that violates a mobility invariant."""


class UsageError(ValueError):
    """An operation called outside its precondition (e.g. mismatched rounds)."""
