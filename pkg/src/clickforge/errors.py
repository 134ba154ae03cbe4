"""Exception types shared across the toolkit."""


class ClickforgeError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ClickforgeError, ValueError):
    """Input violates a documented precondition or invariant."""


class SchemaError(ValidationError):
    """A serialized document does not match its schema.

    Carries the path of the offending field, e.g. ``instances[2].rle.counts``.
    """

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


class ConfigurationError(ClickforgeError, ValueError):
    """A configuration object is inconsistent or incomplete."""
