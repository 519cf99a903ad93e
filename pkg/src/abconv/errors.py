"""Exception types raised across the package."""


class ABConvError(Exception):
    """Base class for domain errors (CLI maps these to exit code 3)."""


class NonDivisibleGroup(ABConvError, ValueError):
    pass


class ShapeMismatch(ABConvError, ValueError):
    pass


class NoStaircase(ABConvError):
    pass


class UnknownLabel(ABConvError, KeyError):
    pass


class ParseError(ValueError):
    """Malformed model, profile or CSV input. Carries a location hint."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class DuplicateLayerName(ParseError):
    pass
