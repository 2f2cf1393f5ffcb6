class XbcfError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(XbcfError):
    """Invalid inputs: bad shapes, non-finite values, broken invariants."""


class ParseError(ValidationError):
    """Malformed input file content (bad cell, missing column, ...)."""
