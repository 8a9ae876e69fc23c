class InputError(ValueError):
    """Arguments outside an operation's domain."""


class UnsupportedGraphError(InputError):
    """The requested computation is undefined or too large for this graph."""
