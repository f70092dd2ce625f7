"""Exception types shared across the package."""


class FormatError(ValueError):
    """Input document violates its schema.

    ``lineno`` is set (1-based) when the problem can be tied to a line.
    """

    def __init__(self, message: str, lineno: int | None = None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno
