__all__ = ['DomainError', 'DataError']


class DomainError(ValueError):
    """
    Exception raised when an argument lies outside the domain of an operation.

    Examples are a polynomial order below its lowest admissible value, a point
    outside the unit cube, mismatched dimensions, duplicated sample points or
    a transport solved for the wrong source measure.
    """
    pass


class DataError(ValueError):
    """
    Exception raised when input data cannot be parsed.

    Attributes
    ----------
    line : int | None
        1-based line number of the offending record, if known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
