"""Exception hierarchy shared by every streamloop module."""


class StreamloopError(Exception):
    """Base class for all errors raised by streamloop."""


class ParameterError(StreamloopError, ValueError):
    """An operator or experiment was configured with an invalid parameter."""


class ShapeError(StreamloopError, ValueError):
    """Rows, states or composed transforms disagree on shape."""


class EmptyInputError(StreamloopError, ValueError):
    pass


class OrderingError(StreamloopError, ValueError):
    """Timestamps are unsorted, or local timestamps repeat."""


class ConsistencyError(StreamloopError, ValueError):
    """A schedule does not match the data it is executed against."""


class NumericError(StreamloopError, ArithmeticError):
    pass


class CodeRangeError(StreamloopError, IndexError):
    """A label code falls outside its vocabulary."""


class ResourceError(StreamloopError, MemoryError):
    pass
