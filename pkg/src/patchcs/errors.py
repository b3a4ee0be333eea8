class PatchCSError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigurationError(PatchCSError, ValueError):
    """Inconsistent shapes, unknown kinds, or missing hyper-parameters."""

    exit_code = 2


class UsageError(PatchCSError, ValueError):
    """An operation was called with arguments that violate its preconditions."""

    exit_code = 2


class NumericalError(PatchCSError, ArithmeticError):
    """Training produced a non-finite loss."""

    exit_code = 3

    def __init__(self, message, batch_index=None, epoch=None):
        super().__init__(message)
        self.batch_index = batch_index
        self.epoch = epoch


class FormatError(PatchCSError, ValueError):
    """Malformed or truncated file. ``offset`` is the byte offset of the problem."""

    exit_code = 4

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
