"""Exception hierarchy shared across the package."""


class HiervarError(Exception):
    """Base class for every error raised by this package."""


class DatasetError(HiervarError, ValueError):
    """Malformed or unusable dataset input."""


class DatasetFormatError(DatasetError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyDatasetError(DatasetError):
    pass


class LabelError(DatasetError):
    pass


class ConfigurationError(HiervarError, ValueError):
    pass


class LengthError(HiervarError, ValueError):
    """Series length incompatible with the kernel bank."""


class ModeError(HiervarError, ValueError):
    pass


class StateError(HiervarError, RuntimeError):
    """Operation called on an object that is not fitted yet."""


class ShapeError(HiervarError, ValueError):
    pass


class DegenerateLabelsError(HiervarError, ValueError):
    pass
