"""Exception types shared across the package."""


class TowerkitError(Exception):
    """Base class for all package errors."""


class UnsupportedBaseError(TowerkitError):
    pass


class ShapeError(TowerkitError):
    """Dimensions or weights of matrices and modules do not line up."""


class NotWellDefinedError(TowerkitError):
    """A matrix does not respect the relations of its source module."""


class DegreeError(TowerkitError):
    """An element or map is not homogeneous, or leaves a degree window."""


class BaseMismatchError(TowerkitError):
    pass


class UndeterminedError(TowerkitError):
    """A search ran past its horizon without reaching a verdict."""

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class DepthError(TowerkitError):
    """A window asks for more tower levels than were built."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class CertificateError(TowerkitError):
    pass


class ConnectivityError(TowerkitError):
    pass


class StructuralError(TowerkitError):
    """A level that should sit in a fibre sequence does not."""


class NonUnitalError(TowerkitError):
    pass


class InputError(TowerkitError):
    """Malformed input document."""
