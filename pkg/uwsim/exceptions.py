"""Errors raised by the toolkit."""


class UwsimError(Exception):
    pass


class InvalidParameter(UwsimError, ValueError):
    """A coefficient, weight or option is outside its allowed range."""


class InvalidInput(UwsimError, ValueError):
    """Image or depth data cannot be processed."""


class ShapeMismatch(InvalidInput):
    pass


class ImageFormatError(UwsimError):
    """Bit depth or colour mode we do not know how to read."""


class ImageReadError(UwsimError, IOError):
    pass


class ImageWriteError(UwsimError, IOError):
    pass


class DescentFailure(UwsimError):
    """Gradient descent produced non-finite values.

    The loss trace up to the failure is kept in ``trace``.
    """

    def __init__(self, msg: str, trace: list):
        super(DescentFailure, self).__init__(msg)
        self.trace = trace
