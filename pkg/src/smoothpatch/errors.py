"""Exception hierarchy shared by all modules."""


class SmoothPatchError(Exception):
    """Base class for library errors."""


class InvalidArgumentError(SmoothPatchError, ValueError):
    pass


class DegenerateGeometryError(SmoothPatchError):
    pass


class UnsupportedTopologyError(SmoothPatchError):
    pass


class ApproximationFailureError(SmoothPatchError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InconsistentTraceError(SmoothPatchError):
    pass


class SingularSystemError(SmoothPatchError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class AssemblyError(SmoothPatchError):
    pass


class UndefinedNormError(SmoothPatchError):
    pass
