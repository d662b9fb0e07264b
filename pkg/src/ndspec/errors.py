"""Exception types shared by the factorization modules."""


class NDSpecError(Exception):
    """Base class; numeric failures map to CLI exit code 3."""

    report = None


class AliasError(NDSpecError, ValueError):
    """Coefficient support or truncation order does not fit the grid."""


class NotPositive(NDSpecError, ValueError):
    """A scalar density has a non-positive sample."""

    def __init__(self, point, value):
        self.point = tuple(int(i) for i in point)
        self.value = float(value)
        super().__init__(f"density is not positive at grid point {self.point} (value {self.value:g})")


class NotPositiveDefinite(NDSpecError, ValueError):
    def __init__(self, point):
        self.point = tuple(int(i) for i in point)
        super().__init__(f"matrix is not positive definite at grid point {self.point}")


class SliceSingular(NDSpecError, ArithmeticError):
    def __init__(self, slice_index, stage, detail=""):
        self.slice_index = tuple(int(i) for i in slice_index)
        self.stage = stage
        msg = f"unitary construction singular on slice {self.slice_index} (stage m={stage})"
        super().__init__(msg + (f": {detail}" if detail else ""))


class HatSingular(NDSpecError, ArithmeticError):
    def __init__(self, point, stage):
        self.point = tuple(int(i) for i in point)
        self.stage = stage
        super().__init__(f"value at origin is singular at reduced grid point {self.point} (stage l={stage})")


class OriginSingular(NDSpecError, ArithmeticError):
    pass


class ParseError(NDSpecError, ValueError):
    pass


class SymmetryError(NDSpecError, ValueError):
    pass


class TruncationWarning(UserWarning):
    """Box-truncated causality sums still carry energy at the box boundary."""
