"""Exception types raised across the package."""


class TopoWamError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(TopoWamError, ValueError):
    pass


# geometry
class DegenerateSegment(TopoWamError, ValueError):
    pass


class IntersectingSegments(TopoWamError, ValueError):
    def __init__(self, msg, indices=None):
        super().__init__(msg)
        self.indices = indices


class TooFewPoints(TopoWamError, ValueError):
    pass


class TooManyPoints(TopoWamError, ValueError):
    pass


class DegenerateInput(TopoWamError, ValueError):
    pass


class IsolatedVertex(TopoWamError, ValueError):
    pass


class CoincidentPoints(TopoWamError, ValueError):
    pass


class SegmentsTooClose(TopoWamError, ValueError):
    pass


# bodies
class JointLimitViolation(TopoWamError, ValueError):
    def __init__(self, indices):
        super().__init__(f"joint(s) outside limits: {list(indices)}")
        self.indices = list(indices)


class InvalidDimensions(TopoWamError, ValueError):
    pass


# environment / learning
class NonFiniteAction(TopoWamError, ValueError):
    pass


class NonFiniteParams(TopoWamError, ValueError):
    pass


class NonPositiveStd(TopoWamError, ValueError):
    pass


class NonFiniteGradient(TopoWamError, FloatingPointError):
    def __init__(self, name):
        super().__init__(f"non-finite gradient in parameter {name!r}")
        self.name = name


# harness
class ConfigError(TopoWamError, ValueError):
    pass


class CheckpointMismatch(TopoWamError, ValueError):
    pass
