"""
Errors raised by the reconstruction library.

Commands translate these into ``CommandError`` with a return code, see
``django_maxrigid.utils``.
"""


class RigidityError(Exception):
    """Base class for every library error."""


class ConfigurationError(RigidityError, ValueError):
    pass


class InvalidIntrinsics(RigidityError, ValueError):
    pass


class NotVisible(RigidityError):
    pass


class InvalidObservation(RigidityError, ValueError):
    pass


class InvalidLeg(RigidityError, ValueError):
    pass


class InvalidSequence(RigidityError, ValueError):
    pass


class InvalidNeighborCount(RigidityError, ValueError):
    pass


class DisconnectedPoint(RigidityError):
    pass


class EmptyProblem(RigidityError):
    pass


class NumericalError(RigidityError, ArithmeticError):
    pass


class SolutionRejected(RigidityError):
    pass


class ScaleUndefined(RigidityError):
    pass


class AlignmentDegenerate(RigidityError):
    pass


class NoOverlap(RigidityError):
    pass


class GenerationFailed(RigidityError):
    pass


class ParseError(RigidityError, ValueError):
    """
    A malformed sequence or problem file. ``location`` names the line or the
    field (for example ``frames[3]``) where reading stopped.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = '%s: %s' % (location, message)
        super(ParseError, self).__init__(message)


class UnsupportedVersion(ParseError):
    pass
