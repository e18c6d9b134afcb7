"""Exception types shared across the package.

Every error raised by library code derives from SofError so callers can
catch the whole family at integration boundaries (hub job runner, CLI).
"""


class SofError(Exception):
    pass


class DegenerateLandmarks(SofError):
    """Landmark triple is collinear (or nearly so); no affine solve exists."""


class ShapeMismatch(SofError):
    pass


class NumericalUnderflow(SofError):
    """Pre-normalization vector too close to zero to normalize."""


class UnknownPerson(SofError):
    pass


class InsufficientIdentities(SofError):
    """Training data lacks the >=2 identities / >=2 chips-per-identity floor."""


class NonFiniteGradient(SofError):
    pass


class DegeneratePairs(SofError):
    """Verification pair set is missing one of the two classes."""


class Unattainable(SofError):
    """No swept threshold satisfies the requested false-accept target."""


class StaleSnapshot(SofError):
    pass


class CorruptSnapshot(SofError):
    pass


class SeriesTooSmall(SofError):
    pass


class AlertNotPending(SofError):
    pass


class DuplicateSeries(SofError):
    pass


class UnknownDevice(SofError):
    pass


class NoSuchVersion(SofError):
    pass


class CorruptCorpus(SofError):
    pass


class ServerUnreachable(SofError):
    pass


class ScenarioError(SofError):
    pass


class IoFailure(SofError):
    pass
