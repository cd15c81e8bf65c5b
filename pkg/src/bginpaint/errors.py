"""Exception hierarchy for the toolkit.

Two branches matter for the CLI: ``InputError`` maps to exit code 2
(bad data, bad geometry, bad configuration) and ``NumericalError``
maps to exit code 3 (an iteration diverged or failed to converge).
"""


class ToolkitError(Exception):
    pass


class InputError(ToolkitError):
    pass


class NumericalError(ToolkitError):
    pass


# dataio
class MissingFrames(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class DecodeFailure(InputError):
    pass


class MissingGroundTruth(InputError):
    pass


class KindMismatch(InputError):
    pass


class IoFailure(InputError):
    pass


# masking
class OversizedObject(InputError):
    pass


# inpainting network
class ArchMismatch(InputError):
    pass


class EmptyTrainingSet(InputError):
    pass


class DivergedLoss(NumericalError):
    pass


# texture optimization
class IndivisibleSize(InputError):
    pass


class TooSmall(InputError):
    pass


class NoValidCandidate(InputError):
    pass


class DivergedObjective(NumericalError):
    pass


# blending
class MaskTouchesBorder(InputError):
    pass


class SolverFailure(NumericalError):
    pass


# metrics
class EmptyCounts(InputError):
    pass
