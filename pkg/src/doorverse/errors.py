"""Exception types shared across the workbench."""


class DoorverseError(Exception):
    """Base class for all workbench errors."""

    code = "error"


class InvalidArgumentError(DoorverseError, ValueError):
    code = "invalid-argument"


class CompatibilityError(DoorverseError):
    code = "incompatible"


class ConfigurationError(DoorverseError):
    code = "configuration"


class EpisodeExhaustedError(DoorverseError):
    code = "episode-exhausted"


class InvalidStateError(DoorverseError):
    code = "invalid-state"


class ReachabilityError(DoorverseError):
    code = "unreachable"


class EmptyObservationError(DoorverseError):
    code = "empty-observation"


class NearClipError(DoorverseError):
    code = "near-clip"


class ShapeError(DoorverseError, ValueError):
    code = "shape"


class DegenerateInputError(DoorverseError, ValueError):
    code = "degenerate-input"


class GenerationFailureError(DoorverseError):
    code = "generation-failure"


class ProvenanceError(DoorverseError):
    code = "provenance"


class DataError(DoorverseError):
    code = "data"
