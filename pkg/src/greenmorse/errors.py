"""Typed errors raised by the toolkit."""


class GreenMorseError(Exception):
    """Base class for all toolkit errors."""


class MalformedCurveError(GreenMorseError):
    """Boundary curve violates regularity, simplicity, or orientation."""


class PerturbationTooLargeError(GreenMorseError):
    """Requested perturbation exceeds the domain's admissible margin."""


class RefitFailureError(GreenMorseError):
    """Fourier re-fit of a perturbed boundary left residual above tolerance."""


class SymmetryMismatchError(GreenMorseError):
    """Domain is not invariant under the requested symmetry group."""


class EmptyRegionError(GreenMorseError):
    """No admissible interior points found within the sampling budget."""


class SingularityError(GreenMorseError):
    """Evaluation requested at (or too close to) the kernel singularity."""


class OutsideDomainError(GreenMorseError):
    """A point lies outside the domain (or too close to its boundary)."""


class CollisionError(GreenMorseError):
    """Configuration points closer than the collision margin."""


class DiscretizationFailureError(GreenMorseError):
    """Boundary-integral system failed its conditioning or accuracy self-test."""


class AccuracyDegradedError(GreenMorseError):
    """Evaluation point violates the backend's accuracy contract.

    Carries ``estimated_bound``, a heuristic bound on the error that an
    evaluation at this point would incur.
    """

    def __init__(self, message, estimated_bound=None):
        super().__init__(message)
        self.estimated_bound = estimated_bound


class UnsupportedFieldError(GreenMorseError):
    """Perturbation field does not vanish near the tracked configuration."""


class UndefinedOrbitError(GreenMorseError):
    """Rotation-orbit tangent is undefined (all points at the origin)."""


class NumericError(GreenMorseError):
    """An internal numerical routine (eigensolver, linear solve) failed."""
