"""Exception types shared across the package.

Mathematical findings (resonances, obstructions, divergence) are raised as
dedicated exceptions so callers can distinguish them from operational errors.
"""


class IsokamError(Exception):
    """Base class for all package errors."""


class RealityViolation(IsokamError):
    """Coefficients do not satisfy conjugate symmetry, or an evaluation
    produced an imaginary residue above tolerance."""


class AliasRisk(IsokamError):
    """Grid too coarse for the requested frequency band."""


class AliasOverflow(IsokamError):
    """A composition leaked more than the allowed relative energy past the
    working frequency band."""


class BadWord(IsokamError):
    """A group word contains letters outside the presentation's alphabet."""


class EmptyBlock(IsokamError):
    """No lattice modes exist with the requested squared norm."""


class UnsupportedAction(IsokamError):
    """The requested operation is not defined for this action kind."""


class NotADiffeomorphism(IsokamError):
    """Displacement field too large for x + f(x) to be invertible."""


class NoConvergence(IsokamError):
    """A fixed-point iteration did not reach tolerance within maxIter."""


class NotCircle(IsokamError):
    """Rotation numbers are defined only for one-dimensional torus maps."""


class NotPeriodic(IsokamError):
    """The generator does not have the claimed exact order on the stored
    modes."""


class NotCoprime(IsokamError):
    """Periodic translation periods must be pairwise coprime."""


class CompositionDiverged(IsokamError):
    """Map compositions left the regime where the exponential-map calculus
    is valid."""


class IllConditionedBlock(IsokamError):
    """A retained eigenvalue fell below the certified Diophantine floor;
    the kernel classification is unreliable."""


class KamRunError(IsokamError):
    """Base class for KAM-iteration failures; carries the diagnostics
    accumulated so far."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log


class ObstructionTooLarge(KamRunError):
    """The component of the truncated perturbation orthogonal to Im d0
    exceeded its schedule bound: the run data violates the almost-conjugacy
    (or vanishing-H1) hypothesis."""


class SolverResidual(KamRunError):
    """The cohomological solve failed its own residual contract."""


class Diverged(KamRunError):
    """Sup norm grew for several consecutive KAM steps."""


class AnalyticBandExceeded(IsokamError):
    """Spectra carry signal outside the band on which weighted Hardy norms
    are numerically representable."""
