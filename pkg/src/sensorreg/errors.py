"""Exception types shared across the toolkit."""


class SensorRegError(Exception):
    """Base class for all toolkit errors."""


class NumericalError(SensorRegError):
    """A computation failed for numerical reasons (singularity, loss of
    definiteness, non-finite values)."""


class SingularMatrixError(NumericalError):
    """A matrix that must be inverted is singular or too ill-conditioned."""


class TrackletSingularError(SingularMatrixError):
    """The covariance difference used by the inverse-filter tracklet is
    (near-)singular; callers should fall back to the decorrelated form."""


class ScenarioError(SensorRegError, ValueError):
    """A scenario definition violates its schema or invariants."""
