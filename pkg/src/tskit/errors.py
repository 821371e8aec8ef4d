"""Exception hierarchy shared by all tskit modules."""


class TskitError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(TskitError):
    """State vector dimension does not match the timestepper's dimension."""


class NonFiniteOutput(TskitError):
    """The inner simulator produced NaN/Inf (model blow-up)."""


class ZeroDirection(TskitError):
    """A directional derivative was requested along the zero vector."""


class DimensionTooLarge(TskitError):
    """Dense Jacobian assembly refused above the size guard."""


class BasisFull(TskitError):
    """Slow-subspace growth demanded while already at the configured ceiling."""


class NotAFixedPoint(TskitError):
    """Eigenvalue analysis requested at a point far from any fixed point."""


class NoConvergence(TskitError):
    """QR eigenvalue iteration exhausted its sweep budget.

    Carries the eigenvalues isolated so far in ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = [] if partial is None else list(partial)


class DegenerateTangent(TskitError):
    """Secant tangent requested from two coincident branch points."""


class CorrectorFailed(TskitError):
    """Arclength corrector did not converge within its iteration budget."""


class InitialSolveFailed(TskitError):
    """The fixed-point solve seeding a continuation run did not converge."""


class StepUnderflow(TskitError):
    """Continuation step size shrank below its configured minimum."""


class UnstableEnvelope(TskitError):
    """Projective outer steps are amplifying the chord round over round."""


class CflViolation(TskitError):
    """Configured inner time step exceeds the advective CFL bound."""


class NegativeConcentration(TskitError):
    """Column state left its physical bounds (scheme failure, not clamped)."""


class ConfigError(TskitError):
    """Run configuration is malformed or contains unknown keys."""


class IncomparableRuns(TskitError):
    """Two run reports do not describe the same fixed point."""
