"""Exception hierarchy and warning categories."""


class SteerkitError(Exception):
    """Base class for all steerkit errors."""


class InvalidParams(SteerkitError):
    """A parameter set violates its declared invariants."""


class NonConvergence(SteerkitError):
    """The working-point solver did not converge (bistable or marginal point)."""


class OffResonance(SteerkitError):
    """Drive is not on the blue sideband of the average cavity frequency."""


class AsymmetricDamping(SteerkitError):
    """Cavity damping rates differ beyond tolerance; the reduced model assumes
    a common kappa."""


class GainNotPositive(SteerkitError):
    """Net parametric gain G = G1 + G2 - gamma is not positive; the temporal
    mode normalizations degenerate."""


class DegenerateVariance(SteerkitError):
    """A conditioning variance is non-positive; signals formula misuse."""


class ZeroVariance(SteerkitError):
    """The measured party quadrature has (numerically) zero variance."""


class IntegratorFailure(SteerkitError):
    """Adaptive moment integration failed (step underflow or blow-up)."""


class InsufficientTrajectories(SteerkitError):
    """Monte Carlo trajectory count too small for the requested precision."""


class MissingModes(SteerkitError):
    """A covariance matrix does not contain a required mode."""


class NoThreshold(SteerkitError):
    """No noise threshold exists in the search range."""


class ConfigError(SteerkitError):
    """A scenario file violates the schema."""


class RegimeWarning(UserWarning):
    """Parameters leave the weak-coupling / resolved-sideband regime in which
    the reduced model is trustworthy."""
