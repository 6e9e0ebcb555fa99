"""Exception hierarchy for the tsmc package."""


class TsmcError(Exception):
    """Base class for all tsmc errors."""


class InvalidConfig(TsmcError):
    """A configuration value violates its contract."""


class NonFiniteWeight(TsmcError):
    """A bridge log-density returned NaN or +inf during reweighting."""


class StageCapExceeded(TsmcError):
    """The tempering exponent did not reach its terminal value within max_stages."""


class DegenerateSwarm(TsmcError):
    """ESS collapsed to a single particle at two consecutive stages."""


class BracketFailure(TsmcError):
    """The ESS root-finder lost its bracket; indicates corrupt weights upstream."""


class NonFiniteProposalDensity(TsmcError):
    """A mutation proposal produced a NaN/+inf posterior kernel value."""


class MissingCache(TsmcError):
    """A nondeterministic likelihood was requested without its cached value."""


class LayoutMismatch(TsmcError):
    """Particle swarm layout is incompatible with the bridge's parameter layout."""


class IncompleteRun(TsmcError):
    """A finished-run statistic was requested from a run that did not terminate."""


class SingularPredictiveCovariance(TsmcError):
    """Kalman forecast covariance not invertible even after ridging."""


class QuadratureNonConvergence(TsmcError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class RankDeficientDummies(TsmcError):
    """Dummy-observation design does not identify a proper prior."""


class SingularSigma(TsmcError):
    """Innovation covariance is not positive definite."""
