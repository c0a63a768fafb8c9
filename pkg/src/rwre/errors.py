"""Exception types raised across the toolkit."""


class RWREError(Exception):
    """Base class for toolkit errors."""


class Divergent(RWREError):
    """An integral or expectation is infinite for the given weights."""


class DegenerateNormalizer(RWREError):
    """A bound formula divides by ``sum(alphas) - 1`` and that quantity vanishes
    (or has the wrong sign for the requested branch)."""


class WrongDimension(RWREError):
    pass


class WrongRegime(RWREError):
    pass


class NonConvergent(RWREError):
    pass


class SingularSystem(RWREError):
    pass


class BadStencil(RWREError):
    pass


class HypothesisFailed(RWREError):
    """No weight exceeds 1, so the integrability bound is unavailable.

    The Monte Carlo estimate that was computed anyway is attached as
    ``estimate``.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class ManifestInvalid(RWREError):
    """Raised with one diagnostic per offending manifest field."""

    def __init__(self, problems):
        self.problems = dict(problems)
        lines = [f"{key}: {msg}" for key, msg in self.problems.items()]
        super().__init__("invalid manifest:\n  " + "\n  ".join(lines))


class ExperimentFailed(RWREError):
    pass
