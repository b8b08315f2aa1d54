"""Exception taxonomy shared by all solvers and the CLI.

Every error carries a machine-readable ``code`` so scripted sweeps can tell
a regime problem (channel outside the wave window) from a numerical one.
"""


class WavefrontError(Exception):
    """Base class; ``code`` is part of the public CLI contract."""

    code = "error"
    exit_code = 3

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ConfigError(WavefrontError):
    code = "config"
    exit_code = 2


class RegimeError(WavefrontError):
    """Channel parameter outside the operating window of the requested quantity.

    ``code`` is ``below-BP`` or ``above-MAP``.
    """

    exit_code = 4


class SolverError(WavefrontError):
    code = "no-convergence"


class ApproximationBreakdown(WavefrontError):
    code = "approximation-breakdown"


class WaveBoundaryError(WavefrontError):
    code = "wave-reached-boundary"


def below_bp(message="channel below BP threshold: no nontrivial fixed point"):
    return RegimeError(message, code="below-BP")


def above_map(message="channel above MAP threshold: energy gap is not positive"):
    return RegimeError(message, code="above-MAP")
