"""Exception types raised by the library."""


class ChernLabError(Exception):
    """Base class for all domain errors."""


class NonDiagonalizable(ChernLabError):
    pass


class SingularMetric(ChernLabError):
    pass


class UnsupportedRank(ChernLabError):
    pass


class StepTooLarge(ChernLabError):
    pass


class NoConvergence(ChernLabError):
    def __init__(self, iterations, residual):
        super().__init__(f"CG stalled after {iterations} iterations (residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class DegenerateVolume(ChernLabError):
    """The volume ratio u_t dropped below the floor before reaching the requested time."""

    def __init__(self, t_bad, window=None):
        msg = f"volume form degenerates before t={t_bad:.6g}"
        if window is not None:
            msg += f" (existence window {window[0]:.6g}, {window[1]:.6g})"
        super().__init__(msg)
        self.t_bad = t_bad
        self.window = window


class IncompatiblePair(ChernLabError):
    pass


class DegenerateFrame(ChernLabError):
    def __init__(self, min_h):
        super().__init__(f"canonical frame degenerates: min normalized h = {min_h:.3e}")
        self.min_h = min_h
