"""Exception types shared across the package.

Each class carries the process exit code the CLI maps it to.
"""


class PairTunnelError(Exception):
    exit_code = 1


class ValidationError(PairTunnelError, ValueError):
    """Bad input: wrong particle sector, negative couplings, odd N, ..."""

    exit_code = 2


class ConvergenceError(PairTunnelError, RuntimeError):
    """An iterative solver ran out of iterations.

    Attributes
    ----------
    best_residual : float
        Smallest residual norm reached before giving up.
    iterations : int
        Number of matrix-vector products performed.
    """

    exit_code = 3

    def __init__(self, message, best_residual=float("nan"), iterations=0):
        super().__init__(message)
        self.best_residual = best_residual
        self.iterations = iterations


class InvariantError(PairTunnelError, AssertionError):
    """An internal consistency check failed."""

    exit_code = 4
