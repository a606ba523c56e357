"""Exception hierarchy shared by the chain model, solvers and CLI."""


class SISError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(SISError, ValueError):
    """Array dimensions do not match the declared signal sizes."""


class ValidationError(SISError, ValueError):
    """Input fails a documented invariant (PSD, probability range, ...)."""


class IndexRangeError(SISError, IndexError):
    """Time or spatial index outside the model's 1-based range."""


class SingularBlockError(SISError):
    """A per-subsystem matrix that must be inverted is numerically singular.

    ``t`` and ``i`` are the 1-based time and spatial indices.
    """

    def __init__(self, what, t=None, i=None, rcond=None):
        self.what = what
        self.t = t
        self.i = i
        self.rcond = rcond
        where = []
        if t is not None:
            where.append(f"t={t}")
        if i is not None:
            where.append(f"i={i}")
        loc = f" at ({','.join(where)})" if where else ""
        extra = f" (rcond={rcond:.3g})" if rcond is not None else ""
        super().__init__(f"{what} singular{loc}{extra}")


class IllPosedChainError(SISError):
    """The interconnection equations at time ``t`` have no unique solution."""

    def __init__(self, t, detail=""):
        self.t = t
        msg = f"chain not well-posed at time t={t}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class SimulationError(SISError):
    """Ground-truth simulation failed at time ``t``."""

    def __init__(self, t, cause):
        self.t = t
        self.cause = cause
        super().__init__(f"simulation failed at t={t}: {cause}")
