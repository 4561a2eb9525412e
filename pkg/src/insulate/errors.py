class InsulateError(Exception):
    pass


class PreconditionError(InsulateError, ValueError):
    """Inputs violate an operation's preconditions (CLI exit code 2)."""


class SolverError(InsulateError, RuntimeError):
    """A numerical solve failed or produced inconsistent output (CLI exit code 3)."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
