"""Exception types raised across lossforge.

Every error carries a short machine-readable ``code`` (for example
``"degenerate-circle"``) so callers and the CLI can branch on it without
parsing messages.
"""


class LossforgeError(Exception):
    code = "error"

    def __init__(self, message, code=None, **details):
        super().__init__(message)
        if code is not None:
            self.code = code
        self.details = details

    def __str__(self):
        return f"[{self.code}] {self.args[0]}"


class ValidationError(LossforgeError, ValueError):
    """Input violates a documented precondition or file schema."""

    code = "invalid-input"


class NumericalError(LossforgeError, ArithmeticError):
    """A numerical procedure failed or produced a nonphysical result."""

    code = "numerical-failure"
