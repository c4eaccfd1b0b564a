"""Exception hierarchy shared by the construction and the verifiers."""

from __future__ import annotations


class Gf2CertError(Exception):
    pass


class DependentFamily(Gf2CertError):
    """A family required to be independent has a zero sum."""

    def __init__(self, witness, message: str | None = None):
        self.witness = tuple(witness)
        super().__init__(message or f"DependentFamily: positions {list(self.witness)} sum to zero")


class InfeasibleConstraints(Gf2CertError):
    """Constraint vectors sum to zero while their target bits sum to one."""

    def __init__(self, witness):
        self.witness = tuple(witness)
        super().__init__(f"infeasible constraints at positions {list(self.witness)}")


class ClaimSearchExhausted(Gf2CertError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        super().__init__(message)


class CodimensionTooSmall(Gf2CertError):
    pass


class ScheduleSupportViolation(Gf2CertError):
    pass


class TransferMismatch(Gf2CertError):
    pass


class BoxViolation(Gf2CertError):
    pass


class NoMatchingStage(Gf2CertError):
    pass


class WindowTooLarge(Gf2CertError):
    pass


class PatternMissing(Gf2CertError):
    def __init__(self, pattern, window):
        self.pattern = tuple(pattern)
        self.window = tuple(window)
        super().__init__(f"pattern {''.join(map(str, self.pattern))} missing on window {list(self.window)}")


class ParseError(Gf2CertError):
    pass


class ValidationError(Gf2CertError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class MalformedCertificate(Gf2CertError):
    pass
