"""Exception hierarchy. CLI exit codes hang off these classes."""

from __future__ import annotations


class ImpgeodError(Exception):
    exit_code = 1


class ConfigError(ImpgeodError, ValueError):
    exit_code = 2


class SeedValidationError(ConfigError):
    """Seed data violates a constraint; ``violations`` names each failed equation."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = tuple(violations)


class PreconditionError(ImpgeodError, ValueError):
    exit_code = 2


class NumericalFailure(ImpgeodError, RuntimeError):
    exit_code = 3


class DenominatorGuardError(NumericalFailure):
    """sigma (sigma a^2 - U^2 H delta_eps) fell below a^2/4: eps too large for the profile."""


class StepUnderflowError(NumericalFailure):
    pass


class CertificateViolation(ImpgeodError, RuntimeError):
    exit_code = 4
