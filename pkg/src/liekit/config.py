"""Tolerance record and exception hierarchy shared by every module."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    """Default numerical tolerances.

    Every public routine that makes a numerical decision takes an optional
    ``tol`` argument; passing ``DEFAULT_TOL.replace(cluster=1e-6)`` overrides a
    single knob for that call only.
    """

    singularity: float = 1e-12
    roundtrip: float = 1e-10
    cluster: float = 1e-7
    # clustering is escalated by decades up to this bound when the split at the
    # current level is not certifiably diagonalizable
    cluster_max: float = 1e-3
    eigvec_cond: float = 1e8
    unipotent: float = 1e-8
    identity: float = 1e-8
    span: float = 1e-9
    hermitian: float = 1e-10
    triangular: float = 1e-8
    iwasawa: float = 1e-12
    unimodular: float = 1e-9
    siegel_slack: float = 1e-9
    motion: float = 1e-9
    fixed: float = 1e-10
    haar_fit: float = 1e-6

    def replace(self, **overrides: float) -> Tolerances:
        return dataclasses.replace(self, **overrides)

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


DEFAULT_TOL = Tolerances()


def resolve(tol: Tolerances | None) -> Tolerances:
    return DEFAULT_TOL if tol is None else tol


class LieKitError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(LieKitError, ValueError):
    """Malformed or out-of-contract input (CLI exit code 2)."""


class DomainError(LieKitError, ArithmeticError):
    """Input is well formed but outside the numerical domain of the method (CLI exit code 3)."""


class IllConditionedError(DomainError):
    pass


class InconsistencyError(DomainError):
    pass


class SolvabilityError(InvalidInputError):
    pass


class AccuracyError(DomainError):
    pass


class CalibrationError(DomainError):
    pass


class DivergenceError(DomainError):
    pass


class ResourceError(LieKitError):
    pass


class UnsupportedError(InvalidInputError):
    pass
