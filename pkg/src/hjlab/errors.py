"""Shared exception types.

Precondition failures (caller handed in data that violates a documented
assumption) are distinguished from structural failures (claimed memberships
or identities that do not hold) and solver failures (iteration did not reach
the residual target).  Quantitative check failures are never exceptions;
they come back as report objects with passed=False.
"""

from __future__ import annotations


class HJLabError(Exception):
    pass


class PreconditionError(HJLabError):
    pass


class StructuralError(HJLabError):
    pass


class SolverError(HJLabError):
    pass


class ConfigError(HJLabError):
    pass
