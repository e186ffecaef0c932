"""Framework error taxonomy shared by the API and the CLI."""

from __future__ import annotations


class SafeHavenError(Exception):
    code = "error"


class AuthorizationError(SafeHavenError):
    code = "forbidden"


class NotFound(SafeHavenError):
    code = "not_found"


class GuardError(SafeHavenError):
    """A lifecycle or policy precondition is not met."""

    code = "guard_failed"


class ConflictError(SafeHavenError):
    code = "conflict"


class InvalidInputError(SafeHavenError):
    code = "invalid_input"
