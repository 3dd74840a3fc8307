"""Exception hierarchy for the caac package.

Split along the main failure surfaces: condition-language errors
(parse and evaluation), policy/context file errors, and store or
decision lookups that name a missing entity.
"""

from __future__ import annotations


class CaacError(Exception):
    """Base class for all errors raised by this package."""


# ---------------------------------------------------------------------------
# Condition language
# ---------------------------------------------------------------------------

class CslSyntaxError(CaacError):
    """Malformed condition text; carries position and the expected tokens."""

    def __init__(self, message: str, line: int = 0, column: int = 0,
                 expected: tuple[str, ...] = ()):
        self.line = line
        self.column = column
        self.expected = expected
        suffix = f" (expected one of: {', '.join(expected)})" if expected else ""
        super().__init__(f"{line}:{column}: {message}{suffix}")


class UnknownOperatorError(CslSyntaxError):
    """A named relational operator is not registered (strict parsing)."""


class EvaluationError(CaacError):
    """Base class for errors raised while evaluating a condition."""


class UnboundEntityRoleError(EvaluationError):
    """A condition references an entity role absent from the bindings."""

    def __init__(self, role: str):
        self.role = role
        super().__init__(f"entity role {role!r} is not bound")


class TypeMismatchError(EvaluationError):
    """Operands of incompatible types reached a relational operator."""


class UnregisteredOperatorError(EvaluationError):
    """A named operator was evaluated without a registered callback."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"operator {name!r} has no registered callback")


class ArityMismatchError(EvaluationError):
    """A derived-function call does not match any rule head's arity."""


# ---------------------------------------------------------------------------
# Policy and context stores
# ---------------------------------------------------------------------------

class StoreError(CaacError):
    """Base class for policy/context store errors."""


class PolicyFileError(StoreError):
    """A policy or context file could not be parsed; location-tagged."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"{line}:{column}: " if line else ""
        super().__init__(f"{where}{message}")


class SchemaError(PolicyFileError):
    """Structurally valid JSON that violates the file schema."""


class DuplicateIdError(SchemaError):
    """Two records in one file or store share an identifier."""


class ReferentialIntegrityError(StoreError):
    """A record references an entity that does not exist in the store."""


class CycleError(StoreError):
    """The role or resource hierarchy contains a cycle."""

    def __init__(self, kind: str, cycle: tuple[str, ...]):
        self.kind = kind
        self.cycle = cycle
        super().__init__(f"{kind} hierarchy cycle: {' -> '.join(cycle)}")


class UnknownUserError(StoreError):
    def __init__(self, user_id: str):
        self.user_id = user_id
        super().__init__(f"unknown user {user_id!r}")


class UnknownRoleError(StoreError):
    def __init__(self, role_id: str):
        self.role_id = role_id
        super().__init__(f"unknown role {role_id!r}")


class UnknownResourceError(StoreError):
    def __init__(self, resource_id: str):
        self.resource_id = resource_id
        super().__init__(f"unknown resource {resource_id!r}")


class UnknownTargetError(StoreError):
    """A store mutation names an entity or policy that does not exist."""
