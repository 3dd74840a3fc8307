"""Decision point: dynamic role activation and permission authorization.

An access decision runs in two stages against one policy store and one
context snapshot:

1. *Activation*: every user-role policy for the requesting user whose
   condition is True activates that role. Unknown (missing context) and
   False both leave the role inactive.
2. *Authorization*: the activated roles are widened to everything they
   inherit through the role hierarchy; a role-permission policy applies
   when its role is in that set, the requested resource falls under the
   policy's resource (same node or a transitive child), the operation
   matches, and the condition is True. Denied policies override Granted
   ones; no applicable policy at all means Denied (default deny). An
   operation that the resource does not offer is refused before any
   policy is consulted.

Both stages are pure functions of (store, snapshot, request, bindings)
and safe for unrestricted concurrent use. Conditions that reference an
entity role absent from the bindings make that policy not applicable and
log a warning rather than failing the whole decision.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Mapping

from . import csl
from .context import ContextSnapshot, EntityBindings
from .errors import UnboundEntityRoleError, UnknownResourceError, UnknownUserError
from .policy import (
    Decision,
    PolicyStore,
    descendant_resources,
    senior_closure,
)

__all__ = [
    "AccessRequest",
    "DecisionReason",
    "AtomValue",
    "PolicyEvaluation",
    "AccessDecision",
    "active_roles",
    "authorize",
    "explain",
    "default_bindings",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AccessRequest:
    user_id: str
    resource_id: str
    operation: str

    def __post_init__(self):
        if not (self.user_id and self.resource_id and self.operation):
            raise ValueError("user, resource, and operation must be non-empty")


class DecisionReason(enum.Enum):
    GRANTED = "Granted"
    NO_ACTIVE_ROLE = "NoActiveRole"
    NO_APPLICABLE_POLICY = "NoApplicablePolicy"
    DENY_POLICY = "DenyPolicy"
    OPERATION_NOT_ASSIGNED = "OperationNotAssigned"


@dataclass(frozen=True)
class AtomValue:
    """One atom of a condition with its truth value at decision time."""

    text: str
    value: csl.TruthValue | None  # None when the atom could not be evaluated
    note: str = ""


@dataclass(frozen=True)
class PolicyEvaluation:
    """Trace record for one policy considered during a decision."""

    policy_id: str
    kind: str  # "caura" | "carpa"
    condition: str
    atoms: tuple[AtomValue, ...]
    result: csl.TruthValue | None
    applicable: bool
    note: str = ""


@dataclass(frozen=True)
class AccessDecision:
    outcome: Decision
    reason: DecisionReason
    activated_roles: frozenset[str]
    matched_policies: tuple[str, ...]
    request: AccessRequest | None = None
    trace: tuple[PolicyEvaluation, ...] = ()


def default_bindings(store: PolicyStore, request: AccessRequest,
                     overrides: EntityBindings | None = None) -> dict[str, str]:
    """User maps to the requester, Owner to the resource's owner; explicit
    overrides win."""
    resource = store.resources.get(request.resource_id)
    bindings = {"User": request.user_id}
    if resource is not None:
        bindings["Owner"] = resource.owner_id
    if overrides:
        bindings.update(overrides)
    return bindings


def _evaluate_policy(policy_id: str, kind: str, condition: csl.Expr,
                     snapshot: ContextSnapshot, bindings: EntityBindings,
                     operators) -> PolicyEvaluation:
    atoms = []
    for atom in csl.iter_atoms(condition):
        try:
            value = csl.evaluate_expression(atom, snapshot, bindings,
                                            operators=operators)
            atoms.append(AtomValue(csl.serialize_expression(atom), value))
        except UnboundEntityRoleError as exc:
            atoms.append(AtomValue(csl.serialize_expression(atom), None,
                                   note=str(exc)))
    try:
        result = csl.evaluate_expression(condition, snapshot, bindings,
                                         operators=operators)
    except UnboundEntityRoleError as exc:
        logger.warning("policy %s not applicable: %s", policy_id, exc)
        return PolicyEvaluation(policy_id, kind, csl.serialize_expression(condition),
                                tuple(atoms), None, applicable=False, note=str(exc))
    return PolicyEvaluation(policy_id, kind, csl.serialize_expression(condition),
                            tuple(atoms), result,
                            applicable=result is csl.TruthValue.TRUE)


def active_roles(store: PolicyStore, snapshot: ContextSnapshot, user_id: str,
                 bindings: EntityBindings | None = None, *,
                 operators: Mapping[str, csl.OperatorFn] | None = None,
                 trace: list[PolicyEvaluation] | None = None) -> frozenset[str]:
    """Roles the user can play right now: one per user-role policy whose
    condition evaluates True under the snapshot."""
    if user_id not in store.users:
        raise UnknownUserError(user_id)
    if bindings is None:
        bindings = {"User": user_id}
    activated = set()
    for policy in store.caura.values():
        if policy.user_id != user_id:
            continue
        evaluation = _evaluate_policy(policy.policy_id, "caura", policy.condition,
                                      snapshot, bindings, operators)
        if trace is not None:
            trace.append(evaluation)
        if evaluation.applicable:
            activated.add(policy.role_id)
    return frozenset(activated)


def authorize(store: PolicyStore, snapshot: ContextSnapshot,
              request: AccessRequest,
              bindings: EntityBindings | None = None, *,
              operators: Mapping[str, csl.OperatorFn] | None = None
              ) -> AccessDecision:
    """Decide one access request. See the module docstring for the order
    of checks; the returned decision carries a full evaluation trace."""
    if request.user_id not in store.users:
        raise UnknownUserError(request.user_id)
    resource = store.resources.get(request.resource_id)
    if resource is None:
        raise UnknownResourceError(request.resource_id)
    bound = default_bindings(store, request, bindings)

    trace: list[PolicyEvaluation] = []
    if request.operation not in resource.allowed_operations:
        return AccessDecision(Decision.DENIED, DecisionReason.OPERATION_NOT_ASSIGNED,
                              frozenset(), (), request, ())

    activated = active_roles(store, snapshot, request.user_id, bound,
                             operators=operators, trace=trace)
    if not activated:
        return AccessDecision(Decision.DENIED, DecisionReason.NO_ACTIVE_ROLE,
                              frozenset(), (), request, tuple(trace))

    effective: set[str] = set()
    for role_id in activated:
        effective |= senior_closure(store, role_id)

    granted: list[str] = []
    denied: list[str] = []
    for policy in store.carpa.values():
        if policy.role_id not in effective:
            continue
        if policy.permission.operation != request.operation:
            continue
        if request.resource_id not in descendant_resources(
                store, policy.permission.resource_id):
            continue
        evaluation = _evaluate_policy(policy.policy_id, "carpa", policy.condition,
                                      snapshot, bound, operators)
        trace.append(evaluation)
        if not evaluation.applicable:
            continue
        if policy.decision is Decision.DENIED:
            denied.append(policy.policy_id)
        else:
            granted.append(policy.policy_id)

    if denied:
        return AccessDecision(Decision.DENIED, DecisionReason.DENY_POLICY,
                              activated, tuple(denied), request, tuple(trace))
    if granted:
        return AccessDecision(Decision.GRANTED, DecisionReason.GRANTED,
                              activated, tuple(granted), request, tuple(trace))
    return AccessDecision(Decision.DENIED, DecisionReason.NO_APPLICABLE_POLICY,
                          activated, (), request, tuple(trace))


def explain(decision: AccessDecision) -> str:
    """Human-readable account of a decision: outcome, activated roles,
    matched policies, and the truth value of every condition atom."""
    lines = [f"outcome: {decision.outcome.value}",
             f"reason: {decision.reason.value}"]
    if decision.request is not None:
        req = decision.request
        lines.insert(0, f"request: {req.user_id} {req.operation} {req.resource_id}")
    lines.append("activated roles: "
                 + (", ".join(sorted(decision.activated_roles)) or "(none)"))
    lines.append("matched policies: "
                 + (", ".join(decision.matched_policies) or "(none)"))
    for ev in decision.trace:
        status = "applicable" if ev.applicable else "not applicable"
        result = ev.result.value if ev.result is not None else "error"
        note = f" [{ev.note}]" if ev.note else ""
        lines.append(f"{ev.kind} {ev.policy_id}: {ev.condition} = {result} "
                     f"({status}){note}")
        for atom in ev.atoms:
            value = atom.value.value if atom.value is not None else "error"
            note = f" [{atom.note}]" if atom.note else ""
            lines.append(f"  atom {atom.text} -> {value}{note}")
    return "\n".join(lines)
