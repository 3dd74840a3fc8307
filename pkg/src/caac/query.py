"""Authorization relation queries.

Materializes who currently holds what: a tuple (user, role, action,
decision) exists exactly when the user activates the role under the
current snapshot and a role-permission policy reachable from that role
(through hierarchy and resource-granularity closure) applies with the
stated decision. Built directly on the decision point so query results
and live decisions can never disagree.

Only conjunctive equality filters are supported; resources are projected
out of the standard relation, with a resource-bearing variant available
for debugging.
"""

from __future__ import annotations

import io
import csv as _csv
from dataclasses import dataclass
from typing import Mapping

from . import csl
from .context import ContextSnapshot
from .pdp import AccessRequest, DecisionReason, authorize
from .policy import PolicyStore, senior_closure

__all__ = [
    "AuthorizationTuple",
    "ResourceAuthorizationTuple",
    "select_authorizations",
    "select_authorizations_with_resources",
    "to_csv",
]


@dataclass(frozen=True, order=True)
class AuthorizationTuple:
    user_id: str
    role_id: str
    operation: str
    decision: str


@dataclass(frozen=True, order=True)
class ResourceAuthorizationTuple:
    user_id: str
    role_id: str
    operation: str
    decision: str
    resource_id: str


def select_authorizations_with_resources(
        store: PolicyStore, snapshot: ContextSnapshot, *,
        operators: Mapping[str, csl.OperatorFn] | None = None
) -> list[ResourceAuthorizationTuple]:
    """Debugging variant keeping the resource column."""
    rows: set[ResourceAuthorizationTuple] = set()
    for user_id in store.users:
        for resource in store.resources.values():
            for operation in resource.allowed_operations:
                request = AccessRequest(user_id, resource.resource_id, operation)
                decision = authorize(store, snapshot, request,
                                     operators=operators)
                if decision.reason not in (DecisionReason.GRANTED,
                                           DecisionReason.DENY_POLICY):
                    continue
                matched_roles = {store.carpa[pid].role_id
                                 for pid in decision.matched_policies}
                for role_id in decision.activated_roles:
                    if matched_roles & senior_closure(store, role_id):
                        rows.add(ResourceAuthorizationTuple(
                            user_id, role_id, operation,
                            decision.outcome.value, resource.resource_id,
                        ))
    return sorted(rows)


def select_authorizations(store: PolicyStore, snapshot: ContextSnapshot, *,
                          user: str | None = None,
                          role: str | None = None,
                          action: str | None = None,
                          decision: str | None = None,
                          operators: Mapping[str, csl.OperatorFn] | None = None
                          ) -> list[AuthorizationTuple]:
    """The authorization relation, filtered conjunctively and ordered by
    (user, role, operation). An empty result is a valid answer."""
    rows = {
        AuthorizationTuple(t.user_id, t.role_id, t.operation, t.decision)
        for t in select_authorizations_with_resources(store, snapshot,
                                                      operators=operators)
    }
    out = [
        t for t in sorted(rows)
        if (user is None or t.user_id == user)
        and (role is None or t.role_id == role)
        and (action is None or t.operation == action)
        and (decision is None or t.decision == decision)
    ]
    return out


def to_csv(rows: list[AuthorizationTuple]) -> str:
    """CSV with the stable header ``user,role,action,decision``."""
    buf = io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(["user", "role", "action", "decision"])
    for row in rows:
        writer.writerow([row.user_id, row.role_id, row.operation, row.decision])
    return buf.getvalue()
