"""Shared test harness: a small closed universe and a brute-force
authorization oracle written independently of the engine under test.

The oracle re-derives everything from first principles: role activation
is a direct scan of user-role policies, inheritance is naive fixed-point
expansion over junior edges, resource granularity is naive expansion over
child edges, conditions are evaluated by a ten-line three-valued walker
over a plain fact dict, conflicts resolve deny-over-grant, and absence of
any applicable policy denies.
"""

import itertools

from caac import csl
from caac import policy as pm
from caac.pdp import AccessRequest


# ---------------------------------------------------------------------------
# Small universe: 3 users, 3 roles (2-level), 2 resources (1-level tree)
# ---------------------------------------------------------------------------

def universe_doc(variant: str = "full") -> dict:
    """Policy document for one universe variant.

    Variants: "full" (grants + a deny), "no_deny", "no_caura",
    "senior_only".
    """
    caura = [
        {"id": "ca1", "user": "u1", "role": "junior",
         "condition": 'User.f1 == "T"'},
        {"id": "ca2", "user": "u2", "role": "senior",
         "condition": 'User.f1 == "T"'},
        {"id": "ca3", "user": "u3", "role": "other",
         "condition": 'User.f1 == "F"'},
    ]
    carpa = [
        {"id": "cp1", "role": "junior", "resource": "parent",
         "operation": "read", "decision": "Granted",
         "condition": 'Owner.g1 == "T"'},
        {"id": "cp2", "role": "junior", "resource": "child",
         "operation": "read", "decision": "Denied",
         "condition": 'Owner.g2 == "T"'},
        {"id": "cp3", "role": "other", "resource": "parent",
         "operation": "write", "decision": "Granted",
         "condition": 'Owner.g1 == "T" && Owner.g2 == "T"'},
    ]
    if variant == "no_deny":
        carpa = [p for p in carpa if p["decision"] == "Granted"]
    elif variant == "no_caura":
        caura = []
    elif variant == "senior_only":
        caura = [p for p in caura if p["id"] == "ca2"]
    elif variant != "full":
        raise ValueError(variant)
    return {
        "users": [{"id": u, "attributes": {}} for u in ("u1", "u2", "u3")],
        "roles": [
            {"id": "senior", "juniors": ["junior"]},
            {"id": "junior", "juniors": []},
            {"id": "other", "juniors": []},
        ],
        "resources": [
            {"id": "parent", "owner": "own1",
             "operations": ["read", "write"], "children": ["child"]},
            {"id": "child", "owner": "own1",
             "operations": ["read"], "children": []},
        ],
        "caura": caura,
        "carpa": carpa,
    }


FACT_NAMES = (("u1", "f1"), ("u2", "f1"), ("u3", "f1"),
              ("own1", "g1"), ("own1", "g2"))


def fact_combinations():
    """All 8 boolean combinations of (f1, g1, g2); f1 is shared by the
    three users so one bit drives all activations."""
    for f1, g1, g2 in itertools.product("TF", repeat=3):
        yield {
            ("u1", "f1"): f1, ("u2", "f1"): f1, ("u3", "f1"): f1,
            ("own1", "g1"): g1, ("own1", "g2"): g2,
        }


def universe_requests(store: pm.PolicyStore):
    for user in sorted(store.users):
        for resource in sorted(store.resources):
            for op in ("read", "write"):
                yield AccessRequest(user, resource, op)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

def mini_eval(expr, facts: dict, bindings: dict) -> str:
    """Independent three-valued evaluation; returns 'T', 'F', or 'U'."""
    if isinstance(expr, csl.Atom):
        assert isinstance(expr.ref, csl.SimpleRef), "universe uses simple atoms"
        value = facts.get((bindings[expr.ref.entity_role], expr.ref.attribute))
        if value is None:
            return "U"
        assert expr.op == "=="
        return "T" if value == expr.literal.text else "F"
    if isinstance(expr, csl.Not):
        return {"T": "F", "F": "T", "U": "U"}[mini_eval(expr.child, facts, bindings)]
    left = mini_eval(expr.left, facts, bindings)
    right = mini_eval(expr.right, facts, bindings)
    if isinstance(expr, csl.And):
        if "F" in (left, right):
            return "F"
        if "U" in (left, right):
            return "U"
        return "T"
    if "T" in (left, right):
        return "T"
    if "U" in (left, right):
        return "U"
    return "F"


def naive_reach(edges: dict, start: str) -> set:
    reach = {start}
    while True:
        grown = reach | {n for node in reach for n in edges[node]}
        if grown == reach:
            return reach
        reach = grown


def oracle_authorize(store: pm.PolicyStore, facts: dict,
                     request: AccessRequest) -> tuple[str, str]:
    """Returns (outcome, reason) strings computed from first principles."""
    resource = store.resources[request.resource_id]
    if request.operation not in resource.allowed_operations:
        return "Denied", "OperationNotAssigned"
    bindings = {"User": request.user_id, "Owner": resource.owner_id}

    active = {
        p.role_id for p in store.caura.values()
        if p.user_id == request.user_id
        and mini_eval(p.condition, facts, bindings) == "T"
    }
    if not active:
        return "Denied", "NoActiveRole"

    role_edges = {r.role_id: r.juniors for r in store.roles.values()}
    effective = set()
    for role_id in active:
        effective |= naive_reach(role_edges, role_id)

    res_edges = {r.resource_id: r.children for r in store.resources.values()}
    applicable = [
        p for p in store.carpa.values()
        if p.role_id in effective
        and p.permission.operation == request.operation
        and request.resource_id in naive_reach(res_edges,
                                               p.permission.resource_id)
        and mini_eval(p.condition, facts, bindings) == "T"
    ]
    if any(p.decision is pm.Decision.DENIED for p in applicable):
        return "Denied", "DenyPolicy"
    if applicable:
        return "Granted", "Granted"
    return "Denied", "NoApplicablePolicy"
