"""Policy model: users, roles, resources, assignment policies, and the store.

Two policy kinds drive every decision:

* a CAURA policy assigns a user to a role while its condition holds
  (dynamic user-role assignment);
* a CARPA policy assigns a role a permission, an (operation, resource)
  pair drawn from the resource's allowed operations, with an explicit
  Granted or Denied decision, while its condition holds.

Roles form a hierarchy through direct-junior edges: a role inherits the
permissions of all its transitive juniors. Resources form a hierarchy
through child edges: a permission on a resource covers all its transitive
children. Both relations must be acyclic.

A :class:`PolicyStore` is an immutable snapshot value; every mutation
produces a new store with a strictly larger version. Serialization is
canonical (sections in fixed order, records sorted by id), so equal
stores save to identical bytes.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Union

from . import csl
from .errors import (
    CslSyntaxError,
    CycleError,
    DuplicateIdError,
    PolicyFileError,
    ReferentialIntegrityError,
    SchemaError,
    UnknownResourceError,
    UnknownRoleError,
    UnknownTargetError,
)

__all__ = [
    "Decision",
    "UserRecord",
    "RoleRecord",
    "ResourceRecord",
    "Permission",
    "CauraPolicy",
    "CarpaPolicy",
    "PolicyStore",
    "StoreChange",
    "AddUser", "RemoveUser", "AddRole", "RemoveRole",
    "AddResource", "RemoveResource", "AddPolicy", "RemovePolicy",
    "load_store", "save_store", "mutate_store", "change_from_json",
    "senior_closure", "descendant_resources", "validate_store",
    "profile_facts",
]


class Decision(enum.Enum):
    GRANTED = "Granted"
    DENIED = "Denied"


@dataclass(frozen=True)
class UserRecord:
    user_id: str
    # Profile facts, kept in JSON-native form; they seed the context
    # repository (where numbers become exact rationals).
    attributes: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class RoleRecord:
    role_id: str
    juniors: frozenset[str] = frozenset()


@dataclass(frozen=True)
class ResourceRecord:
    resource_id: str
    owner_id: str
    allowed_operations: frozenset[str]
    children: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Permission:
    """An approval target: one operation on one resource."""

    resource_id: str
    operation: str


@dataclass(frozen=True)
class CauraPolicy:
    policy_id: str
    user_id: str
    role_id: str
    condition: csl.Expr


@dataclass(frozen=True)
class CarpaPolicy:
    policy_id: str
    role_id: str
    permission: Permission
    condition: csl.Expr
    decision: Decision


@dataclass(frozen=True)
class PolicyStore:
    """Validated, immutable policy store. Mappings preserve file order."""

    users: dict[str, UserRecord]
    roles: dict[str, RoleRecord]
    resources: dict[str, ResourceRecord]
    caura: dict[str, CauraPolicy]
    carpa: dict[str, CarpaPolicy]
    version: int = 1
    # Per-store closure caches; safe because stores are never mutated.
    _role_reach: dict = field(default_factory=dict, compare=False, repr=False)
    _resource_reach: dict = field(default_factory=dict, compare=False, repr=False)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _find_cycle(kind: str, edges: Mapping[str, Iterable[str]]) -> None:
    """Reject any directed cycle, reporting one explicit witness path."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {node: WHITE for node in edges}
    path: list[str] = []

    def visit(node: str) -> None:
        color[node] = GREY
        path.append(node)
        for nxt in edges[node]:
            if nxt not in color:
                continue  # dangling refs are reported separately
            if color[nxt] == GREY:
                cycle = tuple(path[path.index(nxt):]) + (nxt,)
                raise CycleError(kind, cycle)
            if color[nxt] == WHITE:
                visit(nxt)
        path.pop()
        color[node] = BLACK

    for node in edges:
        if color[node] == WHITE:
            visit(node)


def validate_store(store: PolicyStore) -> None:
    """Full integrity scan; raises on the first violation found."""
    for role in store.roles.values():
        for junior in role.juniors:
            if junior not in store.roles:
                raise ReferentialIntegrityError(
                    f"role {role.role_id!r} lists unknown junior {junior!r}"
                )
    for res in store.resources.values():
        if not res.allowed_operations:
            raise SchemaError(
                f"resource {res.resource_id!r} allows no operations"
            )
        for child in res.children:
            if child not in store.resources:
                raise ReferentialIntegrityError(
                    f"resource {res.resource_id!r} lists unknown child {child!r}"
                )
    _find_cycle("role", {r.role_id: r.juniors for r in store.roles.values()})
    _find_cycle("resource",
                {r.resource_id: r.children for r in store.resources.values()})
    for pol in store.caura.values():
        if pol.user_id not in store.users:
            raise ReferentialIntegrityError(
                f"policy {pol.policy_id!r} references unknown user {pol.user_id!r}"
            )
        if pol.role_id not in store.roles:
            raise ReferentialIntegrityError(
                f"policy {pol.policy_id!r} references unknown role {pol.role_id!r}"
            )
    for pol in store.carpa.values():
        if pol.role_id not in store.roles:
            raise ReferentialIntegrityError(
                f"policy {pol.policy_id!r} references unknown role {pol.role_id!r}"
            )
        res = store.resources.get(pol.permission.resource_id)
        if res is None:
            raise ReferentialIntegrityError(
                f"policy {pol.policy_id!r} references unknown resource "
                f"{pol.permission.resource_id!r}"
            )
        if pol.permission.operation not in res.allowed_operations:
            raise ReferentialIntegrityError(
                f"policy {pol.policy_id!r}: operation {pol.permission.operation!r} "
                f"is not assigned to resource {res.resource_id!r}"
            )
    overlap = store.caura.keys() & store.carpa.keys()
    if overlap:
        raise DuplicateIdError(f"policy id used in both sections: {sorted(overlap)}")


# ---------------------------------------------------------------------------
# Hierarchy closures
# ---------------------------------------------------------------------------

def profile_facts(store: PolicyStore) -> tuple[tuple[str, str, object], ...]:
    """User profile attributes as (entity, attribute, value) triples, in a
    deterministic order, for seeding a context repository."""
    return tuple(
        (user.user_id, attribute, user.attributes[attribute])
        for user in sorted(store.users.values(), key=lambda u: u.user_id)
        for attribute in sorted(user.attributes)
    )


def senior_closure(store: PolicyStore, role_id: str) -> frozenset[str]:
    """The role plus all transitive juniors: every role whose permissions
    the given role inherits."""
    if role_id not in store.roles:
        raise UnknownRoleError(role_id)
    cached = store._role_reach.get(role_id)
    if cached is not None:
        return cached
    reach: set[str] = set()
    stack = [role_id]
    while stack:
        current = stack.pop()
        if current in reach:
            continue
        reach.add(current)
        stack.extend(store.roles[current].juniors)
    result = frozenset(reach)
    store._role_reach[role_id] = result
    return result


def descendant_resources(store: PolicyStore, resource_id: str) -> frozenset[str]:
    """The resource plus all transitive children (finer-granularity parts)."""
    if resource_id not in store.resources:
        raise UnknownResourceError(resource_id)
    cached = store._resource_reach.get(resource_id)
    if cached is not None:
        return cached
    reach: set[str] = set()
    stack = [resource_id]
    while stack:
        current = stack.pop()
        if current in reach:
            continue
        reach.add(current)
        stack.extend(store.resources[current].children)
    result = frozenset(reach)
    store._resource_reach[resource_id] = result
    return result


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

_TOP_KEYS = ("users", "roles", "resources", "caura", "carpa")


def _reject_duplicate_keys(pairs):
    obj = {}
    for key, value in pairs:
        if key in obj:
            raise SchemaError(f"duplicate key {key!r}")
        obj[key] = value
    return obj


def _require(obj: object, where: str, *keys: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    for key in keys:
        if key not in obj:
            raise SchemaError(f"{where}: missing key {key!r}")
    for key in obj:
        if key not in keys:
            raise SchemaError(f"{where}: unknown key {key!r}")


def _parse_condition(text: object, where: str,
                     operators: Mapping[str, object] | None) -> csl.Expr:
    if not isinstance(text, str):
        raise SchemaError(f"{where}: condition must be a string")
    try:
        return csl.parse_expression(text, operators=operators)
    except CslSyntaxError as exc:
        raise SchemaError(f"{where}: bad condition: {exc}") from exc


def load_store(text: str, *,
               operators: Mapping[str, object] | None = None) -> PolicyStore:
    """Parse and fully validate a policy file; conditions are pre-parsed."""
    try:
        data = json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise PolicyFileError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(data, dict):
        raise SchemaError("policy file must be a JSON object")
    for key in data:
        if key not in _TOP_KEYS:
            raise SchemaError(f"unknown top-level key {key!r}")

    users: dict[str, UserRecord] = {}
    for i, raw in enumerate(data.get("users", [])):
        where = f"users[{i}]"
        if not isinstance(raw, dict) or "id" not in raw:
            raise SchemaError(f"{where}: expected an object with an 'id'")
        for key in raw:
            if key not in ("id", "attributes"):
                raise SchemaError(f"{where}: unknown key {key!r}")
        rec = UserRecord(str(raw["id"]), dict(raw.get("attributes", {})))
        if rec.user_id in users:
            raise DuplicateIdError(f"duplicate user id {rec.user_id!r}")
        users[rec.user_id] = rec

    roles: dict[str, RoleRecord] = {}
    for i, raw in enumerate(data.get("roles", [])):
        where = f"roles[{i}]"
        if not isinstance(raw, dict) or "id" not in raw:
            raise SchemaError(f"{where}: expected an object with an 'id'")
        for key in raw:
            if key not in ("id", "juniors"):
                raise SchemaError(f"{where}: unknown key {key!r}")
        rec = RoleRecord(str(raw["id"]), frozenset(raw.get("juniors", [])))
        if rec.role_id in roles:
            raise DuplicateIdError(f"duplicate role id {rec.role_id!r}")
        roles[rec.role_id] = rec

    resources: dict[str, ResourceRecord] = {}
    for i, raw in enumerate(data.get("resources", [])):
        where = f"resources[{i}]"
        if not isinstance(raw, dict):
            raise SchemaError(f"{where}: expected an object")
        for key in raw:
            if key not in ("id", "owner", "operations", "children"):
                raise SchemaError(f"{where}: unknown key {key!r}")
        for key in ("id", "owner", "operations"):
            if key not in raw:
                raise SchemaError(f"{where}: missing key {key!r}")
        rec = ResourceRecord(
            str(raw["id"]), str(raw["owner"]),
            frozenset(raw["operations"]), frozenset(raw.get("children", [])),
        )
        if rec.resource_id in resources:
            raise DuplicateIdError(f"duplicate resource id {rec.resource_id!r}")
        resources[rec.resource_id] = rec

    caura: dict[str, CauraPolicy] = {}
    for i, raw in enumerate(data.get("caura", [])):
        where = f"caura[{i}]"
        _require(raw, where, "id", "user", "role", "condition")
        pol = CauraPolicy(
            str(raw["id"]), str(raw["user"]), str(raw["role"]),
            _parse_condition(raw["condition"], where, operators),
        )
        if pol.policy_id in caura:
            raise DuplicateIdError(f"duplicate policy id {pol.policy_id!r}")
        caura[pol.policy_id] = pol

    carpa: dict[str, CarpaPolicy] = {}
    for i, raw in enumerate(data.get("carpa", [])):
        where = f"carpa[{i}]"
        _require(raw, where, "id", "role", "resource", "operation",
                 "decision", "condition")
        decision_raw = raw["decision"]
        if decision_raw not in (Decision.GRANTED.value, Decision.DENIED.value):
            raise SchemaError(
                f"{where}: decision must be 'Granted' or 'Denied', "
                f"got {decision_raw!r}"
            )
        pol = CarpaPolicy(
            str(raw["id"]), str(raw["role"]),
            Permission(str(raw["resource"]), str(raw["operation"])),
            _parse_condition(raw["condition"], where, operators),
            Decision(decision_raw),
        )
        if pol.policy_id in carpa:
            raise DuplicateIdError(f"duplicate policy id {pol.policy_id!r}")
        carpa[pol.policy_id] = pol

    store = PolicyStore(users, roles, resources, caura, carpa)
    validate_store(store)
    return store


def save_store(store: PolicyStore) -> str:
    """Canonical serialization: fixed section order, records sorted by id.

    Deterministic byte-for-byte; the version counter is not part of the
    file format, so stores equal up to version save identically.
    """
    doc = {
        "users": [
            {"id": u.user_id,
             "attributes": {k: u.attributes[k] for k in sorted(u.attributes)}}
            for u in sorted(store.users.values(), key=lambda u: u.user_id)
        ],
        "roles": [
            {"id": r.role_id, "juniors": sorted(r.juniors)}
            for r in sorted(store.roles.values(), key=lambda r: r.role_id)
        ],
        "resources": [
            {"id": r.resource_id, "owner": r.owner_id,
             "operations": sorted(r.allowed_operations),
             "children": sorted(r.children)}
            for r in sorted(store.resources.values(), key=lambda r: r.resource_id)
        ],
        "caura": [
            {"id": p.policy_id, "user": p.user_id, "role": p.role_id,
             "condition": csl.serialize_expression(p.condition)}
            for p in sorted(store.caura.values(), key=lambda p: p.policy_id)
        ],
        "carpa": [
            {"id": p.policy_id, "role": p.role_id,
             "resource": p.permission.resource_id,
             "operation": p.permission.operation,
             "decision": p.decision.value,
             "condition": csl.serialize_expression(p.condition)}
            for p in sorted(store.carpa.values(), key=lambda p: p.policy_id)
        ],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# Mutations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AddUser:
    user: UserRecord


@dataclass(frozen=True)
class RemoveUser:
    user_id: str


@dataclass(frozen=True)
class AddRole:
    role: RoleRecord


@dataclass(frozen=True)
class RemoveRole:
    role_id: str


@dataclass(frozen=True)
class AddResource:
    resource: ResourceRecord


@dataclass(frozen=True)
class RemoveResource:
    resource_id: str


@dataclass(frozen=True)
class AddPolicy:
    policy: Union[CauraPolicy, CarpaPolicy]


@dataclass(frozen=True)
class RemovePolicy:
    policy_id: str


StoreChange = Union[AddUser, RemoveUser, AddRole, RemoveRole,
                    AddResource, RemoveResource, AddPolicy, RemovePolicy]


def mutate_store(store: PolicyStore, change: StoreChange, *,
                 strict: bool = False) -> PolicyStore:
    """Apply one change and return a new, validated store.

    Removing a user, role, or resource cascades: policies referencing the
    removed entity are dropped and hierarchy edges to it are unlinked.
    With ``strict=True`` a removal that would cascade is refused instead.
    """
    users = dict(store.users)
    roles = dict(store.roles)
    resources = dict(store.resources)
    caura = dict(store.caura)
    carpa = dict(store.carpa)

    def drop_policies(pred_caura, pred_carpa) -> list[str]:
        doomed = [p.policy_id for p in caura.values() if pred_caura(p)]
        doomed += [p.policy_id for p in carpa.values() if pred_carpa(p)]
        for pid in doomed:
            caura.pop(pid, None)
            carpa.pop(pid, None)
        return doomed

    def refuse_if_strict(doomed: list, target: str) -> None:
        if strict and doomed:
            raise ReferentialIntegrityError(
                f"cannot remove {target}: referenced by {sorted(doomed)}"
            )

    if isinstance(change, AddUser):
        if change.user.user_id in users:
            raise DuplicateIdError(f"duplicate user id {change.user.user_id!r}")
        users[change.user.user_id] = change.user
    elif isinstance(change, RemoveUser):
        if change.user_id not in users:
            raise UnknownTargetError(f"unknown user {change.user_id!r}")
        doomed = [p.policy_id for p in caura.values() if p.user_id == change.user_id]
        refuse_if_strict(doomed, f"user {change.user_id!r}")
        del users[change.user_id]
        drop_policies(lambda p: p.user_id == change.user_id, lambda p: False)
    elif isinstance(change, AddRole):
        if change.role.role_id in roles:
            raise DuplicateIdError(f"duplicate role id {change.role.role_id!r}")
        roles[change.role.role_id] = change.role
    elif isinstance(change, RemoveRole):
        if change.role_id not in roles:
            raise UnknownTargetError(f"unknown role {change.role_id!r}")
        doomed = [p.policy_id for p in caura.values() if p.role_id == change.role_id]
        doomed += [p.policy_id for p in carpa.values() if p.role_id == change.role_id]
        refuse_if_strict(doomed, f"role {change.role_id!r}")
        del roles[change.role_id]
        drop_policies(lambda p: p.role_id == change.role_id,
                      lambda p: p.role_id == change.role_id)
        for rid, rec in list(roles.items()):
            if change.role_id in rec.juniors:
                roles[rid] = replace(rec, juniors=rec.juniors - {change.role_id})
    elif isinstance(change, AddResource):
        if change.resource.resource_id in resources:
            raise DuplicateIdError(
                f"duplicate resource id {change.resource.resource_id!r}"
            )
        resources[change.resource.resource_id] = change.resource
    elif isinstance(change, RemoveResource):
        if change.resource_id not in resources:
            raise UnknownTargetError(f"unknown resource {change.resource_id!r}")
        doomed = [p.policy_id for p in carpa.values()
                  if p.permission.resource_id == change.resource_id]
        refuse_if_strict(doomed, f"resource {change.resource_id!r}")
        del resources[change.resource_id]
        drop_policies(lambda p: False,
                      lambda p: p.permission.resource_id == change.resource_id)
        for rid, rec in list(resources.items()):
            if change.resource_id in rec.children:
                resources[rid] = replace(
                    rec, children=rec.children - {change.resource_id}
                )
    elif isinstance(change, AddPolicy):
        pol = change.policy
        if pol.policy_id in caura or pol.policy_id in carpa:
            raise DuplicateIdError(f"duplicate policy id {pol.policy_id!r}")
        if isinstance(pol, CauraPolicy):
            caura[pol.policy_id] = pol
        else:
            carpa[pol.policy_id] = pol
    elif isinstance(change, RemovePolicy):
        if change.policy_id in caura:
            del caura[change.policy_id]
        elif change.policy_id in carpa:
            del carpa[change.policy_id]
        else:
            raise UnknownTargetError(f"unknown policy {change.policy_id!r}")
    else:
        raise UnknownTargetError(f"unsupported change {change!r}")

    new_store = PolicyStore(users, roles, resources, caura, carpa,
                            version=store.version + 1)
    validate_store(new_store)
    return new_store


def change_from_json(obj: object, *,
                     operators: Mapping[str, object] | None = None) -> StoreChange:
    """Decode the wire form of a store change (the admin endpoint body)."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SchemaError("change must be an object with a 'kind' key")
    kind = obj["kind"]
    try:
        if kind == "AddUser":
            raw = obj["user"]
            return AddUser(UserRecord(str(raw["id"]), dict(raw.get("attributes", {}))))
        if kind == "RemoveUser":
            return RemoveUser(str(obj["id"]))
        if kind == "AddRole":
            raw = obj["role"]
            return AddRole(RoleRecord(str(raw["id"]), frozenset(raw.get("juniors", []))))
        if kind == "RemoveRole":
            return RemoveRole(str(obj["id"]))
        if kind == "AddResource":
            raw = obj["resource"]
            return AddResource(ResourceRecord(
                str(raw["id"]), str(raw["owner"]),
                frozenset(raw["operations"]), frozenset(raw.get("children", [])),
            ))
        if kind == "RemoveResource":
            return RemoveResource(str(obj["id"]))
        if kind == "AddPolicy":
            if "caura" in obj:
                raw = obj["caura"]
                return AddPolicy(CauraPolicy(
                    str(raw["id"]), str(raw["user"]), str(raw["role"]),
                    _parse_condition(raw["condition"], "caura policy", operators),
                ))
            if "carpa" in obj:
                raw = obj["carpa"]
                decision_raw = raw["decision"]
                if decision_raw not in (Decision.GRANTED.value, Decision.DENIED.value):
                    raise SchemaError(
                        f"decision must be 'Granted' or 'Denied', got {decision_raw!r}"
                    )
                return AddPolicy(CarpaPolicy(
                    str(raw["id"]), str(raw["role"]),
                    Permission(str(raw["resource"]), str(raw["operation"])),
                    _parse_condition(raw["condition"], "carpa policy", operators),
                    Decision(decision_raw),
                ))
            raise SchemaError("AddPolicy needs a 'caura' or 'carpa' payload")
        if kind == "RemovePolicy":
            return RemovePolicy(str(obj["id"]))
    except KeyError as exc:
        raise SchemaError(f"{kind}: missing key {exc.args[0]!r}") from exc
    raise SchemaError(f"unknown change kind {kind!r}")
