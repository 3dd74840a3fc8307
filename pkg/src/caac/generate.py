"""Seeded synthetic policy/context generation for scaling experiments.

Builds a store with a configurable number of roles and policies plus a
matching fact universe, so every generated condition parses, loads, and
evaluates cleanly (no dangling references, no type mismatches). The same
seed always produces byte-identical files, and the policy lists for a
smaller count are a strict prefix of those for a larger count, which lets
the benchmark carve per-count stores out of one generation pass.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass

from . import policy as pm
from .errors import SchemaError

__all__ = ["BenchMode", "BenchmarkConfig", "policy_split", "generate_policy_set"]


class BenchMode(enum.Enum):
    CAURA = "caura"    # time role activation; vary user-role policies
    CARPA = "carpa"    # time full authorization; vary role-permission policies
    MIXED = "mixed"    # time full authorization; vary both kinds evenly


_DEFAULT_COUNTS = tuple(range(50, 501, 50))


@dataclass(frozen=True)
class BenchmarkConfig:
    policy_counts: tuple[int, ...] = _DEFAULT_COUNTS
    role_count: int = 138
    runs_per_point: int = 10
    seed: int = 42
    mode: BenchMode = BenchMode.MIXED
    requests_per_run: int = 20
    concurrency: int = 1
    user_count: int = 25
    owner_count: int = 10
    resource_count: int = 12

    def __post_init__(self):
        if not self.policy_counts or \
                any(b <= a for a, b in zip(self.policy_counts,
                                           self.policy_counts[1:])):
            raise SchemaError("policy counts must be strictly increasing")
        if self.runs_per_point < 1:
            raise SchemaError("runs per point must be >= 1")


def policy_split(mode: BenchMode, count: int) -> tuple[int, int]:
    """How many (user-role, role-permission) policies a count stands for."""
    fixed = min(20, count)
    if mode is BenchMode.CAURA:
        return count, fixed
    if mode is BenchMode.CARPA:
        return fixed, count
    return (count + 1) // 2, count // 2


# Attribute vocabulary: 12 attributes, value pools per attribute.
_STRING_ATTRS = {
    "location": ("Ward", "EmergencyRoom", "Lab", "Office"),
    "shift": ("Day", "Evening", "Night"),
    "department": ("Cardiology", "Oncology", "Radiology", "Pediatrics"),
    "certified": ("Yes", "No"),
    "specialty": ("General", "Surgical", "Intensive"),
    "onCall": ("Yes", "No"),
    "employmentType": ("Staff", "Contract", "Visiting"),
    "badgeColor": ("Blue", "Green", "Red"),
    "wardAssigned": ("North", "South", "East", "West"),
}
_NUMBER_ATTRS = {
    "clearanceLevel": (1, 5),
    "yearsExperience": (0, 30),
    "trainingLevel": (1, 3),
}
_OPERATIONS = ("read", "write", "update")


def _atom(rng: random.Random, roles: tuple[str, ...]) -> str:
    role = rng.choice(roles)
    if rng.random() < 0.75:
        attr = rng.choice(sorted(_STRING_ATTRS))
        op = rng.choice(("==", "!="))
        value = rng.choice(_STRING_ATTRS[attr])
        return f'{role}.{attr} {op} "{value}"'
    attr = rng.choice(sorted(_NUMBER_ATTRS))
    low, high = _NUMBER_ATTRS[attr]
    op = rng.choice(("<", "<=", ">", ">=", "==", "!="))
    return f"{role}.{attr} {op} {rng.randint(low, high)}"


def _condition(rng: random.Random, roles: tuple[str, ...]) -> str:
    """1 to 3 atoms, depth at most 3, optional negation on one atom."""
    atoms = [_atom(rng, roles) for _ in range(rng.randint(1, 3))]
    if len(atoms) > 1 and rng.random() < 0.2:
        atoms[0] = f"!({atoms[0]})"
    joined = atoms[0]
    for extra in atoms[1:]:
        joined = f"({joined} {rng.choice(('&&', '||'))} {extra})"
    return joined


def generate_policy_set(config: BenchmarkConfig) -> tuple[str, str]:
    """Return (policy file text, context file text) for the largest count."""
    rng = random.Random(config.seed)
    users = [f"u{i:03d}" for i in range(config.user_count)]
    owners = [f"p{i:03d}" for i in range(config.owner_count)]
    role_ids = [f"r{i:03d}" for i in range(config.role_count)]

    # Sparse acyclic hierarchy: juniors only point to higher indices.
    roles = []
    for i, role_id in enumerate(role_ids):
        juniors = []
        if i < config.role_count - 1 and rng.random() < 0.25:
            juniors = rng.sample(role_ids[i + 1:],
                                 k=min(rng.randint(1, 2),
                                       config.role_count - i - 1))
        roles.append({"id": role_id, "juniors": sorted(juniors)})

    resources = []
    resource_ids = [f"res{i:03d}" for i in range(config.resource_count)]
    for i, rid in enumerate(resource_ids):
        children = []
        if i < config.resource_count - 1 and rng.random() < 0.3:
            children = [resource_ids[i + 1]]
        resources.append({
            "id": rid,
            "owner": rng.choice(owners),
            "operations": sorted(rng.sample(_OPERATIONS, k=rng.randint(1, 3))),
            "children": children,
        })
    by_id = {r["id"]: r for r in resources}

    n_caura, n_carpa = policy_split(config.mode, max(config.policy_counts))
    caura = [
        {"id": f"ua{i:04d}", "user": rng.choice(users),
         "role": rng.choice(role_ids),
         "condition": _condition(rng, ("User",))}
        for i in range(n_caura)
    ]
    carpa = []
    for i in range(n_carpa):
        rid = rng.choice(resource_ids)
        carpa.append({
            "id": f"rp{i:04d}", "role": rng.choice(role_ids),
            "resource": rid,
            "operation": rng.choice(by_id[rid]["operations"]),
            "decision": "Denied" if rng.random() < 0.1 else "Granted",
            "condition": _condition(rng, ("User", "Owner")),
        })

    policy_doc = {
        "users": [{"id": u, "attributes": {}} for u in users],
        "roles": roles,
        "resources": resources,
        "caura": caura,
        "carpa": carpa,
    }

    facts = []
    for entity in users + owners:
        for attr in sorted(_STRING_ATTRS):
            facts.append({"entity": entity, "attribute": attr,
                          "value": rng.choice(_STRING_ATTRS[attr])})
        for attr in sorted(_NUMBER_ATTRS):
            low, high = _NUMBER_ATTRS[attr]
            facts.append({"entity": entity, "attribute": attr,
                          "value": rng.randint(low, high)})
    context_doc = {"facts": facts, "rules": []}

    return (json.dumps(policy_doc, indent=2) + "\n",
            json.dumps(context_doc, indent=2) + "\n")


def sliced_store(full: pm.PolicyStore, mode: BenchMode,
                 count: int) -> pm.PolicyStore:
    """Store containing the first policies that *count* stands for."""
    n_caura, n_carpa = policy_split(mode, count)
    caura = dict(list(full.caura.items())[:n_caura])
    carpa = dict(list(full.carpa.items())[:n_carpa])
    store = pm.PolicyStore(full.users, full.roles, full.resources, caura, carpa)
    pm.validate_store(store)
    return store
