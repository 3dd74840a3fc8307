"""Context repository: stored facts, derivation rules, immutable snapshots.

The repository holds the current value of every simple context fact, keyed
by (entity id, attribute). Complex context values are not stored; they are
derived on demand from the stored facts by forward rules of the form

    function(p1, ..., pk) = result   when   atom1 and atom2 and ...

where each body atom compares ``param.attribute`` against a literal or
against another parameter's attribute. Rules are single-layer: bodies read
stored facts only, never other derived functions, which guarantees
derivation terminates in one pass. The first rule in file order whose head
matches and whose body holds wins.

Reads happen through :class:`ContextSnapshot`, an immutable view taken at
one instant: facts written after the snapshot never affect it. Every
entity implicitly carries an ``id`` attribute equal to its own identifier,
so rule bodies can relate entities (``u.assignedPatients contains o.id``).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from . import csl
from .errors import (
    ArityMismatchError,
    PolicyFileError,
    SchemaError,
    TypeMismatchError,
)

__all__ = [
    "DerivationRule",
    "RuleAtom",
    "ContextRepository",
    "ContextSnapshot",
    "EntityBindings",
    "load_context",
    "parse_rules",
]

#: Bindings from entity role (e.g. "User") to a concrete entity id.
EntityBindings = Mapping[str, str]

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_REF = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\.([A-Za-z_][A-Za-z0-9_]*)\Z")


@dataclass(frozen=True)
class RuleAtom:
    """One body condition: ``param.attribute OP (literal | param.attribute)``."""

    param: str
    attribute: str
    op: str
    rhs_param: str | None  # set when the right side is another param's attribute
    rhs_attribute: str | None
    rhs_literal: csl.FactValue | None


@dataclass(frozen=True)
class DerivationRule:
    rule_id: str
    function: str
    params: tuple[str, ...]
    result: csl.FactValue
    body: tuple[RuleAtom, ...]

    @property
    def arity(self) -> int:
        return len(self.params)


def _parse_rule(obj: dict, index: int) -> DerivationRule:
    where = f"rules[{index}]"
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    for key in ("id", "function", "params", "result", "when"):
        if key not in obj:
            raise SchemaError(f"{where}: missing key {key!r}")
    if not isinstance(obj["params"], list) or not isinstance(obj["when"], list):
        raise SchemaError(f"{where}: params and when must be lists")
    params = tuple(obj["params"])
    if not params or not all(isinstance(p, str) and _IDENT.match(p) for p in params):
        raise SchemaError(f"{where}: params must be non-empty identifiers")
    if len(set(params)) != len(params):
        raise SchemaError(f"{where}: duplicate parameter names")
    atoms = []
    for j, raw in enumerate(obj["when"]):
        if not isinstance(raw, dict):
            raise SchemaError(f"{where}.when[{j}]: expected an object")
        for key in ("left", "op", "right"):
            if key not in raw:
                raise SchemaError(f"{where}.when[{j}]: missing key {key!r}")
        left = _REF.match(str(raw["left"]))
        if not left:
            raise SchemaError(f"{where}.when[{j}]: left must be 'param.attribute'")
        param, attribute = left.group(1), left.group(2)
        if param not in params:
            raise SchemaError(f"{where}.when[{j}]: undeclared parameter {param!r}")
        op = str(raw["op"])
        if op not in csl.BUILTIN_RELOPS and not _IDENT.match(op):
            raise SchemaError(f"{where}.when[{j}]: bad operator {op!r}")
        rhs = raw["right"]
        rhs_param = rhs_attribute = rhs_literal = None
        ref = _REF.match(rhs) if isinstance(rhs, str) else None
        if ref and ref.group(1) in params:
            rhs_param, rhs_attribute = ref.group(1), ref.group(2)
        else:
            rhs_literal = csl.normalize_value(rhs)
        atoms.append(RuleAtom(param, attribute, op, rhs_param, rhs_attribute, rhs_literal))
    return DerivationRule(
        rule_id=str(obj["id"]),
        function=str(obj["function"]),
        params=params,
        result=csl.normalize_value(obj["result"]),
        body=tuple(atoms),
    )


def parse_rules(raw_rules: list) -> tuple[DerivationRule, ...]:
    """Validate and order a rule list; order is part of the semantics."""
    rules = tuple(_parse_rule(obj, i) for i, obj in enumerate(raw_rules))
    seen: set[tuple] = set()
    for rule in rules:
        key = (rule.function, rule.arity, rule.result)
        if key in seen:
            raise SchemaError(
                f"duplicate rule for {rule.function}/{rule.arity} "
                f"with result {rule.result!r}"
            )
        seen.add(key)
    return rules


class ContextSnapshot:
    """Immutable view of all facts (and derivable values) at one instant.

    Derived values are cached on first use; the cache is an optimization
    only: recomputing any entry from the frozen facts yields the cached
    value, and lookups never observe later writes to the repository.
    """

    def __init__(self, facts: Mapping[tuple[str, str], csl.FactValue],
                 rules: tuple[DerivationRule, ...], version: int,
                 operators: Mapping[str, csl.OperatorFn] | None = None):
        self._facts = dict(facts)
        self._rules = rules
        self._operators = operators
        self._derived: dict[tuple[str, tuple[str, ...]], csl.FactValue | None] = {}
        self.version = version

    def get_fact(self, entity_id: str, attribute: str) -> csl.FactValue | None:
        if attribute == "id":
            return self._facts.get((entity_id, "id"), entity_id)
        return self._facts.get((entity_id, attribute))

    def derive(self, function: str, arg_ids: tuple[str, ...]) -> csl.FactValue | None:
        """First-match rule lookup; None when no rule body holds."""
        arg_ids = tuple(arg_ids)
        key = (function, arg_ids)
        if key in self._derived:
            return self._derived[key]
        candidates = [r for r in self._rules if r.function == function]
        if candidates and all(r.arity != len(arg_ids) for r in candidates):
            raise ArityMismatchError(
                f"{function} called with {len(arg_ids)} arguments; "
                f"rules declare arity {sorted({r.arity for r in candidates})}"
            )
        value: csl.FactValue | None = None
        for rule in candidates:
            if rule.arity == len(arg_ids) and self._body_holds(rule, arg_ids):
                value = rule.result
                break
        self._derived[key] = value
        return value

    def _body_holds(self, rule: DerivationRule, arg_ids: tuple[str, ...]) -> bool:
        env = dict(zip(rule.params, arg_ids))
        for atom in rule.body:
            left = self.get_fact(env[atom.param], atom.attribute)
            if left is None:
                return False
            if atom.rhs_param is not None:
                right = self.get_fact(env[atom.rhs_param], atom.rhs_attribute)
                if right is None:
                    return False
            else:
                right = atom.rhs_literal
            if not csl.apply_relop(atom.op, left, right, operators=self._operators):
                return False
        return True

    def facts(self) -> dict[tuple[str, str], csl.FactValue]:
        return dict(self._facts)

    def entities(self) -> set[str]:
        return {entity for entity, _ in self._facts}


class ContextRepository:
    """Mutable store of current facts plus the loaded rule set.

    Single writer at a time; readers take snapshots. The version counter
    strictly increases with every put, including puts that leave the value
    unchanged. The first value stored under an attribute fixes its kind
    (string, number, or list); later puts of another kind are rejected.
    """

    def __init__(self, rules: tuple[DerivationRule, ...] = (),
                 operators: Mapping[str, csl.OperatorFn] | None = None):
        self._facts: dict[tuple[str, str], csl.FactValue] = {}
        self._kinds: dict[str, str] = {}
        self._rules = rules
        self._operators = operators
        self._version = 0

    @property
    def version(self) -> int:
        return self._version

    @property
    def rules(self) -> tuple[DerivationRule, ...]:
        return self._rules

    @staticmethod
    def _kind_of(value: csl.FactValue) -> str:
        if isinstance(value, tuple):
            return "list"
        if isinstance(value, Fraction):
            return "number"
        return "string"

    def put_fact(self, entity_id: str, attribute: str, value: object) -> int:
        """Set the current value of (entity, attribute); returns new version."""
        normalized = csl.normalize_value(value)
        kind = self._kind_of(normalized)
        declared = self._kinds.get(attribute)
        if declared is None:
            self._kinds[attribute] = kind
        elif declared != kind:
            raise TypeMismatchError(
                f"attribute {attribute!r} holds {declared} values, got {kind}"
            )
        self._facts[(entity_id, attribute)] = normalized
        self._version += 1
        return self._version

    def snapshot(self) -> ContextSnapshot:
        """Atomic immutable view; later puts are invisible to it."""
        return ContextSnapshot(self._facts, self._rules, self._version,
                               self._operators)


def load_context(text: str, *,
                 operators: Mapping[str, csl.OperatorFn] | None = None,
                 profile_facts: tuple[tuple[str, str, object], ...] = ()
                 ) -> ContextRepository:
    """Build a repository from a context file.

    Format: ``{"facts": [{"entity","attribute","value"}, ...],
    "rules": [{"id","function","params","result","when"}, ...]}``.
    Numbers are read exactly (never through binary floats).

    ``profile_facts`` (entity, attribute, value) triples, typically user
    profile attributes from the policy store, are stored first, so the
    context file's facts take precedence where they overlap.
    """
    try:
        data = json.loads(text, parse_float=Fraction, parse_int=Fraction)
    except json.JSONDecodeError as exc:
        raise PolicyFileError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(data, dict):
        raise SchemaError("context file must be a JSON object")
    for key in data:
        if key not in ("facts", "rules"):
            raise SchemaError(f"unknown top-level key {key!r}")
    repo = ContextRepository(parse_rules(data.get("rules", [])), operators)
    for entity, attribute, value in profile_facts:
        repo.put_fact(entity, attribute, value)
    for i, fact in enumerate(data.get("facts", [])):
        if not isinstance(fact, dict):
            raise SchemaError(f"facts[{i}]: expected an object")
        for key in ("entity", "attribute", "value"):
            if key not in fact:
                raise SchemaError(f"facts[{i}]: missing key {key!r}")
        repo.put_fact(str(fact["entity"]), str(fact["attribute"]), fact["value"])
    return repo
