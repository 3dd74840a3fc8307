import random
from pathlib import Path

import pytest

from caac import csl

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "caac" / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def healthcare_policies() -> str:
    return (FIXTURES / "healthcare_policies.json").read_text(encoding="utf-8")


@pytest.fixture
def healthcare_context() -> str:
    return (FIXTURES / "healthcare_context.json").read_text(encoding="utf-8")


class DictSnapshot:
    """Minimal in-memory snapshot for evaluator tests."""

    def __init__(self, facts=None, derived=None):
        self._facts = dict(facts or {})
        self._derived = dict(derived or {})

    def get_fact(self, entity_id, attribute):
        return self._facts.get((entity_id, attribute))

    def derive(self, function, arg_ids):
        return self._derived.get((function, tuple(arg_ids)))


# ---------------------------------------------------------------------------
# Random expression generation (seeded; used for round-trip and oracles)
# ---------------------------------------------------------------------------

_ROLES = ("User", "Owner", "Resource", "Environment")
_ATTRS = ("locationAddress", "healthStatus", "requestTime", "heartRate",
          "shift", "wardAssigned")
_FUNCS = (("interRelationship", 2), ("locationCentricRelationship", 2),
          ("healthStatus", 1))
_STRINGS = ("GeneralWard", "Critical", "a\"b", "tab\there", r"back\slash", "")


def random_literal(rng: random.Random) -> csl.Literal:
    if rng.random() < 0.5:
        return csl.Literal.of_string(rng.choice(_STRINGS))
    whole = rng.randint(-999, 999)
    if rng.random() < 0.4:
        return csl.Literal.of_number(f"{whole}.{rng.randint(0, 99):02d}")
    return csl.Literal.of_number(str(whole))


def random_atom(rng: random.Random) -> csl.Atom:
    if rng.random() < 0.75:
        ref = csl.SimpleRef(rng.choice(_ROLES), rng.choice(_ATTRS))
    else:
        name, arity = rng.choice(_FUNCS)
        ref = csl.FunctionRef(name, tuple(rng.sample(_ROLES, arity)))
    op = rng.choice(csl.BUILTIN_RELOPS + ("contains",))
    return csl.Atom(ref, op, random_literal(rng))


def random_expr(rng: random.Random, max_depth: int) -> csl.Expr:
    if max_depth <= 1 or rng.random() < 0.3:
        return random_atom(rng)
    kind = rng.random()
    if kind < 0.4:
        return csl.And(random_expr(rng, max_depth - 1),
                       random_expr(rng, max_depth - 1))
    if kind < 0.8:
        return csl.Or(random_expr(rng, max_depth - 1),
                      random_expr(rng, max_depth - 1))
    return csl.Not(random_expr(rng, max_depth - 1))
