"""Context-aware access control: condition-driven user-role and
role-permission assignment with enforcement and re-authorization.

The pieces, bottom up:

* :mod:`caac.csl`: the condition language (parse, serialize, evaluate
  with three-valued logic).
* :mod:`caac.policy`: users, roles, resources, assignment policies, the
  immutable validated store, and hierarchy closures.
* :mod:`caac.context`: the fact repository, derivation rules, and
  immutable snapshots.
* :mod:`caac.pdp`: role activation and access decisions.
* :mod:`caac.query`: the materialized authorization relation.
* :mod:`caac.enforcement` / :mod:`caac.service`: session grants with
  eager re-authorization, and the HTTP API around them.
* :mod:`caac.scenario` / :mod:`caac.generate` / :mod:`caac.bench` /
  :mod:`caac.cli`: scripted runs, synthetic stores, the scaling
  benchmark, and the command line.
"""

from .context import ContextRepository, ContextSnapshot, load_context
from .csl import (
    TruthValue,
    evaluate_expression,
    parse_expression,
    serialize_expression,
)
from .enforcement import EnforcementPoint
from .errors import CaacError
from .pdp import AccessDecision, AccessRequest, active_roles, authorize, explain
from .policy import (
    Decision,
    PolicyStore,
    descendant_resources,
    load_store,
    mutate_store,
    save_store,
    senior_closure,
)
from .query import select_authorizations

__version__ = "0.1.0"

__all__ = [
    "AccessDecision",
    "AccessRequest",
    "CaacError",
    "ContextRepository",
    "ContextSnapshot",
    "Decision",
    "EnforcementPoint",
    "PolicyStore",
    "TruthValue",
    "active_roles",
    "authorize",
    "descendant_resources",
    "evaluate_expression",
    "explain",
    "load_context",
    "load_store",
    "mutate_store",
    "parse_expression",
    "save_store",
    "select_authorizations",
    "senior_closure",
    "serialize_expression",
]
