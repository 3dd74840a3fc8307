"""HTTP facade for the enforcement point.

Decisions, context updates, policy administration, session inspection,
and the authorization-relation query are exposed as a small JSON API:

* ``POST /v1/decision``: evaluate an access request; a policy denial
  is a normal 200 response, never a transport error.
* ``POST /v1/context``: store one fact; responds with the sessions
  the write revoked.
* ``POST /v1/admin/policy``: apply one store change; responds with the
  new store version.
* ``GET  /v1/sessions``: all session grants with status.
* ``GET  /v1/query/authorizations``: the current authorization relation
  as CSV, filterable by user/role/action/decision.

4xx is reserved for malformed input (400) and unknown users or resources
(404).
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from . import query as query_mod
from .context import load_context
from .enforcement import EnforcementPoint
from .errors import (
    CaacError,
    CycleError,
    DuplicateIdError,
    ReferentialIntegrityError,
    SchemaError,
    TypeMismatchError,
    UnknownResourceError,
    UnknownTargetError,
    UnknownUserError,
)
from .pdp import AccessRequest
from .policy import change_from_json, load_store, profile_facts

__all__ = ["create_app", "load_enforcement_point"]

_BAD_REQUEST = (TypeMismatchError, SchemaError, DuplicateIdError,
                ReferentialIntegrityError, CycleError, UnknownTargetError)
_NOT_FOUND = (UnknownUserError, UnknownResourceError)


class DecisionBody(BaseModel):
    user: str
    resource: str
    operation: str
    bindings: dict[str, str] | None = None


class ContextBody(BaseModel):
    entity: str
    attribute: str
    value: Any


def load_enforcement_point(policies_path: str | Path,
                           context_path: str | Path) -> EnforcementPoint:
    """Wire up store and repository from files; user profile attributes
    become base context facts, with the context file's facts on top."""
    store = load_store(Path(policies_path).read_text(encoding="utf-8"))
    repo = load_context(Path(context_path).read_text(encoding="utf-8"),
                        profile_facts=profile_facts(store))
    return EnforcementPoint(store, repo)


def create_app(ep: EnforcementPoint) -> FastAPI:
    app = FastAPI(title="caac", docs_url=None, redoc_url=None)
    app.state.enforcement = ep

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors())})

    @app.exception_handler(ValueError)
    async def bad_value(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(CaacError)
    async def domain_error(request: Request, exc: CaacError):
        if isinstance(exc, _NOT_FOUND):
            return JSONResponse(status_code=404, content={"error": str(exc)})
        if isinstance(exc, _BAD_REQUEST):
            return JSONResponse(status_code=400, content={"error": str(exc)})
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.post("/v1/decision")
    def decide(body: DecisionBody):
        request = AccessRequest(body.user, body.resource, body.operation)
        decision, grant = ep.decide(request, body.bindings)
        payload = {
            "outcome": decision.outcome.value,
            "reason": decision.reason.value,
            "activatedRoles": sorted(decision.activated_roles),
            "matchedPolicies": list(decision.matched_policies),
        }
        if grant is not None:
            payload["session"] = grant.session_id
        return payload

    @app.post("/v1/context")
    def put_context(body: ContextBody):
        revoked = ep.update_context(body.entity, body.attribute, body.value)
        return {"revoked": revoked}

    @app.post("/v1/admin/policy")
    def admin_policy(body: dict):
        change = change_from_json(body)
        return {"storeVersion": ep.apply_change(change)}

    @app.get("/v1/sessions")
    def sessions():
        return [
            {
                "session": s.session_id,
                "user": s.request.user_id,
                "resource": s.request.resource_id,
                "operation": s.request.operation,
                "status": s.status.value,
                "grantedAtVersion": {"store": s.granted_at[0],
                                     "context": s.granted_at[1]},
            }
            for s in ep.sessions()
        ]

    @app.get("/v1/query/authorizations")
    def authorizations(user: str | None = None, role: str | None = None,
                       action: str | None = None, decision: str | None = None):
        # An empty query value means "no filter on this column".
        rows = query_mod.select_authorizations(
            ep.store, ep.repository.snapshot(),
            user=user or None, role=role or None,
            action=action or None, decision=decision or None,
        )
        return PlainTextResponse(query_mod.to_csv(rows), media_type="text/csv")

    return app
