"""Enforcement point: session grants with eager re-authorization.

Wraps the decision point with the state an enforcement layer needs: every
granted request opens an Active session, and every write (a context fact
update or a policy administration change) immediately re-authorizes all
Active sessions against a fresh snapshot. Sessions whose request would now
be denied flip to Revoked and stay there; a later request must open a new
session. A write and the revocations it causes are applied atomically
under one lock, so no reader ever sees the new fact with stale session
statuses.
"""

from __future__ import annotations

import enum
import logging
import threading
from dataclasses import dataclass
from typing import Mapping

from . import csl
from .context import ContextRepository, EntityBindings
from .errors import CaacError
from .pdp import AccessDecision, AccessRequest, authorize
from .policy import Decision, PolicyStore, StoreChange, mutate_store, validate_store

__all__ = ["SessionStatus", "SessionGrant", "EnforcementPoint"]

logger = logging.getLogger(__name__)


class SessionStatus(enum.Enum):
    ACTIVE = "Active"
    REVOKED = "Revoked"


@dataclass
class SessionGrant:
    session_id: str
    request: AccessRequest
    overrides: dict[str, str]
    granted_at: tuple[int, int]  # (store version, repository version)
    status: SessionStatus = SessionStatus.ACTIVE


@dataclass(frozen=True)
class LoggedDecision:
    request: AccessRequest
    decision: AccessDecision
    session_id: str | None


class EnforcementPoint:
    """Serializes writers, hands consistent (store, snapshot) pairs to
    decisions, and keeps the session table in step with both."""

    def __init__(self, store: PolicyStore, repository: ContextRepository, *,
                 operators: Mapping[str, csl.OperatorFn] | None = None):
        validate_store(store)
        self._store = store
        self._repository = repository
        self._operators = operators
        self._sessions: dict[str, SessionGrant] = {}
        self._counter = 0
        self._lock = threading.RLock()
        self.decision_log: list[LoggedDecision] = []

    # -- read side ----------------------------------------------------------

    @property
    def store(self) -> PolicyStore:
        return self._store

    @property
    def repository(self) -> ContextRepository:
        return self._repository

    def sessions(self) -> list[SessionGrant]:
        with self._lock:
            return sorted(self._sessions.values(), key=lambda s: s.session_id)

    def decide(self, request: AccessRequest,
               overrides: EntityBindings | None = None
               ) -> tuple[AccessDecision, SessionGrant | None]:
        """Authorize against a fresh snapshot; open a session when granted."""
        with self._lock:
            snapshot = self._repository.snapshot()
            decision = authorize(self._store, snapshot, request,
                                 overrides, operators=self._operators)
            grant = None
            if decision.outcome is Decision.GRANTED:
                self._counter += 1
                grant = SessionGrant(
                    session_id=f"s{self._counter:06d}",
                    request=request,
                    overrides=dict(overrides or {}),
                    granted_at=(self._store.version, snapshot.version),
                )
                self._sessions[grant.session_id] = grant
            self.decision_log.append(
                LoggedDecision(request, decision,
                               grant.session_id if grant else None)
            )
            return decision, grant

    # -- write side ---------------------------------------------------------

    def update_context(self, entity_id: str, attribute: str,
                       value: object) -> list[str]:
        """Store one fact, then re-authorize every Active session.

        Returns the newly revoked session ids, ordered by id.
        """
        with self._lock:
            self._repository.put_fact(entity_id, attribute, value)
            return self._reauthorize_active()

    def apply_change(self, change: StoreChange) -> int:
        """Swap in a mutated store atomically; a policy change counts as a
        context change for existing grants. Returns the new store version."""
        with self._lock:
            self._store = mutate_store(self._store, change)
            self._reauthorize_active()
            return self._store.version

    def _reauthorize_active(self) -> list[str]:
        snapshot = self._repository.snapshot()
        revoked = []
        for session in sorted(self._sessions.values(),
                              key=lambda s: s.session_id):
            if session.status is not SessionStatus.ACTIVE:
                continue
            try:
                decision = authorize(self._store, snapshot, session.request,
                                     session.overrides,
                                     operators=self._operators)
                still_granted = decision.outcome is Decision.GRANTED
            except CaacError as exc:
                # The request's user or resource no longer exists.
                logger.info("session %s target gone: %s", session.session_id, exc)
                still_granted = False
            if not still_granted:
                session.status = SessionStatus.REVOKED
                revoked.append(session.session_id)
        return revoked
