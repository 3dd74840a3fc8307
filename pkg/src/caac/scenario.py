"""Line-oriented scenario scripts for driving the enforcement point.

Script syntax, one command per line (``#`` starts a comment)::

    REQ <user> <resource> <operation>
    CTX <entity> <attribute> <value>
    EXPECT <Granted|Denied>

``EXPECT`` asserts on the outcome of the most recent ``REQ``. A ``CTX``
value is a bare string token, a number, or (for list-valued facts) a
JSON array written without spaces (``["Bob01"]``). Each step appends one
transcript line; the run is successful when every EXPECT matched.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction

from .enforcement import EnforcementPoint
from .errors import CaacError, PolicyFileError
from .pdp import AccessRequest, DecisionReason

__all__ = ["ScenarioResult", "run_scenario", "run_scenario_files"]

_NUMBER = re.compile(r"-?[0-9]+(\.[0-9]+)?\Z")


@dataclass(frozen=True)
class ScenarioResult:
    transcript: tuple[str, ...]
    ok: bool

    @property
    def text(self) -> str:
        return "\n".join(self.transcript) + "\n" if self.transcript else ""


def _parse_value(token: str):
    if token.startswith("[") or token.startswith('"'):
        return json.loads(token, parse_float=Fraction, parse_int=Fraction)
    if _NUMBER.match(token):
        return Fraction(token)
    return token


def run_scenario(ep: EnforcementPoint, script: str) -> ScenarioResult:
    transcript: list[str] = []
    ok = True
    last_outcome: str | None = None
    for lineno, raw in enumerate(script.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        command = parts[0]
        if command == "REQ":
            if len(parts) != 4:
                raise PolicyFileError("REQ needs <user> <resource> <operation>",
                                      lineno)
            user, resource, operation = parts[1:]
            try:
                decision, _ = ep.decide(AccessRequest(user, resource, operation))
            except CaacError as exc:
                raise PolicyFileError(f"REQ failed: {exc}", lineno) from exc
            last_outcome = decision.outcome.value
            if decision.reason is DecisionReason.GRANTED:
                transcript.append(f"REQ {user} {resource} {operation} -> Granted")
            else:
                transcript.append(
                    f"REQ {user} {resource} {operation} -> Denied "
                    f"({decision.reason.value})"
                )
        elif command == "CTX":
            if len(parts) != 4:
                raise PolicyFileError("CTX needs <entity> <attribute> <value>",
                                      lineno)
            entity, attribute, token = parts[1:]
            revoked = ep.update_context(entity, attribute, _parse_value(token))
            transcript.append(
                f"CTX {entity} {attribute} {token} -> revoked [{','.join(revoked)}]"
            )
        elif command == "EXPECT":
            if len(parts) != 2 or parts[1] not in ("Granted", "Denied"):
                raise PolicyFileError("EXPECT needs Granted or Denied", lineno)
            want = parts[1]
            if last_outcome is None:
                raise PolicyFileError("EXPECT before any REQ", lineno)
            if last_outcome == want:
                transcript.append(f"EXPECT {want} -> ok")
            else:
                transcript.append(f"EXPECT {want} -> FAIL (got {last_outcome})")
                ok = False
        else:
            raise PolicyFileError(f"unknown command {command!r}", lineno)
    return ScenarioResult(tuple(transcript), ok)


def run_scenario_files(policies_path, context_path, script_path,
                       expected_path=None) -> ScenarioResult:
    """Convenience wrapper: build a fresh enforcement point from files,
    run the script, and fold an expected-transcript comparison into
    the result."""
    from pathlib import Path

    from .service import load_enforcement_point

    ep = load_enforcement_point(policies_path, context_path)
    result = run_scenario(ep, Path(script_path).read_text(encoding="utf-8"))
    if expected_path is not None:
        expected = Path(expected_path).read_text(encoding="utf-8")
        if result.text != expected:
            return ScenarioResult(result.transcript, False)
    return result
