"""Acceptance suite: one test per exit criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``)."""

import itertools
import json
import random
import time

from fastapi.testclient import TestClient

from caac import bench, csl
from caac import policy as pm
from caac.context import ContextRepository, load_context
from caac.enforcement import EnforcementPoint, SessionStatus
from caac.errors import CycleError, SchemaError
from caac.generate import BenchmarkConfig, BenchMode
from caac.pdp import AccessRequest, authorize
from caac.policy import Decision, load_store
from caac.scenario import run_scenario
from caac.service import create_app

from conftest import FIXTURES, random_expr
from helpers import (
    fact_combinations,
    oracle_authorize,
    universe_doc,
    universe_requests,
)
from test_csl_eval import BINDINGS, indexed_expr, oracle_eval, snapshot_for
from test_hierarchy import (
    bfs,
    fixed_point_reachability,
    random_resource_tree,
    random_role_dag,
)


def report(number: int, ok: bool, label: str) -> None:
    print(f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {label}")
    assert ok


def fresh_ep() -> EnforcementPoint:
    return EnforcementPoint(
        load_store((FIXTURES / "healthcare_policies.json").read_text()),
        load_context((FIXTURES / "healthcare_context.json").read_text()),
    )


def test_criterion_1_scene1_transcript():
    start = time.perf_counter()
    result = run_scenario(fresh_ep(),
                          (FIXTURES / "scene1.script").read_text())
    elapsed = time.perf_counter() - start
    expected = (FIXTURES / "scene1.expected").read_text()
    report(1, result.ok and result.text == expected and elapsed < 1.0,
           f"scene 1 exact transcript in {elapsed:.3f}s")


def test_criterion_2_scene2_transcript():
    result = run_scenario(fresh_ep(),
                          (FIXTURES / "scene2.script").read_text())
    expected = (FIXTURES / "scene2.expected").read_text()
    report(2, result.ok and result.text == expected,
           "scene 2 exact transcript incl. single-conjunct flips")


def test_criterion_3_query_correctness():
    # Fresh domain built through the admin surface, then queried.
    ep = EnforcementPoint(pm.PolicyStore({}, {}, {}, {}, {}),
                          ContextRepository())
    client = TestClient(create_app(ep))
    for change in (
        {"kind": "AddRole", "role": {"id": "GR", "juniors": []}},
        {"kind": "AddUser", "user": {"id": "Tom"}},
        {"kind": "AddResource",
         "resource": {"id": "MR01", "owner": "Bob01",
                      "operations": ["Read"], "children": []}},
        {"kind": "AddPolicy",
         "caura": {"id": "gr_activation", "user": "Tom", "role": "GR",
                   "condition": 'User.affiliation == "Research"'}},
        {"kind": "AddPolicy",
         "carpa": {"id": "gr_read", "role": "GR", "resource": "MR01",
                   "operation": "Read", "decision": "Granted",
                   "condition": 'Owner.researchConsent == "Yes"'}},
    ):
        assert client.post("/v1/admin/policy", json=change).status_code == 200
    for entity, attribute, value in (("Tom", "affiliation", "Research"),
                                     ("Bob01", "researchConsent", "Yes")):
        client.post("/v1/context", json={"entity": entity,
                                         "attribute": attribute,
                                         "value": value})
    added = client.get("/v1/query/authorizations").text
    one_row = added == "user,role,action,decision\nTom,GR,Read,Granted\n"

    # Healthcare store: deleting the nurse role empties her relation.
    client2 = TestClient(create_app(fresh_ep()))
    client2.post("/v1/context", json={"entity": "Bob01",
                                      "attribute": "healthStatus",
                                      "value": "Normal"})
    before = client2.get("/v1/query/authorizations",
                         params={"role": "RN00X"}).text
    client2.post("/v1/admin/policy", json={"kind": "RemoveRole",
                                           "id": "RN00X"})
    after = client2.get("/v1/query/authorizations",
                        params={"role": "RN00X"}).text
    emptied = (before != "user,role,action,decision\n"
               and after == "user,role,action,decision\n")
    report(3, one_row and emptied,
           "single Tom,GR,Read,Granted row; empty relation after removal")


def test_criterion_4_brute_force_oracle_equivalence():
    start = time.perf_counter()
    cases = agreements = 0
    for variant in ("full", "no_deny", "no_caura", "senior_only"):
        store = load_store(json.dumps(universe_doc(variant)))
        for facts in fact_combinations():
            repo = ContextRepository()
            for (entity, attribute), value in facts.items():
                repo.put_fact(entity, attribute, value)
            snapshot = repo.snapshot()
            for request in universe_requests(store):
                got = authorize(store, snapshot, request)
                want = oracle_authorize(store, facts, request)
                cases += 1
                agreements += (got.outcome.value, got.reason.value) == want
    elapsed = time.perf_counter() - start
    report(4, cases <= 2000 and agreements == cases and elapsed < 10.0,
           f"{agreements}/{cases} oracle agreement in {elapsed:.2f}s")


def test_criterion_5_csl_property_suite():
    start = time.perf_counter()
    rng = random.Random(20240811)
    round_trips = all(
        csl.parse_expression(csl.serialize_expression(e)) == e
        for e in (random_expr(rng, 8) for _ in range(1000))
    )
    tables_ok = True
    rng = random.Random(515)
    for _ in range(120):
        k = rng.randint(1, 4)
        expr = indexed_expr(rng, k)
        for assignment in itertools.product(
                (csl.TruthValue.TRUE, csl.TruthValue.FALSE,
                 csl.TruthValue.UNKNOWN), repeat=k):
            got = csl.evaluate_expression(expr, snapshot_for(assignment),
                                          BINDINGS)
            tables_ok = tables_ok and got is oracle_eval(expr, assignment)
    a, b, c = 'User.a == "1"', 'User.b == "1"', 'User.c == "1"'
    precedence_ok = (
        csl.parse_expression(f"{a} || {b} && {c}")
        == csl.parse_expression(f"{a} || ({b} && {c})")
        and csl.parse_expression(f"!{a} && {b}")
        == csl.parse_expression(f"(!{a}) && {b}")
        and isinstance(csl.parse_expression(f"({a} || {b}) && {c}"), csl.And)
    )
    elapsed = time.perf_counter() - start
    report(5, round_trips and tables_ok and precedence_ok and elapsed < 5.0,
           f"round-trip x1000, 3-valued tables, precedence in {elapsed:.2f}s")


def test_criterion_6_hierarchy_properties():
    rng = random.Random(616)
    closures_ok = True
    for _ in range(200):
        store = random_role_dag(rng)
        edges = {r.role_id: r.juniors for r in store.roles.values()}
        for role_id in store.roles:
            closures_ok = closures_ok and pm.senior_closure(
                store, role_id) == fixed_point_reachability(edges, role_id)
    trees_ok = True
    for _ in range(200):
        store = random_resource_tree(rng)
        edges = {r.resource_id: r.children for r in store.resources.values()}
        for resource_id in store.resources:
            trees_ok = trees_ok and pm.descendant_resources(
                store, resource_id) == bfs(edges, resource_id)

    # Grant-only stores over single-owner resource trees with uniform
    # operations: a grant anywhere implies a grant on everything below.
    granularity_ok = True
    for _ in range(50):
        tree = random_resource_tree(rng)
        resources = {
            rid: pm.ResourceRecord(rid, "own1", frozenset({"read"}),
                                   rec.children)
            for rid, rec in tree.resources.items()
        }
        target = rng.choice(sorted(resources))
        store = pm.PolicyStore(
            {"u1": pm.UserRecord("u1")},
            {"r1": pm.RoleRecord("r1")},
            resources,
            {"a1": pm.CauraPolicy("a1", "u1", "r1",
                                  csl.parse_expression('User.on == "T"'))},
            {"p1": pm.CarpaPolicy("p1", "r1", pm.Permission(target, "read"),
                                  csl.parse_expression('User.on == "T"'),
                                  Decision.GRANTED)},
        )
        pm.validate_store(store)
        repo = ContextRepository()
        repo.put_fact("u1", "on", "T")
        snapshot = repo.snapshot()
        for resource_id in resources:
            decision = authorize(store, snapshot,
                                 AccessRequest("u1", resource_id, "read"))
            if decision.outcome is Decision.GRANTED:
                for descendant in pm.descendant_resources(store, resource_id):
                    below = authorize(store, snapshot,
                                      AccessRequest("u1", descendant, "read"))
                    granularity_ok = granularity_ok and \
                        below.outcome is Decision.GRANTED
    report(6, closures_ok and trees_ok and granularity_ok,
           "closure oracles x200 each; grant inherited down resource trees")


def test_criterion_7_enforcement_soundness():
    ep = fresh_ep()
    rng = random.Random(717)
    flips = [
        ("Bob01", "healthStatus", ["Critical", "Normal"]),
        ("Jane01", "locationAddress", ["EmergencyRoom", "Corridor"]),
        ("Mary00X", "locationAddress", ["GeneralWard", "Lab"]),
        ("Mary00X", "requestTime", ["DutyTime", "OffDuty"]),
        ("Bob01", "locationAddress", ["GeneralWard", "Room12"]),
    ]
    requests = [("Jane01", "EMR", "write"), ("Jane01", "EMR", "read"),
                ("Mary00X", "DMR", "write"), ("Mary00X", "PMR", "read"),
                ("Jane01", "DMR", "write"), ("Mary00X", "MR", "read")]
    checks = agreements = 0
    for _ in range(500):
        if rng.random() < 0.5:
            entity, attribute, values = rng.choice(flips)
            newly_revoked = set(ep.update_context(entity, attribute,
                                                  rng.choice(values)))
        else:
            user, resource, op = rng.choice(requests)
            ep.decide(AccessRequest(user, resource, op))
            newly_revoked = set()
        snapshot = ep.repository.snapshot()
        for session in ep.sessions():
            resubmit = authorize(ep.store, snapshot, session.request,
                                 session.overrides)
            if session.status is SessionStatus.ACTIVE:
                checks += 1
                agreements += resubmit.outcome is Decision.GRANTED
            elif session.session_id in newly_revoked:
                checks += 1
                agreements += resubmit.outcome is Decision.DENIED
    report(7, checks > 0 and agreements == checks,
           f"{agreements}/{checks} re-submission agreement over 500 steps")


def test_criterion_8_performance_shape():
    ok = True
    details = []
    for seed in (101, 202, 303):
        config = BenchmarkConfig(seed=seed, mode=BenchMode.MIXED)
        assert config.policy_counts == tuple(range(50, 501, 50))
        assert config.role_count == 138 and config.runs_per_point == 10
        result = bench.run_benchmark(config)
        first, last = result.rows[0], result.rows[-1]
        ok = ok and result.slope_ms_per_policy >= 0.0
        ok = ok and result.r_squared >= 0.8
        ok = ok and last.mean_ms < 50.0
        ok = ok and last.mean_ms >= first.mean_ms
        details.append(f"seed {seed}: slope={result.slope_ms_per_policy:.6f} "
                       f"r2={result.r_squared:.3f} "
                       f"mean@500={last.mean_ms:.3f}ms")
    report(8, ok, "; ".join(details))


def test_criterion_9_schema_validation():
    base = json.loads((FIXTURES / "healthcare_policies.json").read_text())

    missing = json.loads(json.dumps(base))
    del missing["carpa"][0]["decision"]
    try:
        load_store(json.dumps(missing))
        missing_ok = False
    except SchemaError:
        missing_ok = True

    duplicated = (FIXTURES / "healthcare_policies.json").read_text().replace(
        '"decision": "Granted"', '"decision": "Granted", "decision": "Denied"', 1)
    try:
        load_store(duplicated)
        duplicate_ok = False
    except SchemaError:
        duplicate_ok = True

    cyclic = json.loads(json.dumps(base))
    cyclic["roles"] = [{"id": "ED00X", "juniors": ["RN00X"]},
                       {"id": "RN00X", "juniors": ["ED00X"]}]
    try:
        load_store(json.dumps(cyclic))
        cycle_ok = False
    except CycleError:
        cycle_ok = True

    report(9, missing_ok and duplicate_ok and cycle_ok,
           "missing/duplicate decision and hierarchy cycle all rejected")
