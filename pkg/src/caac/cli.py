"""Command-line front end.

Subcommands:

* ``validate``: load and fully check a policy file (and optionally a
  context file); prints OK or the first error.
* ``serve``: run the HTTP enforcement service.
* ``scenario``: execute a request/context script and print the transcript;
  exit code 0 only when every EXPECT matched and, if given, the transcript
  equals the expected file.
* ``query``: print the authorization relation as CSV.
* ``gen``: write a seeded synthetic policy/context pair.
* ``bench``: run the scaling benchmark and print CSV plus a fit summary.

``CAAC_LISTEN``, ``CAAC_POLICIES``, and ``CAAC_CONTEXT`` override the
corresponding flags when set.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import bench as bench_mod
from . import query as query_mod
from .context import load_context
from .errors import CaacError
from .generate import BenchMode, BenchmarkConfig, generate_policy_set
from .policy import load_store, profile_facts
from .scenario import run_scenario
from .service import create_app, load_enforcement_point

_DEFAULT_COUNTS = ",".join(str(n) for n in range(50, 501, 50))


def _counts(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(","))


def _env_override(value: str | None, name: str) -> str | None:
    return os.environ.get(name, value)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caac",
        description="Context-aware access control engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a policy file")
    p.add_argument("--policies", required=True)
    p.add_argument("--context")

    p = sub.add_parser("serve", help="run the HTTP enforcement service")
    p.add_argument("--listen", default="127.0.0.1:8080", metavar="HOST:PORT")
    p.add_argument("--policies", required=False)
    p.add_argument("--context", required=False)

    p = sub.add_parser("scenario", help="run a request/context script")
    p.add_argument("--policies", required=True)
    p.add_argument("--context", required=True)
    p.add_argument("script")
    p.add_argument("--expected", help="transcript file to compare against")

    p = sub.add_parser("query", help="print the authorization relation")
    p.add_argument("--policies", required=True)
    p.add_argument("--context", required=True)
    p.add_argument("--user")
    p.add_argument("--role")
    p.add_argument("--action")
    p.add_argument("--decision", choices=["Granted", "Denied"])

    p = sub.add_parser("gen", help="generate a synthetic policy/context pair")
    p.add_argument("--out-policies", required=True)
    p.add_argument("--out-context", required=True)
    p.add_argument("--counts", type=_counts, default=_counts(_DEFAULT_COUNTS))
    p.add_argument("--roles", type=int, default=138)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--mode", choices=[m.value for m in BenchMode],
                   default=BenchMode.MIXED.value)

    p = sub.add_parser("bench", help="measure decision latency vs policy count")
    p.add_argument("--counts", type=_counts, default=_counts(_DEFAULT_COUNTS))
    p.add_argument("--roles", type=int, default=138)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--requests", type=int, default=20)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--mode", choices=[m.value for m in BenchMode],
                   default=BenchMode.MIXED.value)
    p.add_argument("--concurrency", type=int, default=1)
    p.add_argument("--out", help="also write the CSV here")

    return parser


def _cmd_validate(args) -> int:
    store = load_store(Path(args.policies).read_text(encoding="utf-8"))
    print(f"OK: {len(store.users)} users, {len(store.roles)} roles, "
          f"{len(store.resources)} resources, "
          f"{len(store.caura)} + {len(store.carpa)} policies")
    if args.context:
        repo = load_context(Path(args.context).read_text(encoding="utf-8"))
        print(f"OK: {len(repo.snapshot().facts())} facts, "
              f"{len(repo.rules)} rules")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    listen = _env_override(args.listen, "CAAC_LISTEN")
    policies = _env_override(args.policies, "CAAC_POLICIES")
    context = _env_override(args.context, "CAAC_CONTEXT")
    if not policies or not context:
        print("serve needs --policies and --context "
              "(or CAAC_POLICIES / CAAC_CONTEXT)", file=sys.stderr)
        return 2
    host, _, port = listen.rpartition(":")
    app = create_app(load_enforcement_point(policies, context))
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def _cmd_scenario(args) -> int:
    ep = load_enforcement_point(args.policies, args.context)
    result = run_scenario(ep, Path(args.script).read_text(encoding="utf-8"))
    sys.stdout.write(result.text)
    ok = result.ok
    if args.expected:
        ok = ok and result.text == Path(args.expected).read_text(encoding="utf-8")
    return 0 if ok else 1


def _cmd_query(args) -> int:
    store = load_store(Path(args.policies).read_text(encoding="utf-8"))
    snapshot = load_context(
        Path(args.context).read_text(encoding="utf-8"),
        profile_facts=profile_facts(store)).snapshot()
    rows = query_mod.select_authorizations(
        store, snapshot, user=args.user, role=args.role,
        action=args.action, decision=args.decision,
    )
    sys.stdout.write(query_mod.to_csv(rows))
    return 0


def _cmd_gen(args) -> int:
    config = BenchmarkConfig(policy_counts=args.counts, role_count=args.roles,
                             seed=args.seed, mode=BenchMode(args.mode))
    policies_text, context_text = generate_policy_set(config)
    Path(args.out_policies).write_text(policies_text, encoding="utf-8")
    Path(args.out_context).write_text(context_text, encoding="utf-8")
    print(f"wrote {args.out_policies} and {args.out_context}")
    return 0


def _cmd_bench(args) -> int:
    config = BenchmarkConfig(
        policy_counts=args.counts, role_count=args.roles,
        runs_per_point=args.runs, requests_per_run=args.requests,
        seed=args.seed, mode=BenchMode(args.mode),
        concurrency=args.concurrency,
    )
    report = bench_mod.run_benchmark(config)
    csv_text = bench_mod.rows_to_csv(report.rows)
    sys.stdout.write(csv_text)
    print(bench_mod.summary_line(report))
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "serve": _cmd_serve,
    "scenario": _cmd_scenario,
    "query": _cmd_query,
    "gen": _cmd_gen,
    "bench": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (CaacError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
