"""Decision-latency benchmark over growing policy counts.

For each configured policy count the harness carves a store out of one
seeded generation pass, issues batches of randomized decision requests,
and reports the mean and standard deviation of per-decision latency in
milliseconds together with the store's serialized size. A least-squares
line over (count, mean latency) summarizes how latency scales; only the
shape is meaningful; absolute numbers depend entirely on the host.

The harness is measurement-only: every request goes through the same
decision entry points as production traffic, so a decision observed here
is identical to the same request replayed anywhere else.
"""

from __future__ import annotations

import random
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .context import load_context
from .generate import BenchMode, BenchmarkConfig, generate_policy_set, sliced_store
from .pdp import AccessRequest, active_roles, authorize
from .policy import PolicyStore, load_store, save_store

__all__ = [
    "BenchmarkRow",
    "BenchmarkReport",
    "run_benchmark",
    "rows_to_csv",
    "rows_from_csv",
    "least_squares_line",
    "sample_requests",
]

CSV_HEADER = "policies,mean_ms,stddev_ms,store_bytes"


@dataclass(frozen=True)
class BenchmarkRow:
    policies: int
    mean_ms: float
    stddev_ms: float
    store_bytes: int


@dataclass(frozen=True)
class BenchmarkReport:
    config: BenchmarkConfig
    rows: tuple[BenchmarkRow, ...]
    slope_ms_per_policy: float
    r_squared: float


def least_squares_line(xs: list[float], ys: list[float]
                       ) -> tuple[float, float, float]:
    """Fit y = a*x + b; returns (slope, intercept, r_squared).

    A series the fit explains perfectly (including a constant one)
    reports an r_squared of 1.0.
    """
    n = len(xs)
    if n < 2:
        return 0.0, ys[0] if ys else 0.0, 1.0
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    sxx = sum((x - mean_x) ** 2 for x in xs)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    slope = sxy / sxx if sxx else 0.0
    intercept = mean_y - slope * mean_x
    ss_res = sum((y - (slope * x + intercept)) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - mean_y) ** 2 for y in ys)
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r_squared


def sample_requests(store: PolicyStore, rng: random.Random,
                    n: int) -> list[AccessRequest]:
    users = sorted(store.users)
    resources = sorted(store.resources)
    requests = []
    for _ in range(n):
        resource = store.resources[rng.choice(resources)]
        requests.append(AccessRequest(
            rng.choice(users), resource.resource_id,
            rng.choice(sorted(resource.allowed_operations)),
        ))
    return requests


def _time_batch(store, snapshot, requests, mode: BenchMode,
                concurrency: int) -> float:
    """Wall-clock milliseconds per decision over one batch."""
    def run_one(request: AccessRequest) -> None:
        if mode is BenchMode.CAURA:
            active_roles(store, snapshot, request.user_id)
        else:
            authorize(store, snapshot, request)

    start = time.perf_counter()
    if concurrency > 1:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            list(pool.map(run_one, requests))
    else:
        for request in requests:
            run_one(request)
    elapsed = time.perf_counter() - start
    return elapsed * 1000.0 / len(requests)


def run_benchmark(config: BenchmarkConfig) -> BenchmarkReport:
    policies_text, context_text = generate_policy_set(config)
    full_store = load_store(policies_text)
    snapshot = load_context(context_text).snapshot()

    rows = []
    for count in config.policy_counts:
        store = sliced_store(full_store, config.mode, count)
        store_bytes = len(save_store(store).encode("utf-8"))
        per_run = []
        for run in range(config.runs_per_point):
            rng = random.Random(f"{config.seed}:{count}:{run}")
            requests = sample_requests(store, rng, config.requests_per_run)
            per_run.append(_time_batch(store, snapshot, requests,
                                       config.mode, config.concurrency))
        rows.append(BenchmarkRow(
            policies=count,
            mean_ms=statistics.fmean(per_run),
            stddev_ms=statistics.pstdev(per_run),
            store_bytes=store_bytes,
        ))

    slope, _, r_squared = least_squares_line(
        [float(r.policies) for r in rows], [r.mean_ms for r in rows],
    )
    return BenchmarkReport(config, tuple(rows), slope, r_squared)


def rows_to_csv(rows: tuple[BenchmarkRow, ...]) -> str:
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(f"{row.policies},{row.mean_ms!r},{row.stddev_ms!r},"
                     f"{row.store_bytes}")
    return "\n".join(lines) + "\n"


def rows_from_csv(text: str) -> tuple[BenchmarkRow, ...]:
    """Exact inverse of :func:`rows_to_csv`."""
    lines = [line for line in text.splitlines() if line]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"expected header {CSV_HEADER!r}")
    rows = []
    for line in lines[1:]:
        policies, mean_ms, stddev_ms, store_bytes = line.split(",")
        rows.append(BenchmarkRow(int(policies), float(mean_ms),
                                 float(stddev_ms), int(store_bytes)))
    return tuple(rows)


def summary_line(report: BenchmarkReport) -> str:
    return (f"mode={report.config.mode.value} "
            f"concurrency={report.config.concurrency} "
            f"slope_ms_per_policy={report.slope_ms_per_policy:.6f} "
            f"r_squared={report.r_squared:.4f}")
