"""Read-only prediction daemon and its benchmarking client.

Wire protocol (``serve.v1``): one JSON object per line in both
directions, responses in request order per connection.

    request   {"user": "u1", "behaviors": ["v9", "v4"], "candidates": ["v7"]}
    response  {"scores": ["0.123456"], "micros": 842}
    error     {"error": "category: message"}   (connection stays open)

Scores are decimal probabilities with exactly six fractional digits,
order-aligned with the candidate list.  Each candidate is scored through
the exact library prediction path, so the daemon's arithmetic is
bit-identical to an offline ``predict_ctr`` call on the same inputs.
Candidates missing from the neighbor store score with empty neighbor
lists; unknown users and videos take the out-of-vocabulary embedding
path.  All shared state is immutable after load.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .data import ImpressionLog
from .features import AblationMask, FeatureTables, NeighborLookup
from .network import predict_ctr
from .params import Checkpoint
from .validation import ValidationError, require

MAX_CANDIDATES = 512


class ScoringContext:
    """Frozen artifacts plus the per-request scoring routine."""

    def __init__(
        self,
        checkpoint: Checkpoint,
        tables: FeatureTables,
        lookup: NeighborLookup,
        ablation: AblationMask | None = None,
    ) -> None:
        self.checkpoint = checkpoint
        self.tables = tables
        self.lookup = lookup
        self.ablation = ablation or AblationMask()

    def score_request(self, user: str, behaviors: list[str], candidates: list[str]) -> list[float]:
        require(len(candidates) <= MAX_CANDIDATES, f"at most {MAX_CANDIDATES} candidates")
        cap = self.tables.cfg.behavior_cap
        scores = []
        for candidate in candidates:
            impression = ImpressionLog(
                impression_id="serve",
                user_id=user,
                behaviors=tuple(behaviors[:cap]),
                video_id=candidate,
                label=0,
                ts=1,
            )
            scores.append(
                predict_ctr(
                    self.checkpoint.params, self.tables, impression, self.lookup, self.ablation
                )
            )
        return scores


def _handle_line(context: ScoringContext, line: str) -> str:
    started = time.perf_counter_ns()
    try:
        payload = json.loads(line)
        if not isinstance(payload, dict):
            raise ValidationError("request must be a JSON object")
        user = payload.get("user")
        behaviors = payload.get("behaviors", [])
        candidates = payload.get("candidates", [])
        if (
            not isinstance(user, str)
            or not isinstance(behaviors, list)
            or not isinstance(candidates, list)
            or not all(isinstance(x, str) for x in behaviors + candidates)
        ):
            raise ValidationError("fields: user str, behaviors [str], candidates [str]")
        scores = context.score_request(user, behaviors, candidates)
        micros = (time.perf_counter_ns() - started) // 1000
        return json.dumps(
            {"scores": [f"{s:.6f}" for s in scores], "micros": int(micros)},
            separators=(",", ":"),
        )
    except json.JSONDecodeError as exc:
        return json.dumps({"error": f"malformed: {exc.msg}"}, separators=(",", ":"))
    except (ValidationError, KeyError) as exc:
        return json.dumps({"error": f"invalid: {exc}"}, separators=(",", ":"))


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        while True:
            raw = self.rfile.readline()
            if not raw:
                return
            line = raw.decode("utf-8", errors="replace").strip()
            if not line:
                continue
            with self.server.workers:
                response = _handle_line(self.server.context, line)
            self.wfile.write(response.encode() + b"\n")
            self.wfile.flush()


class CtrServer(socketserver.ThreadingTCPServer):
    """One thread per connection; requests on a connection answered in order.

    ``max_workers`` bounds how many requests may score concurrently
    across all connections.
    """

    allow_reuse_address = True
    daemon_threads = True

    def __init__(
        self,
        context: ScoringContext,
        host: str = "127.0.0.1",
        port: int = 0,
        max_workers: int = 8,
    ):
        super().__init__((host, port), _Handler)
        require(max_workers >= 1, "max_workers must be >= 1")
        self.context = context
        self.workers = threading.BoundedSemaphore(max_workers)
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start_background(self) -> "CtrServer":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread:
            self._thread.join(timeout=5)


# -- bench --------------------------------------------------------------


@dataclass(frozen=True)
class BenchConfig:
    n_requests: int = 200
    candidates_per_request: int = 16
    behaviors_per_request: int = 10
    concurrency: int = 2
    seed: int = 0


@dataclass
class BenchReport:
    n_requests: int
    p50_micros: float | None
    p95_micros: float | None
    p99_micros: float | None
    requests_per_second: float | None
    latencies_micros: list[int] = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        return {
            "n_requests": self.n_requests,
            "p50_micros": self.p50_micros,
            "p95_micros": self.p95_micros,
            "p99_micros": self.p99_micros,
            "requests_per_second": self.requests_per_second,
        }


def make_workload(
    config: BenchConfig, users: list[str], videos: list[str]
) -> list[dict]:
    """Seeded request stream; identical config -> identical requests."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    requests = []
    for _ in range(config.n_requests):
        user = users[int(rng.integers(0, len(users)))]
        behaviors = [videos[int(i)] for i in rng.integers(0, len(videos), config.behaviors_per_request)]
        candidates = [
            videos[int(i)] for i in rng.integers(0, len(videos), config.candidates_per_request)
        ]
        requests.append({"user": user, "behaviors": behaviors, "candidates": candidates})
    return requests


def run_workload(host: str, port: int, requests: list[dict], concurrency: int = 2) -> BenchReport:
    """Closed-loop clients over persistent connections, wall-clock latencies."""
    if not requests:
        return BenchReport(0, None, None, None, None)
    shares: list[list[dict]] = [requests[i::concurrency] for i in range(concurrency)]
    latency_lists: list[list[int]] = [[] for _ in range(concurrency)]
    errors: list[str] = []

    def worker(idx: int) -> None:
        try:
            with socket.create_connection((host, port), timeout=60) as conn:
                reader = conn.makefile("r", encoding="utf-8")
                for request in shares[idx]:
                    line = json.dumps(request, separators=(",", ":")) + "\n"
                    start = time.perf_counter_ns()
                    conn.sendall(line.encode())
                    reply = reader.readline()
                    latency_lists[idx].append((time.perf_counter_ns() - start) // 1000)
                    parsed = json.loads(reply)
                    if "error" in parsed:
                        errors.append(parsed["error"])
        except OSError as exc:
            errors.append(f"connection failed: {exc}")

    started = time.perf_counter()
    threads = [threading.Thread(target=worker, args=(i,)) for i in range(len(shares))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    wall = time.perf_counter() - started
    if errors:
        raise ValidationError(f"bench hit errors: {errors[:3]}")
    latencies = sorted(x for lst in latency_lists for x in lst)
    arr = np.array(latencies, dtype=np.float64)
    return BenchReport(
        n_requests=len(latencies),
        p50_micros=float(np.percentile(arr, 50)),
        p95_micros=float(np.percentile(arr, 95)),
        p99_micros=float(np.percentile(arr, 99)),
        requests_per_second=len(latencies) / wall if wall > 0 else None,
        latencies_micros=latencies,
    )


def bench_with_base_delta(
    context: ScoringContext, requests: list[dict], concurrency: int = 2
) -> dict:
    """Latency report for full scoring vs the transfer-free base mask.

    The delta isolates the extra attention compute of the transfer
    heads; values are machine-dependent and informational.
    """
    full_server = CtrServer(context).start_background()
    try:
        full = run_workload("127.0.0.1", full_server.port, requests, concurrency)
    finally:
        full_server.stop()
    base_context = ScoringContext(
        context.checkpoint,
        context.tables,
        context.lookup,
        AblationMask(drop_h2=True, drop_h3=True),
    )
    base_server = CtrServer(base_context).start_background()
    try:
        base = run_workload("127.0.0.1", base_server.port, requests, concurrency)
    finally:
        base_server.stop()
    delta = None
    if full.p50_micros is not None and base.p50_micros is not None:
        delta = full.p50_micros - base.p50_micros
    return {"full": full.as_dict(), "base": base.as_dict(), "p50_delta_micros": delta}
