"""Scoring oracle abstraction: precomputed tables, logprob pseudo-scorers,
and external processes speaking the line-delimited JSON protocol.

External protocol (over a child process's stdio or a TCP socket): the server
emits `{"ready": true, "name": str}` once at startup, then answers each
request `{"req_id": int, "source": str, "text": str, "meta": {...}?}` with
`{"req_id": int, "score": float}` or `{"req_id": int, "error": str}`.
Responses may arrive in any order; req_id pairs them up.
"""

from __future__ import annotations

import json
import os
import queue
import re
import shlex
import socket
import subprocess
import threading
import time
from dataclasses import dataclass, field

from .data import Candidate, Instance
from .errors import (
    MissingPrecomputedScore,
    OracleProtocolError,
    OracleTimeout,
)

DEFAULT_ORACLE_TIMEOUT = 30.0
TIMEOUT_ENV_VAR = "BAYESRANK_ORACLE_TIMEOUT_SECS"


@dataclass
class CallLedger:
    """Thread-safe per-scorer call counts and cumulative wall time."""

    counts: dict[str, int] = field(default_factory=dict)
    wall_time: dict[str, float] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, name: str, calls: int, seconds: float) -> None:
        with self._lock:
            self.counts[name] = self.counts.get(name, 0) + calls
            self.wall_time[name] = self.wall_time.get(name, 0.0) + seconds


class Scorer:
    """Black-box scoring oracle; deterministic per (instance, candidate)."""

    kind = "abstract"
    capability = "expensive"

    def __init__(self, name: str):
        self.name = name
        self.ledger: CallLedger | None = None

    def score(self, instance: Instance, candidate_index: int) -> float:
        return self.score_batch([(instance, candidate_index)])[0]

    def score_batch(self, requests: list[tuple[Instance, int]]) -> list[float]:
        t0 = time.perf_counter()
        values = self._score_batch(requests)
        if self.ledger is not None:
            self.ledger.record(self.name, len(requests), time.perf_counter() - t0)
        return values

    def _score_batch(self, requests: list[tuple[Instance, int]]) -> list[float]:
        return [self._score_one(inst, idx) for inst, idx in requests]

    def _score_one(self, instance: Instance, candidate_index: int) -> float:
        raise NotImplementedError

    def close(self) -> None:
        pass

    @staticmethod
    def _candidate(instance: Instance, candidate_index: int) -> Candidate:
        try:
            return instance.raw_candidates[candidate_index]
        except IndexError:
            raise IndexError(
                f"candidate index {candidate_index} out of range for "
                f"instance {instance.id!r}"
            )


class PrecomputedScorer(Scorer):
    """Reads scores embedded in the dataset under a named key."""

    kind = "precomputed"
    capability = "free"

    def __init__(self, score_key: str, name: str | None = None):
        super().__init__(name or score_key)
        self.score_key = score_key

    def _score_one(self, instance: Instance, candidate_index: int) -> float:
        cand = self._candidate(instance, candidate_index)
        if cand.scores is None or self.score_key not in cand.scores:
            raise MissingPrecomputedScore(
                f"instance {instance.id!r} candidate {candidate_index} has no "
                f"precomputed score {self.score_key!r}"
            )
        return cand.scores[self.score_key]


class LogprobScorer(Scorer):
    """Pseudo-scorer returning the generation log-probability statistic."""

    kind = "precomputed"
    capability = "free"

    def __init__(self, mode: str):
        if mode not in ("avg", "sum"):
            raise ValueError("logprob mode must be 'avg' or 'sum'")
        super().__init__(f"logprob-{mode}")
        self.mode = mode

    def _score_one(self, instance: Instance, candidate_index: int) -> float:
        cand = self._candidate(instance, candidate_index)
        value = cand.logprob_avg if self.mode == "avg" else cand.logprob_sum
        if value is None:
            raise MissingPrecomputedScore(
                f"candidate {candidate_index} has no logprob_{self.mode}"
            )
        return value


class _LineTransport:
    """Newline-JSON transport over a subprocess's stdio or a TCP socket."""

    def __init__(self, target: str):
        self._proc = None
        self._sock = None
        host_port = re.fullmatch(r"([\w.\-]+):(\d+)", target.strip())
        if host_port:
            self._sock = socket.create_connection(
                (host_port.group(1), int(host_port.group(2)))
            )
            self._writer = self._sock.makefile("wb")
            reader = self._sock.makefile("rb")
        else:
            self._proc = subprocess.Popen(
                shlex.split(target),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
            self._writer = self._proc.stdin
            reader = self._proc.stdout
        self._lines: queue.Queue = queue.Queue()
        self._reader_thread = threading.Thread(
            target=self._read_loop, args=(reader,), daemon=True
        )
        self._reader_thread.start()

    def _read_loop(self, reader) -> None:
        try:
            for raw in reader:
                self._lines.put(raw)
        except (OSError, ValueError):
            pass
        self._lines.put(None)

    def send(self, obj: dict) -> None:
        payload = (json.dumps(obj) + "\n").encode("utf-8")
        try:
            self._writer.write(payload)
            self._writer.flush()
        except (OSError, ValueError, BrokenPipeError) as exc:
            raise OracleProtocolError(f"oracle connection closed: {exc}")

    def recv(self, deadline: float) -> dict:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise OracleTimeout("oracle response timed out")
        try:
            raw = self._lines.get(timeout=remaining)
        except queue.Empty:
            raise OracleTimeout("oracle response timed out")
        if raw is None:
            raise OracleProtocolError("oracle closed the connection")
        try:
            obj = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise OracleProtocolError(f"invalid oracle response line: {exc}")
        if not isinstance(obj, dict):
            raise OracleProtocolError("oracle response is not a JSON object")
        return obj

    def close(self) -> None:
        try:
            self._writer.close()
        except OSError:
            pass
        if self._sock is not None:
            self._sock.close()
        if self._proc is not None:
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()


class ExternalScorer(Scorer):
    """Scorer backed by an external oracle process or socket endpoint.

    Access to the connection is serialized; a batch pipelines all requests
    before collecting the (possibly out-of-order) responses.
    """

    kind = "external"
    capability = "expensive"

    def __init__(self, target: str, timeout: float | None = None):
        if timeout is None:
            timeout = float(os.environ.get(TIMEOUT_ENV_VAR, DEFAULT_ORACLE_TIMEOUT))
        self.timeout = timeout
        self._transport = _LineTransport(target)
        self._lock = threading.Lock()
        self._next_req_id = 0
        handshake = self._transport.recv(time.monotonic() + timeout)
        if handshake.get("ready") is not True:
            raise OracleProtocolError(f"oracle failed to start: {handshake}")
        super().__init__(str(handshake.get("name", target)))

    def _score_batch(self, requests: list[tuple[Instance, int]]) -> list[float]:
        if not requests:
            return []
        with self._lock:
            ids = []
            for inst, idx in requests:
                cand = self._candidate(inst, idx)
                req_id = self._next_req_id
                self._next_req_id += 1
                ids.append(req_id)
                meta = {}
                if cand.logprob_avg is not None:
                    meta["logprob_avg"] = cand.logprob_avg
                if cand.logprob_sum is not None:
                    meta["logprob_sum"] = cand.logprob_sum
                self._transport.send(
                    {
                        "req_id": req_id,
                        "source": inst.source,
                        "text": cand.text,
                        "meta": meta,
                    }
                )
            pending = dict(zip(ids, requests))
            results: dict[int, float] = {}
            deadline = time.monotonic() + self.timeout
            while pending:
                obj = self._transport.recv(deadline)
                req_id = obj.get("req_id")
                if req_id not in pending:
                    raise OracleProtocolError(
                        f"oracle answered unknown req_id {req_id!r}"
                    )
                if "error" in obj:
                    inst, idx = pending[req_id]
                    raise OracleProtocolError(
                        f"oracle error for instance {inst.id!r} candidate "
                        f"{idx}: {obj['error']}"
                    )
                if "score" not in obj or not isinstance(obj["score"], (int, float)):
                    raise OracleProtocolError(f"malformed oracle response: {obj}")
                results[req_id] = float(obj["score"])
                del pending[req_id]
        return [results[i] for i in ids]

    def close(self) -> None:
        self._transport.close()


def parse_scorer_spec(spec: str, scorer_seed: int = 0) -> Scorer:
    """Build a scorer from a CLI spec string.

    Grammar: `precomputed:<name>`, `external:<command or host:port>`,
    `synthetic:<preset>`, `logprob:avg|sum`.
    """
    kind, _, arg = spec.partition(":")
    if not arg:
        raise ValueError(f"scorer spec {spec!r} needs an argument after ':'")
    if kind == "precomputed":
        return PrecomputedScorer(arg)
    if kind == "logprob":
        return LogprobScorer(arg)
    if kind == "external":
        return ExternalScorer(arg)
    if kind == "synthetic":
        from .synthetic import make_synthetic_scorer

        return make_synthetic_scorer(arg, seed=scorer_seed)
    raise ValueError(f"unknown scorer kind {kind!r} in spec {spec!r}")
