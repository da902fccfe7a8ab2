"""Candidate-list dataset model and JSONL ingestion.

File format: UTF-8 JSONL, one instance per line,

    {"id": str, "source": str, "candidates": [
        {"text": str, "embedding": [float, ...], "logprob_sum": float,
         "logprob_avg": float, "scores": {name: float}?, "multiplicity": int?},
        ...]}

with an optional first line `{"meta": {"embedding_dim": int, "normalized": bool}}`.
Candidates appear in raw sampling order and may repeat; alternatively a file
may list each unique candidate once with a `multiplicity` count, in which case
the raw order is reconstructed by round-robin interleaving (repeated passes
over the list, each pass emitting one copy of every candidate that still has
copies left).

Embeddings are stored at 32-bit precision and promoted to 64-bit for all
kernel and posterior math. Deduplication is exact string equality on text,
keeping the first appearance (and its index and embedding).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    MissingField,
    NonFinite,
    ParseError,
    ZeroNorm,
)

NORM_TOLERANCE = 1e-6


def normalize_embedding(values) -> np.ndarray:
    """Scale a vector to unit Euclidean norm (float64)."""
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise DimensionMismatch("embedding must be a nonempty 1-d vector")
    if not np.all(np.isfinite(vec)):
        raise NonFinite("embedding contains NaN or Inf")
    norm = float(np.linalg.norm(vec))
    if norm <= 1e-12:
        raise ZeroNorm("embedding has zero norm")
    return vec / norm


@dataclass
class Candidate:
    index: int
    text: str
    embedding: np.ndarray  # float32, unit norm
    logprob_sum: float | None = None
    logprob_avg: float | None = None
    scores: dict[str, float] | None = None
    multiplicity: int = 1


@dataclass
class Instance:
    id: str
    source: str
    raw_candidates: list[Candidate]
    unique_candidates: list[Candidate] = field(default_factory=list)
    _emb64: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.unique_candidates:
            self.unique_candidates = dedup(self.raw_candidates)

    def embedding_matrix(self) -> np.ndarray:
        """Unique-candidate embeddings as an (n, dim) float64 matrix."""
        if self._emb64 is None:
            self._emb64 = np.stack(
                [c.embedding for c in self.unique_candidates]
            ).astype(np.float64)
        return self._emb64


@dataclass
class Dataset:
    instances: list[Instance]
    embedding_dim: int
    declared_scorers: list[str] = field(default_factory=list)

    def instance_by_id(self, instance_id: str) -> Instance:
        for inst in self.instances:
            if inst.id == instance_id:
                return inst
        raise KeyError(instance_id)


def dedup(raw: list[Candidate]) -> list[Candidate]:
    """First-appearance dedup by exact text match, order preserved."""
    seen: set[str] = set()
    out: list[Candidate] = []
    for cand in raw:
        if cand.text not in seen:
            seen.add(cand.text)
            out.append(cand)
    return out


def _expand_multiplicities(cands: list[Candidate]) -> list[Candidate]:
    """Round-robin reconstruction of a raw order from multiplicity counts."""
    remaining = [c.multiplicity for c in cands]
    out: list[Candidate] = []
    next_index = 0
    while any(r > 0 for r in remaining):
        for pos, cand in enumerate(cands):
            if remaining[pos] > 0:
                remaining[pos] -= 1
                out.append(
                    Candidate(
                        index=next_index,
                        text=cand.text,
                        embedding=cand.embedding,
                        logprob_sum=cand.logprob_sum,
                        logprob_avg=cand.logprob_avg,
                        scores=cand.scores,
                        multiplicity=cand.multiplicity,
                    )
                )
                next_index += 1
    return out


def _parse_candidate(
    entry: dict, pos: int, line_no: int, dim: int | None, normalized: bool
) -> tuple[Candidate, int]:
    for key in ("text", "embedding"):
        if key not in entry:
            raise MissingField(f"candidate {pos} missing {key!r}", line=line_no)
    raw_emb = entry["embedding"]
    if dim is not None and len(raw_emb) != dim:
        raise DimensionMismatch(
            f"line {line_no}: candidate {pos} embedding has length "
            f"{len(raw_emb)}, expected {dim}"
        )
    try:
        emb32 = np.asarray(raw_emb, dtype=np.float32)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"candidate {pos} embedding not numeric: {exc}", line=line_no)
    if normalized:
        emb64 = emb32.astype(np.float64)
        if not np.all(np.isfinite(emb64)):
            raise ParseError(f"candidate {pos} embedding not finite", line=line_no)
        norm = float(np.linalg.norm(emb64))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ParseError(
                f"candidate {pos} declared normalized but has norm {norm:.8f}",
                line=line_no,
            )
    else:
        try:
            emb32 = normalize_embedding(raw_emb).astype(np.float32)
        except (ZeroNorm, NonFinite, DimensionMismatch) as exc:
            raise ParseError(f"candidate {pos}: {exc}", line=line_no)

    lp_sum = entry.get("logprob_sum")
    lp_avg = entry.get("logprob_avg")
    for name, val in (("logprob_sum", lp_sum), ("logprob_avg", lp_avg)):
        if val is not None:
            if not np.isfinite(val):
                raise ParseError(f"candidate {pos} {name} not finite", line=line_no)
            if val > 0:
                raise ParseError(
                    f"candidate {pos} {name} is positive ({val})", line=line_no
                )
    scores = entry.get("scores")
    if scores is not None:
        if not isinstance(scores, dict):
            raise ParseError(f"candidate {pos} scores must be an object", line=line_no)
        for sname, sval in scores.items():
            if not isinstance(sval, (int, float)) or not np.isfinite(sval):
                raise ParseError(
                    f"candidate {pos} score {sname!r} not finite", line=line_no
                )
        scores = {str(k): float(v) for k, v in scores.items()}
    mult = entry.get("multiplicity", 1)
    if not isinstance(mult, int) or mult < 1:
        raise ParseError(f"candidate {pos} multiplicity must be >= 1", line=line_no)
    cand = Candidate(
        index=pos,
        text=str(entry["text"]),
        embedding=emb32,
        logprob_sum=None if lp_sum is None else float(lp_sum),
        logprob_avg=None if lp_avg is None else float(lp_avg),
        scores=scores,
        multiplicity=mult,
    )
    return cand, len(raw_emb)


def load_dataset(path: str | Path) -> Dataset:
    """Load and validate a JSONL candidate dataset."""
    path = Path(path)
    instances: list[Instance] = []
    seen_ids: set[str] = set()
    dim: int | None = None
    normalized = False
    scorer_names: set[str] = set()

    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=line_no)
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", line=line_no)

            if "meta" in obj and "id" not in obj:
                meta = obj["meta"]
                if "embedding_dim" in meta:
                    dim = int(meta["embedding_dim"])
                normalized = bool(meta.get("normalized", False))
                continue

            for key in ("id", "source", "candidates"):
                if key not in obj:
                    raise MissingField(f"instance missing {key!r}", line=line_no)
            inst_id = str(obj["id"])
            if inst_id in seen_ids:
                raise ParseError(f"duplicate instance id {inst_id!r}", line=line_no)
            seen_ids.add(inst_id)
            if not obj["candidates"]:
                raise ParseError(f"instance {inst_id!r} has no candidates", line=line_no)

            cands: list[Candidate] = []
            for pos, entry in enumerate(obj["candidates"]):
                cand, emb_len = _parse_candidate(entry, pos, line_no, dim, normalized)
                if dim is None:
                    dim = emb_len
                if cand.scores:
                    scorer_names.update(cand.scores)
                cands.append(cand)

            if any(c.multiplicity > 1 for c in cands):
                texts = [c.text for c in cands]
                if len(set(texts)) != len(texts):
                    raise ParseError(
                        "multiplicity may only be used with unique candidate lists",
                        line=line_no,
                    )
                cands = _expand_multiplicities(cands)
            instances.append(Instance(id=inst_id, source=str(obj["source"]), raw_candidates=cands))

    if not instances:
        raise ParseError(f"{path}: no instances found")
    assert dim is not None
    return Dataset(
        instances=instances,
        embedding_dim=dim,
        declared_scorers=sorted(scorer_names),
    )


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset back to JSONL (embeddings at float32 precision)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        header = {"meta": {"embedding_dim": dataset.embedding_dim, "normalized": True}}
        fh.write(json.dumps(header) + "\n")
        for inst in dataset.instances:
            cands = []
            for cand in inst.raw_candidates:
                entry = {
                    "text": cand.text,
                    "embedding": [float(v) for v in cand.embedding],
                    "logprob_sum": cand.logprob_sum,
                    "logprob_avg": cand.logprob_avg,
                }
                if cand.scores is not None:
                    entry["scores"] = cand.scores
                cands.append(entry)
            fh.write(
                json.dumps(
                    {"id": inst.id, "source": inst.source, "candidates": cands}
                )
                + "\n"
            )


def validation_summary(dataset: Dataset) -> dict:
    """Counts reported by the validate command."""
    raw_total = sum(len(i.raw_candidates) for i in dataset.instances)
    uniq_total = sum(len(i.unique_candidates) for i in dataset.instances)
    return {
        "instances": len(dataset.instances),
        "raw_candidates": raw_total,
        "unique_candidates": uniq_total,
        "dedup_ratio": uniq_total / raw_total if raw_total else 0.0,
        "embedding_dim": dataset.embedding_dim,
        "scorers": dataset.declared_scorers,
    }
