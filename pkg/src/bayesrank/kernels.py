"""Covariance kernels: RBF over embeddings, empirical covariance between
scoring functions, and their product for mixed-fidelity observations.

The RBF covariance of two points a, a' is exp(-||a - a'||^2 / (2 w^2)) with
bandwidth w > 0. Gram matrices carry an explicit diagonal jitter for
numerical positive-definiteness; off-diagonal entries are exact kernel
values.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import backend
from .data import Dataset
from .errors import DegenerateInstance, DimensionMismatch, MissingScores

COVARIANCE_CLAMP = 0.999


def rbf(a, b, bandwidth: float) -> float:
    """RBF kernel value for a single pair of vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape mismatch: {a.shape} vs {b.shape}")
    if bandwidth <= 0 or not np.isfinite(bandwidth):
        raise ValueError("bandwidth must be finite and positive")
    d2 = float(np.sum((a - b) ** 2))
    return float(np.exp(-d2 / (2.0 * bandwidth * bandwidth)))


@dataclass
class GramMatrix:
    matrix: np.ndarray
    jitter: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def gram(embeddings, bandwidth: float, jitter: float = 1e-6) -> GramMatrix:
    """Pairwise RBF matrix with `jitter` added to the diagonal."""
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[0] == 0:
        raise DimensionMismatch("embeddings must be a nonempty (n, dim) array")
    if jitter < 0:
        raise ValueError("jitter must be >= 0")
    if bandwidth <= 0 or not np.isfinite(bandwidth):
        raise ValueError("bandwidth must be finite and positive")
    return GramMatrix(matrix=backend.rbf_gram(emb, bandwidth, jitter), jitter=jitter)


@dataclass
class ScoreCovariance:
    scorer_names: list[str]
    matrix: np.ndarray

    def index_of(self, name: str) -> int:
        try:
            return self.scorer_names.index(name)
        except ValueError:
            raise KeyError(name)

    def value(self, name_a: str, name_b: str) -> float:
        return float(self.matrix[self.index_of(name_a), self.index_of(name_b)])

    def clamped(self) -> "ScoreCovariance":
        """Copy with off-diagonal entries clipped to +-0.999, keeping the
        joint two-fidelity system strictly positive definite."""
        out = np.clip(self.matrix, -COVARIANCE_CLAMP, COVARIANCE_CLAMP)
        np.fill_diagonal(out, np.diag(self.matrix))
        return ScoreCovariance(scorer_names=list(self.scorer_names), matrix=out)

    def to_json(self) -> str:
        clamped = self.clamped()
        return json.dumps(
            {"scorers": clamped.scorer_names, "matrix": clamped.matrix.tolist()},
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "ScoreCovariance":
        obj = json.loads(text)
        return cls(
            scorer_names=[str(s) for s in obj["scorers"]],
            matrix=np.asarray(obj["matrix"], dtype=np.float64),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ScoreCovariance":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def estimate_score_covariance(dev: Dataset, scorer_names: list[str]) -> ScoreCovariance:
    """Empirical covariance between scoring functions on a dev set.

    Scores are normalized per instance to zero mean and unit (population)
    variance per scorer, concatenated across instances, and compared
    pairwise. Instances where any scorer has zero within-instance variance
    are skipped with a warning.
    """
    if not scorer_names:
        raise ValueError("scorer_names must be nonempty")
    columns: dict[str, list[np.ndarray]] = {name: [] for name in scorer_names}
    skipped = 0
    for inst in dev.instances:
        norm_lists: dict[str, np.ndarray] = {}
        degenerate = False
        for name in scorer_names:
            vals = []
            for cand in inst.unique_candidates:
                if cand.scores is None or name not in cand.scores:
                    raise MissingScores(
                        f"instance {inst.id!r} lacks precomputed score {name!r}"
                    )
                vals.append(cand.scores[name])
            arr = np.asarray(vals, dtype=np.float64)
            std = float(arr.std())
            if std < 1e-12:
                degenerate = True
                break
            norm_lists[name] = (arr - arr.mean()) / std
        if degenerate:
            skipped += 1
            warnings.warn(
                f"skipping instance {inst.id!r}: constant scores carry no ranking signal"
            )
            continue
        for name in scorer_names:
            columns[name].append(norm_lists[name])
    if skipped == len(dev.instances):
        raise DegenerateInstance("all instances had zero within-instance variance")

    stacked = {name: np.concatenate(chunks) for name, chunks in columns.items()}
    n = len(scorer_names)
    total = len(next(iter(stacked.values())))
    matrix = np.empty((n, n))
    for i, a in enumerate(scorer_names):
        for j, b in enumerate(scorer_names):
            matrix[i, j] = float(np.dot(stacked[a], stacked[b])) / total
    return ScoreCovariance(scorer_names=list(scorer_names), matrix=matrix)


def multi_kernel(
    p: tuple[int, int], q: tuple[int, int], gram_matrix: GramMatrix, sc: ScoreCovariance
) -> float:
    """Product kernel over (candidate, scorer) observation pairs."""
    (i, k), (j, l) = p, q
    n = gram_matrix.n
    t = len(sc.scorer_names)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"candidate index out of range for {n} candidates")
    if not (0 <= k < t and 0 <= l < t):
        raise IndexError(f"scorer index out of range for {t} scorers")
    return float(gram_matrix.matrix[i, j] * sc.matrix[k, l])
