"""Expected-improvement acquisition and batched top-k selection.

EI(mu, sigma, best) = E[max(X - best, 0)] for X ~ Normal(mu, sigma), i.e.
sigma * (z * cdf(z) + pdf(z)) with z = (mu - best) / sigma. Below
sigma = 1e-12 the degenerate limit max(mu - best, 0) is used.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from . import backend, special
from .errors import NegativeSigma

SIGMA_FLOOR = 1e-12


class AcquisitionValue(NamedTuple):
    candidate_index: int
    ei: float


def expected_improvement(mu: float, sigma: float, best: float) -> float:
    """Closed-form expected improvement over the incumbent `best`."""
    if sigma < 0:
        raise NegativeSigma(f"sigma must be >= 0, got {sigma}")
    if sigma < SIGMA_FLOOR:
        return max(mu - best, 0.0)
    z = (mu - best) / sigma
    value = sigma * (z * special.normal_cdf(z) + special.normal_pdf(z))
    return max(value, 0.0)


def expected_improvement_batch(
    mu: np.ndarray, sigma: np.ndarray, best: float
) -> np.ndarray:
    """Vectorized EI over query arrays (backend hot kernel)."""
    mu = np.ascontiguousarray(mu, dtype=np.float64)
    sigma = np.ascontiguousarray(sigma, dtype=np.float64)
    if np.any(sigma < 0):
        raise NegativeSigma("sigma must be >= 0")
    return backend.expected_improvement(mu, sigma, best)


def top_k(scores: Sequence[AcquisitionValue], k: int) -> list[int]:
    """Candidate indices of the k largest acquisition values.

    Ties break toward the smaller candidate index; output is ordered by
    descending value then ascending index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(scores, key=lambda v: (-v.ei, v.candidate_index))
    return [v.candidate_index for v in ranked[: min(k, len(ranked))]]
