"""Exact Gaussian-process posterior conditioning.

With observed inputs A, observed values f(A), prior covariance K and
observation noise s2, the posterior at a query point a (zero prior mean) is

    mu_a    = K(a, A) (K(A, A) + s2 I)^-1 f(A)
    sigma_a = K(a, a) + s2 - K(a, A) (K(A, A) + s2 I)^-1 K(A, a)

computed via a Cholesky factorization and triangular solves, never an
explicit inverse. On factorization failure the diagonal term is escalated
tenfold up to 1e-2 before giving up; near-duplicate inputs are the usual
cause.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .errors import EmptyInput, NotPositiveDefinite, ShapeMismatch

MAX_DIAG_ESCALATION = 1e-2


@dataclass
class NormalizedScores:
    values: np.ndarray
    mean: float
    std: float
    degenerate: bool = False


def normalize_scores(raw: Sequence[float]) -> NormalizedScores:
    """Shift/scale to zero mean and unit population variance.

    Lists with (population) std below 1e-12 are flagged degenerate and map
    to all zeros.
    """
    arr = np.asarray(raw, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("cannot normalize an empty score list")
    mean = float(arr.mean())
    std = float(arr.std())
    if std < 1e-12:
        return NormalizedScores(
            values=np.zeros_like(arr), mean=mean, std=0.0, degenerate=True
        )
    return NormalizedScores(values=(arr - mean) / std, mean=mean, std=std)


@dataclass
class PosteriorStats:
    mean: np.ndarray
    variance: np.ndarray
    noise_used: float


def _chol_with_escalation(k_obs: np.ndarray, noise: float) -> tuple[np.ndarray, float]:
    diag = noise
    while True:
        try:
            L = cholesky(
                k_obs + diag * np.eye(k_obs.shape[0]), lower=True, check_finite=False
            )
            return L, diag
        except np.linalg.LinAlgError:
            pass
        diag = 1e-6 if diag <= 0 else diag * 10.0
        if diag > MAX_DIAG_ESCALATION * (1 + 1e-12):
            raise NotPositiveDefinite(
                f"kernel matrix not positive definite even with diagonal {diag:.0e}"
            )


def posterior_from_matrices(
    k_obs: np.ndarray,
    k_cross: np.ndarray,
    prior_diag: np.ndarray,
    values: np.ndarray,
    noise: float = 0.0,
) -> PosteriorStats:
    """Posterior mean/variance from precomputed kernel blocks.

    k_obs: (m, m) kernel among observed points; k_cross: (q, m) kernel
    between queries and observed; prior_diag: (q,) kernel self-values of the
    queries. `noise` is added to the k_obs diagonal and to the prior
    variance.
    """
    k_obs = np.asarray(k_obs, dtype=np.float64)
    k_cross = np.atleast_2d(np.asarray(k_cross, dtype=np.float64))
    values = np.asarray(values, dtype=np.float64)
    prior_diag = np.asarray(prior_diag, dtype=np.float64)
    m = k_obs.shape[0]
    if k_obs.shape != (m, m):
        raise ShapeMismatch("k_obs must be square")
    if values.shape != (m,):
        raise ShapeMismatch(f"values has shape {values.shape}, expected ({m},)")
    if k_cross.shape[1] != m:
        raise ShapeMismatch(
            f"k_cross has {k_cross.shape[1]} columns, expected {m}"
        )
    if k_cross.shape[0] != prior_diag.shape[0]:
        raise ShapeMismatch("prior_diag length must match number of queries")
    if noise < 0:
        raise ValueError("noise must be >= 0")

    L, used = _chol_with_escalation(k_obs, noise)
    alpha = cho_solve((L, True), values, check_finite=False)
    mean = k_cross @ alpha
    v = solve_triangular(L, k_cross.T, lower=True, check_finite=False)
    variance = prior_diag + used - np.einsum("ij,ij->j", v, v)
    np.maximum(variance, 0.0, out=variance)
    return PosteriorStats(mean=mean, variance=variance, noise_used=used)


def posterior(
    query: Sequence,
    observed: Sequence,
    values: NormalizedScores | Sequence[float],
    kernel: Callable,
    noise: float = 0.0,
) -> PosteriorStats:
    """Posterior over arbitrary observation keys with a kernel callable.

    The callable receives two keys and returns their prior covariance. The
    matrix-block path (`posterior_from_matrices`) is the hot one; this
    wrapper exists for small systems and tests.
    """
    if len(observed) == 0:
        raise EmptyInput("need at least one observation")
    vals = values.values if isinstance(values, NormalizedScores) else np.asarray(values, dtype=np.float64)
    if len(vals) != len(observed):
        raise ShapeMismatch("values length must match observed length")
    k_obs = np.array([[kernel(a, b) for b in observed] for a in observed])
    k_cross = np.array([[kernel(a, b) for b in observed] for a in query])
    prior_diag = np.array([kernel(a, a) for a in query])
    if len(query) == 0:
        k_cross = k_cross.reshape(0, len(observed))
        prior_diag = prior_diag.reshape(0)
    return posterior_from_matrices(k_obs, k_cross, prior_diag, vals, noise=noise)
