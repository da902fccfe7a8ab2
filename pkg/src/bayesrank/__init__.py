"""Budgeted n-best reranking with Gaussian-process-guided candidate selection."""

__version__ = "0.1.0"

from .data import Candidate, Dataset, Instance, dedup, load_dataset, normalize_embedding, save_dataset
from .kernels import GramMatrix, ScoreCovariance, estimate_score_covariance, gram, multi_kernel, rbf
from .gp import NormalizedScores, PosteriorStats, normalize_scores, posterior, posterior_from_matrices
from .acquisition import AcquisitionValue, expected_improvement, expected_improvement_batch, top_k
from .strategies import (
    METHODS,
    RerankConfig,
    RerankResult,
    bayesopt_proxy_rerank,
    bayesopt_rerank,
    exhaustive,
    hill_climbing,
    logprob_sorted,
    proxy_first,
    run_method,
    uniq_random,
)
from .scorers import CallLedger, ExternalScorer, LogprobScorer, PrecomputedScorer, Scorer, parse_scorer_spec
from .synthetic import SyntheticProxyScorer, SyntheticScorer, make_dataset
from .evaluation import (
    QualityCostCurve,
    SignificanceReport,
    build_curve,
    kendall_tau_c,
    normalized_auc,
    paired_t_one_sided,
    significance_matrix,
    tune_bandwidth,
)

__all__ = [name for name in dir() if not name.startswith("_")]
