"""Quality-cost curves, normalized AUC, rank correlation, one-sided paired
t-tests, and bandwidth tuning.

A trajectory is the best-so-far raw score after each oracle call; the curve
at budget b averages, over instances, the trajectory value after
min(b, len(trajectory)) calls. The t-distribution tail uses the regularized
incomplete beta from `special` (no scipy.stats dependency, so it can be
cross-checked against a numerical-integration oracle).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace
from typing import Mapping, Sequence

import numpy as np

from . import backend
from .data import Dataset
from .errors import Degenerate, LengthMismatch, TooFewPoints
from .special import student_t_sf
from .strategies import RerankConfig, bayesopt_rerank
from .scorers import Scorer


@dataclass
class QualityCostCurve:
    budgets: list[int]
    mean_scores: list[float]
    pct_best: list[float] | None = None


def best_at_budget(trajectory: Sequence[float], budget: int) -> float:
    if not len(trajectory):
        raise ValueError("empty trajectory")
    return trajectory[min(budget, len(trajectory)) - 1]


def build_curve(
    trajectories: Mapping[str, Sequence[float]],
    budgets: Sequence[int],
    exhaustive_best: Mapping[str, float] | None = None,
) -> QualityCostCurve:
    """Average best-so-far score per budget; optionally the fraction of
    instances whose selection matches the exhaustive maximum."""
    budgets = [int(b) for b in budgets]
    if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise ValueError("budgets must be strictly ascending")
    if not trajectories:
        raise ValueError("no trajectories")
    for inst_id, traj in trajectories.items():
        if not len(traj):
            raise ValueError(f"empty trajectory for instance {inst_id!r}")

    mean_scores = []
    pct_best: list[float] | None = [] if exhaustive_best is not None else None
    for b in budgets:
        at_b = {i: best_at_budget(t, b) for i, t in trajectories.items()}
        mean_scores.append(float(np.mean(list(at_b.values()))))
        if pct_best is not None:
            hits = [
                at_b[i] >= exhaustive_best[i] - 1e-12 for i in trajectories
            ]
            pct_best.append(float(np.mean(hits)))
    return QualityCostCurve(budgets=budgets, mean_scores=mean_scores, pct_best=pct_best)


def normalized_auc(curve: QualityCostCurve) -> float:
    """Trapezoidal area of the curve divided by its budget span."""
    if len(curve.budgets) < 2:
        raise TooFewPoints("normalized AUC needs at least 2 budget points")
    area = float(np.trapezoid(curve.mean_scores, curve.budgets))
    return area / (curve.budgets[-1] - curve.budgets[0])


@dataclass
class SignificanceReport:
    t_statistic: float
    p_value: float
    n_pairs: int
    direction: str
    zero_variance: bool = False


def paired_t_one_sided(a: Sequence[float], b: Sequence[float]) -> SignificanceReport:
    """One-sided paired Student's t-test of the hypothesis "a better than b".

    t = mean(d) / (sd(d) / sqrt(n)) on d = a - b with sample (n-1) standard
    deviation; p is the upper tail of the t distribution with n-1 degrees of
    freedom. Constant differences are flagged (p undefined).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"paired samples differ in shape: {a.shape} vs {b.shape}")
    n = a.size
    if n < 2:
        raise LengthMismatch("need at least 2 pairs")
    d = a - b
    sd = float(d.std(ddof=1))
    if sd < 1e-12:
        return SignificanceReport(
            t_statistic=math.nan,
            p_value=math.nan,
            n_pairs=n,
            direction="a>b",
            zero_variance=True,
        )
    t = float(d.mean()) / (sd / math.sqrt(n))
    return SignificanceReport(
        t_statistic=t,
        p_value=student_t_sf(t, n - 1),
        n_pairs=n,
        direction="a>b",
    )


def kendall_tau_c(a: Sequence[float], b: Sequence[float]) -> float:
    """Stuart's tau-c rank correlation, robust to ties.

    tau_c = (concordant - discordant) * 2m / (n^2 (m-1)) with m the smaller
    number of distinct values in either list; pairs are enumerated directly.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"lists differ in shape: {a.shape} vs {b.shape}")
    n = a.size
    if n < 2:
        raise LengthMismatch("need at least 2 items")
    m = min(len(np.unique(a)), len(np.unique(b)))
    if m < 2:
        raise Degenerate("tau-c undefined when either list is constant")
    conc, disc = backend.kendall_counts(a, b)
    return (conc - disc) * 2.0 * m / (n * n * (m - 1.0))


def tune_bandwidth(
    dev: Dataset,
    scorer: Scorer,
    grid: Sequence[float],
    cfg: RerankConfig,
) -> float:
    """Grid-search the RBF bandwidth on a dev set.

    Each grid value runs the posterior-guided strategy at budget 100 with
    batch size 1 and is judged by the mean selected score; ties go to the
    smaller bandwidth.
    """
    if not len(grid):
        raise ValueError("bandwidth grid must be nonempty")
    best_w = None
    best_mean = -np.inf
    for w in sorted(float(g) for g in grid):
        tuned = dc_replace(cfg, bandwidth=w, budget=100, batch_size=1)
        scores = [
            bayesopt_rerank(inst, scorer, tuned).selected_score
            for inst in dev.instances
        ]
        mean = float(np.mean(scores))
        if mean > best_mean:
            best_mean = mean
            best_w = w
    assert best_w is not None
    return best_w


def significance_matrix(
    per_method_scores: Mapping[str, Mapping[str, np.ndarray]],
    threshold: float = 0.01,
) -> dict:
    """Head-to-head one-sided comparisons between methods.

    `per_method_scores[method][label]` is the per-instance selected-score
    vector at one comparison label (a budget, or "pooled" for instance x
    budget pairs pooled together). Each cell records whether the row method
    is better, worse, or tied against the column method at the threshold.
    """
    methods = sorted(per_method_scores)
    labels: list[str] = sorted(
        {label for scores in per_method_scores.values() for label in scores}
    )
    out: dict = {"threshold": threshold, "labels": {}}
    for label in labels:
        cells = {}
        for row in methods:
            for col in methods:
                if row == col:
                    continue
                a = per_method_scores[row].get(label)
                b = per_method_scores[col].get(label)
                if a is None or b is None:
                    continue
                rep = paired_t_one_sided(a, b)
                if rep.zero_variance:
                    # Constant difference: direction is deterministic.
                    mean_diff = float(np.mean(np.asarray(a) - np.asarray(b)))
                    if mean_diff > 0:
                        verdict = "better"
                    elif mean_diff < 0:
                        verdict = "worse"
                    else:
                        verdict = "tie"
                elif rep.p_value < threshold:
                    verdict = "better"
                else:
                    back = paired_t_one_sided(b, a)
                    verdict = "worse" if back.p_value < threshold else "tie"
                cells[f"{row} vs {col}"] = {
                    "verdict": verdict,
                    "t": None if math.isnan(rep.t_statistic) else rep.t_statistic,
                    "p": None if math.isnan(rep.p_value) else rep.p_value,
                    "n": rep.n_pairs,
                }
        out["labels"][label] = cells
    return out
