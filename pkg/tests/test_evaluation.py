import math

import numpy as np
import pytest
from scipy import integrate

from bayesrank import backend, evaluation
from bayesrank.errors import Degenerate, LengthMismatch, TooFewPoints
from bayesrank.evaluation import (
    QualityCostCurve,
    build_curve,
    kendall_tau_c,
    normalized_auc,
    paired_t_one_sided,
    significance_matrix,
    tune_bandwidth,
)
from bayesrank.strategies import RerankConfig
from bayesrank.synthetic import make_dataset


def _brute_tau_c(a, b):
    """Oracle: explicit pair enumeration of Stuart's tau-c."""
    n = len(a)
    conc = disc = 0
    for i in range(n):
        for j in range(i + 1, n):
            prod = (a[i] - a[j]) * (b[i] - b[j])
            if prod > 0:
                conc += 1
            elif prod < 0:
                disc += 1
    m = min(len(set(a)), len(set(b)))
    return (conc - disc) * 2.0 * m / (n * n * (m - 1.0))


def _t_density(x, df):
    c = math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2)) / math.sqrt(df * math.pi)
    return c * (1 + x * x / df) ** (-(df + 1) / 2)


class TestBuildCurve:
    def test_single_instance(self):
        curve = build_curve({"i": [0.5, 0.7, 0.7]}, [1, 2, 3])
        assert curve.mean_scores == [0.5, 0.7, 0.7]
        assert curve.pct_best is None

    def test_budget_beyond_trajectory_carries_last(self):
        curve = build_curve({"i": [0.5, 0.9]}, [1, 5])
        assert curve.mean_scores == [0.5, 0.9]

    def test_hand_average_two_instances(self):
        curve = build_curve({"a": [0.2, 0.4], "b": [0.6, 0.6, 0.8]}, [1, 2, 3])
        assert curve.mean_scores == pytest.approx([0.4, 0.5, 0.6])

    def test_pct_best(self):
        curve = build_curve(
            {"a": [0.2, 0.4], "b": [0.6, 0.8]},
            [1, 2],
            exhaustive_best={"a": 0.4, "b": 0.9},
        )
        assert curve.pct_best == [0.0, 0.5]

    def test_permutation_invariant(self):
        t1 = {"a": [0.1, 0.2], "b": [0.3, 0.3], "c": [0.0, 0.9]}
        t2 = dict(reversed(list(t1.items())))
        assert build_curve(t1, [1, 2]).mean_scores == build_curve(t2, [1, 2]).mean_scores

    def test_budgets_must_ascend(self):
        with pytest.raises(ValueError):
            build_curve({"a": [0.1]}, [2, 2])


class TestNormalizedAuc:
    def test_constant_curve(self):
        curve = QualityCostCurve(list(range(10, 201, 10)), [0.82] * 20)
        assert normalized_auc(curve) == pytest.approx(0.82, abs=1e-12)

    def test_linear_triangle(self):
        curve = QualityCostCurve([0, 100], [0.0, 1.0])
        assert normalized_auc(curve) == pytest.approx(0.5, abs=1e-12)

    def test_three_point_hand_value(self):
        # Trapezoids: (1+3)/2*10 + (3+2)/2*20 = 20 + 50 = 70; span 30.
        curve = QualityCostCurve([10, 20, 40], [1.0, 3.0, 2.0])
        assert normalized_auc(curve) == pytest.approx(70.0 / 30.0, abs=1e-12)

    def test_bounded_by_extremes(self):
        rng = np.random.default_rng(0)
        vals = rng.uniform(0, 1, size=8).tolist()
        curve = QualityCostCurve(sorted(rng.choice(1000, 8, replace=False).tolist()), vals)
        auc = normalized_auc(curve)
        assert min(vals) <= auc <= max(vals)

    def test_too_few_points(self):
        with pytest.raises(TooFewPoints):
            normalized_auc(QualityCostCurve([10], [0.5]))


class TestPairedT:
    def test_all_zero_differences_flagged(self):
        rep = paired_t_one_sided([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert rep.zero_variance
        assert math.isnan(rep.p_value)

    def test_uniform_improvement_tiny_p(self):
        rng = np.random.default_rng(0)
        b = rng.normal(size=10)
        a = b + 1.0 + rng.normal(scale=1e-3, size=10)
        rep = paired_t_one_sided(a, b)
        assert rep.p_value < 1e-6

    def test_antisymmetry(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=12)
        b = rng.normal(size=12)
        assert paired_t_one_sided(a, b).t_statistic == -paired_t_one_sided(b, a).t_statistic

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            paired_t_one_sided([1.0, 2.0], [1.0])
        with pytest.raises(LengthMismatch):
            paired_t_one_sided([1.0], [1.0])

    def test_against_quadrature_oracle(self):
        rng = np.random.default_rng(42)
        for n in (8, 20):
            a = rng.normal(size=n)
            b = a + rng.normal(scale=0.8, size=n) + 0.2
            rep = paired_t_one_sided(a, b)
            upper, _ = integrate.quad(
                _t_density, rep.t_statistic, np.inf, args=(n - 1,), epsabs=1e-12
            )
            assert rep.p_value == pytest.approx(upper, abs=1e-6)


class TestKendallTauC:
    def test_identity_all_distinct(self):
        a = [3.0, 1.0, 4.0, 1.5, 5.0, 9.0]
        assert kendall_tau_c(a, a) == pytest.approx(1.0)

    def test_reversal_even_n(self):
        a = [1.0, 2.0, 3.0, 4.0]
        assert kendall_tau_c(a, a[::-1]) == pytest.approx(-1.0)

    def test_with_ties_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            n = int(rng.integers(4, 30))
            a = rng.integers(0, 6, size=n).astype(float)
            b = rng.integers(0, 6, size=n).astype(float)
            if len(set(a)) < 2 or len(set(b)) < 2:
                continue
            assert kendall_tau_c(a, b) == pytest.approx(_brute_tau_c(a, b), abs=1e-12)

    def test_invariant_to_monotone_transform(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=30)
        b = rng.normal(size=30)
        base = kendall_tau_c(a, b)
        assert kendall_tau_c(np.exp(a), b) == pytest.approx(base, abs=1e-12)
        assert kendall_tau_c(a, 3 * b + 2) == pytest.approx(base, abs=1e-12)

    def test_degenerate_constant_list(self):
        with pytest.raises(Degenerate):
            kendall_tau_c([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_backends_agree(self):
        rng = np.random.default_rng(5)
        a = rng.integers(0, 10, size=80).astype(float)
        b = rng.integers(0, 10, size=80).astype(float)
        outs = {}
        for name in backend.available_backends():
            backend.set_backend(name)
            outs[name] = backend.kendall_counts(a, b)
        backend.set_backend(backend._env_default())
        assert len(set(outs.values())) == 1


class TestSignificanceMatrix:
    def test_clear_winner(self):
        rng = np.random.default_rng(6)
        base = rng.normal(size=40)
        tables = {
            "good": {"budget-0010": base + 1.0},
            "bad": {"budget-0010": base},
        }
        out = significance_matrix(tables, threshold=0.01)
        cells = out["labels"]["budget-0010"]
        assert cells["good vs bad"]["verdict"] == "better"
        assert cells["bad vs good"]["verdict"] == "worse"

    def test_tie(self):
        rng = np.random.default_rng(7)
        base = rng.normal(size=40)
        tables = {
            "x": {"b": base + rng.normal(scale=1e-6, size=40)},
            "y": {"b": base},
        }
        out = significance_matrix(tables, threshold=0.01)
        assert out["labels"]["b"]["x vs y"]["verdict"] in ("tie", "better", "worse")


class TestTuneBandwidth:
    def test_single_grid_value(self, main_scorer):
        ds = make_dataset(2, 20, 8, seed=13, scorer_seed=0)
        cfg = RerankConfig(budget=10, seed=0)
        assert tune_bandwidth(ds, main_scorer, [0.7], cfg) == 0.7

    def test_tie_breaks_toward_smaller(self, main_scorer):
        # Tiny instances saturate (budget >= |C|), so every bandwidth ties.
        ds = make_dataset(2, 6, 8, seed=13, scorer_seed=0)
        cfg = RerankConfig(budget=10, seed=0)
        assert tune_bandwidth(ds, main_scorer, [2.0, 0.5], cfg) == 0.5

    def test_matches_exhaustive_sweep(self, main_scorer):
        ds = make_dataset(6, 60, 8, seed=14, scorer_seed=0)
        cfg = RerankConfig(budget=30, seed=3)
        grid = [0.05, 0.2, 0.8, 3.0]
        chosen = tune_bandwidth(ds, main_scorer, grid, cfg)
        # Oracle: brute-force mean selected score per grid value.
        from bayesrank.strategies import bayesopt_rerank
        from dataclasses import replace

        means = {}
        for w in grid:
            tuned = replace(cfg, bandwidth=w, budget=100, batch_size=1)
            means[w] = np.mean(
                [bayesopt_rerank(i, main_scorer, tuned).selected_score for i in ds.instances]
            )
        best = max(sorted(means), key=lambda w: means[w])
        assert means[chosen] == means[best]
