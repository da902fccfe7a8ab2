import numpy as np
import pytest

from bayesrank.data import Candidate, Instance
from bayesrank.errors import EmptyCandidateList
from bayesrank.kernels import ScoreCovariance
from bayesrank.scorers import Scorer
from bayesrank.strategies import (
    METHODS,
    RerankConfig,
    bayesopt_proxy_rerank,
    bayesopt_rerank,
    exhaustive,
    hill_climbing,
    logprob_sorted,
    proxy_first,
    run_method,
    uniq_random,
)
from bayesrank.synthetic import SyntheticProxyScorer, SyntheticScorer, make_instance


class TableScorer(Scorer):
    """Scores looked up from an explicit {text: value} table."""

    kind = "precomputed"
    capability = "free"

    def __init__(self, table, name="table"):
        super().__init__(name)
        self.table = table

    def _score_one(self, instance, candidate_index):
        return self.table[instance.raw_candidates[candidate_index].text]


class AffineScorer(Scorer):
    kind = "synthetic"

    def __init__(self, base, scale, shift):
        super().__init__(base.name)
        self.base, self.scale, self.shift = base, scale, shift

    def _score_one(self, instance, candidate_index):
        return self.scale * self.base._score_one(instance, candidate_index) + self.shift


def _line_instance():
    """Three collinear embeddings with scores increasing along the line."""
    embs = [np.array([x, 0.0], dtype=np.float32) for x in (0.0, 0.5, 1.0)]
    cands = [
        Candidate(index=i, text=f"t{i}", embedding=e, logprob_avg=-1.0, logprob_sum=-5.0)
        for i, e in enumerate(embs)
    ]
    return Instance(id="line", source="s", raw_candidates=cands)


@pytest.fixture(scope="module")
def scorer():
    return SyntheticScorer(seed=0)


@pytest.fixture(scope="module")
def instances():
    return [
        make_instance(f"st-{i:02d}", 50, 8, seed=31, scorer_seed=0, duplicate_rate=0.2)
        for i in range(10)
    ]


def _cov_for(scorer, proxy, rho):
    return ScoreCovariance(
        [scorer.name, proxy.name], np.array([[1.0, rho], [rho, 1.0]])
    )


class TestExhaustive:
    def test_scores_every_unique(self, instances, scorer):
        r = exhaustive(instances[0], scorer)
        assert r.main_calls == len(instances[0].unique_candidates)
        assert len(r.trajectory) == r.main_calls

    def test_tie_break_lowest_index(self):
        inst = _line_instance()
        r = exhaustive(inst, TableScorer({"t0": 1.0, "t1": 1.0, "t2": 1.0}))
        assert r.selected_index == 0

    def test_empty_instance_rejected(self, scorer):
        inst = Instance(id="empty", source="s", raw_candidates=[])
        with pytest.raises(EmptyCandidateList):
            exhaustive(inst, scorer)


class TestBudgetExhaustion:
    """Budget >= |C| must match the exhaustive argmax for every method."""

    def test_all_methods(self, instances, scorer):
        proxy = SyntheticProxyScorer(0.9, seed=0)
        cov = _cov_for(scorer, proxy, 0.9)
        for inst in instances:
            n = len(inst.unique_candidates)
            cfg = RerankConfig(budget=n + 10, seed=5, bandwidth=0.2, proxy_count=n)
            want = exhaustive(inst, scorer).selected_score
            for method in METHODS:
                if method == "exhaustive":
                    continue
                r = run_method(method, inst, scorer, cfg, proxy=proxy, score_cov=cov)
                assert r.selected_score == want, (method, inst.id)
                assert r.main_calls == n


class TestInvariantsAcrossMethods:
    def test_trajectory_monotone_and_selected_is_max(self, instances, scorer):
        proxy = SyntheticProxyScorer(0.6, seed=0)
        cov = _cov_for(scorer, proxy, 0.6)
        cfg = RerankConfig(budget=20, seed=2, bandwidth=0.2, proxy_count=30)
        for inst in instances[:5]:
            for method in METHODS:
                r = run_method(method, inst, scorer, cfg, proxy=proxy, score_cov=cov)
                traj = r.trajectory
                assert all(x <= y for x, y in zip(traj, traj[1:]))
                assert r.selected_score == traj[-1]
                assert r.main_calls <= min(cfg.budget, len(inst.unique_candidates)) or method == "exhaustive"
                assert len(set(r.main_order)) == len(r.main_order)

    def test_deterministic_under_fixed_seed(self, instances, scorer):
        proxy = SyntheticProxyScorer(0.9, seed=0)
        cov = _cov_for(scorer, proxy, 0.9)
        cfg = RerankConfig(budget=15, seed=9, bandwidth=0.2, proxy_count=25)
        for method in METHODS:
            r1 = run_method(method, instances[0], scorer, cfg, proxy=proxy, score_cov=cov)
            r2 = run_method(method, instances[0], scorer, cfg, proxy=proxy, score_cov=cov)
            assert r1.main_order == r2.main_order
            assert r1.trajectory == r2.trajectory

    def test_instance_independence(self, instances, scorer):
        # Rerunning an instance alone gives the same result as within a batch.
        cfg = RerankConfig(budget=12, seed=4, bandwidth=0.2)
        alone = bayesopt_rerank(instances[3], scorer, cfg)
        for inst in instances:
            bayesopt_rerank(inst, scorer, cfg)
        again = bayesopt_rerank(instances[3], scorer, cfg)
        assert alone.main_order == again.main_order

    def test_affine_invariance_of_selection_sequence(self, instances, scorer):
        proxy = SyntheticProxyScorer(0.9, seed=0)
        affine_main = AffineScorer(scorer, 3.0, 0.5)
        affine_proxy = AffineScorer(proxy, 3.0, 0.5)
        cov = _cov_for(scorer, proxy, 0.9)
        cfg = RerankConfig(budget=18, seed=6, bandwidth=0.2, proxy_count=25)
        for inst in instances[:5]:
            for method in METHODS:
                base = run_method(method, inst, scorer, cfg, proxy=proxy, score_cov=cov)
                moved = run_method(
                    method, inst, affine_main, cfg, proxy=affine_proxy, score_cov=cov
                )
                assert base.main_order == moved.main_order, (method, inst.id)


class TestUniqRandom:
    def test_same_seed_identical(self, instances, scorer):
        cfg = RerankConfig(budget=10, seed=3)
        a = uniq_random(instances[0], scorer, cfg)
        b = uniq_random(instances[0], scorer, cfg)
        assert a.main_order == b.main_order

    def test_different_seeds_differ(self, instances, scorer):
        a = uniq_random(instances[0], scorer, RerankConfig(budget=10, seed=3))
        b = uniq_random(instances[0], scorer, RerankConfig(budget=10, seed=4))
        assert a.main_order != b.main_order

    def test_all_duplicates_single_call(self, scorer):
        emb = np.array([1.0, 0.0], dtype=np.float32)
        cands = [
            Candidate(index=i, text="same", embedding=emb, logprob_avg=-1.0, logprob_sum=-2.0)
            for i in range(5)
        ]
        inst = Instance(id="alldup", source="s", raw_candidates=cands)
        r = uniq_random(inst, TableScorer({"same": 0.4}), RerankConfig(budget=10, seed=0))
        assert r.main_calls == 1

    def test_duplicate_mass_biases_early_selection(self):
        # A text occupying most raw slots should usually survive the shuffle
        # near the front.
        emb = np.eye(2, dtype=np.float32)
        cands = [
            Candidate(index=0, text="rare", embedding=emb[0], logprob_avg=-1.0, logprob_sum=-2.0)
        ] + [
            Candidate(index=i, text="common", embedding=emb[1], logprob_avg=-1.0, logprob_sum=-2.0)
            for i in range(1, 21)
        ]
        inst = Instance(id="mass", source="s", raw_candidates=cands)
        table = TableScorer({"rare": 0.0, "common": 1.0})
        firsts = [
            uniq_random(inst, table, RerankConfig(budget=1, seed=s)).main_order[0]
            for s in range(40)
        ]
        common_first = sum(1 for f in firsts if f != 0)
        assert common_first > 30


class TestLogprobSorted:
    def test_most_probable_first(self):
        inst = _line_instance()
        inst.raw_candidates[0].logprob_avg = -0.5
        inst.raw_candidates[1].logprob_avg = -0.1
        inst.raw_candidates[2].logprob_avg = -0.9
        r = logprob_sorted(inst, TableScorer({"t0": 0.0, "t1": 1.0, "t2": 2.0}), RerankConfig(budget=1), mode="avg")
        assert r.main_order == [1]

    def test_sum_vs_avg_orderings_differ(self, instances, scorer):
        # Independent reference sort over (logprob, index).
        inst = instances[0]
        cfg = RerankConfig(budget=len(inst.unique_candidates), seed=0)
        r_avg = logprob_sorted(inst, scorer, cfg, mode="avg")
        r_sum = logprob_sorted(inst, scorer, cfg, mode="sum")
        want_avg = [
            c.index
            for c in sorted(inst.unique_candidates, key=lambda c: (-c.logprob_avg, c.index))
        ]
        want_sum = [
            c.index
            for c in sorted(inst.unique_candidates, key=lambda c: (-c.logprob_sum, c.index))
        ]
        assert r_avg.main_order == want_avg
        assert r_sum.main_order == want_sum
        assert want_avg != want_sum


class TestHillClimbing:
    def test_hand_traced_walk_on_collinear_points(self):
        # Start at the far end; each step moves to the nearest unobserved
        # point of the incumbent best, which walks up the line.
        inst = _line_instance()
        table = TableScorer({"t0": 0.1, "t1": 0.2, "t2": 0.3})
        cfg = RerankConfig(budget=3, seed=0, init_size=2)
        r = hill_climbing(inst, table, cfg)
        assert set(r.main_order[:2]) != {0}
        assert r.main_calls == 3
        assert r.selected_index == 2
        # The third evaluation is the unobserved point nearest the best of
        # the first two.
        first_two = r.main_order[:2]
        best_of_init = max(first_two, key=lambda i: table.table[f"t{i}"])
        remaining = ({0, 1, 2} - set(first_two)).pop()
        assert r.main_order[2] == remaining
        dists = {i: abs(0.5 * i - 0.5 * best_of_init) for i in (0, 1, 2)}
        assert dists[remaining] == min(dists[i] for i in (0, 1, 2) if i not in first_two)

    def test_identical_embeddings_fall_back_to_index_order(self):
        emb = np.array([1.0, 0.0], dtype=np.float32)
        cands = [
            Candidate(index=i, text=f"t{i}", embedding=emb, logprob_avg=-1.0, logprob_sum=-2.0)
            for i in range(6)
        ]
        inst = Instance(id="flat", source="s", raw_candidates=cands)
        table = TableScorer({f"t{i}": float(i) for i in range(6)})
        cfg = RerankConfig(budget=6, seed=1, init_size=2)
        r = hill_climbing(inst, table, cfg)
        after_init = r.main_order[2:]
        assert after_init == sorted(after_init)


class TestBayesOpt:
    def test_single_candidate(self, scorer):
        inst = make_instance("solo", 1, 8, seed=9, scorer_seed=0)
        r = bayesopt_rerank(inst, scorer, RerankConfig(budget=10, seed=0))
        assert r.main_calls == 1

    def test_budget_respected_with_partial_batch(self, instances, scorer):
        cfg = RerankConfig(budget=13, seed=1, batch_size=5, bandwidth=0.2)
        r = bayesopt_rerank(instances[1], scorer, cfg)
        assert r.main_calls == 13

    def test_batch_equals_candidate_count(self, instances, scorer):
        n = len(instances[2].unique_candidates)
        cfg = RerankConfig(budget=n, seed=1, batch_size=n, bandwidth=0.2)
        r = bayesopt_rerank(instances[2], scorer, cfg)
        assert r.main_calls == n

    def test_init_larger_than_budget_rejected(self, instances, scorer):
        with pytest.raises(ValueError):
            bayesopt_rerank(instances[0], scorer, RerankConfig(budget=3, init_size=5))

    def test_trajectory_prefix_property(self, instances, scorer):
        # A shorter-budget run is a prefix of a longer one (same seed).
        long = bayesopt_rerank(
            instances[0], scorer, RerankConfig(budget=30, seed=2, bandwidth=0.2)
        )
        short = bayesopt_rerank(
            instances[0], scorer, RerankConfig(budget=12, seed=2, bandwidth=0.2)
        )
        assert long.main_order[:12] == short.main_order
        # Same for a batched run: partial batches take the top EI prefix.
        long_b = bayesopt_rerank(
            instances[0], scorer, RerankConfig(budget=45, seed=2, batch_size=10, bandwidth=0.2)
        )
        short_b = bayesopt_rerank(
            instances[0], scorer, RerankConfig(budget=20, seed=2, batch_size=10, bandwidth=0.2)
        )
        assert long_b.main_order[:20] == short_b.main_order

    def test_wall_time_stages_present(self, instances, scorer):
        r = bayesopt_rerank(instances[0], scorer, RerankConfig(budget=10, seed=0, bandwidth=0.2))
        assert set(r.wall_times) == {"Similarities", "BayesOpt+GP", "Scoring", "Total"}


class TestBayesOptProxy:
    def test_reduces_to_plain_when_proxy_is_main(self, instances, scorer):
        cov = ScoreCovariance([scorer.name], np.array([[1.0]]))
        cfg = RerankConfig(budget=20, seed=5, bandwidth=0.2, proxy_count=5, init_size=5)
        for inst in instances[:4]:
            plain = bayesopt_rerank(inst, scorer, cfg)
            joint = bayesopt_proxy_rerank(inst, scorer, scorer, cov, cfg)
            assert plain.main_order == joint.main_order
            assert plain.selected_index == joint.selected_index

    def test_proxy_calls_counted(self, instances, scorer):
        proxy = SyntheticProxyScorer(0.9, seed=0)
        cov = _cov_for(scorer, proxy, 0.9)
        cfg = RerankConfig(budget=15, seed=5, bandwidth=0.2, proxy_count=30)
        r = bayesopt_proxy_rerank(instances[0], scorer, proxy, cov, cfg)
        assert r.proxy_calls == 30
        assert r.main_calls == 15

    def test_unknown_scorer_in_covariance(self, instances, scorer):
        from bayesrank.errors import UnknownScorer

        proxy = SyntheticProxyScorer(0.9, seed=0)
        cov = ScoreCovariance(["other"], np.array([[1.0]]))
        cfg = RerankConfig(budget=10, seed=0, proxy_count=10)
        with pytest.raises(UnknownScorer):
            bayesopt_proxy_rerank(instances[0], scorer, proxy, cov, cfg)

    def test_proxy_count_required(self, instances, scorer):
        proxy = SyntheticProxyScorer(0.9, seed=0)
        cov = _cov_for(scorer, proxy, 0.9)
        with pytest.raises(ValueError):
            bayesopt_proxy_rerank(
                instances[0], scorer, proxy, cov, RerankConfig(budget=10, proxy_count=0)
            )


class TestProxyFirst:
    def test_perfect_proxy_full_coverage_selects_best(self, instances, scorer):
        n = len(instances[0].unique_candidates)
        cfg = RerankConfig(budget=1, seed=0, proxy_count=n, init_size=2)
        r = proxy_first(instances[0], scorer, scorer, cfg)
        want = exhaustive(instances[0], scorer).selected_score
        assert r.selected_score == want
        assert r.main_calls == 1

    def test_budget_beyond_proxy_extends_in_shuffled_order(self, instances, scorer):
        proxy = SyntheticProxyScorer(0.9, seed=0)
        n = len(instances[0].unique_candidates)
        cfg = RerankConfig(budget=n, seed=0, proxy_count=10)
        r = proxy_first(instances[0], scorer, proxy, cfg)
        assert r.main_calls == n
        assert r.proxy_calls == 10

    def test_head_ranked_by_proxy(self, instances, scorer):
        proxy = SyntheticProxyScorer(0.9, seed=0)
        cfg = RerankConfig(budget=5, seed=3, proxy_count=20)
        r = proxy_first(instances[1], scorer, proxy, cfg)
        # The five main-scored candidates carry the five highest proxy values
        # among the proxy subset.
        inst = instances[1]
        uniq = inst.unique_candidates
        import bayesrank.streams as streams

        perm = streams.instance_stream(cfg.seed, inst.id).permutation(len(uniq))
        subset = [int(p) for p in perm[:20]]
        pvals = {p: proxy.score(inst, uniq[p].index) for p in subset}
        want = sorted(subset, key=lambda p: (-pvals[p], p))[:5]
        assert r.main_order == [uniq[p].index for p in want]


@pytest.fixture(scope="module")
def benchmark_instances():
    return [
        make_instance(f"ex-{i:03d}", 200, 8, seed=99, scorer_seed=0)
        for i in range(120)
    ]


class TestSyntheticBenchmarkExamples:
    """Moderate-size paired comparisons on generated instances."""

    @staticmethod
    def _at(results, budget):
        return np.array(
            [r.trajectory[min(budget, len(r.trajectory)) - 1] for r in results]
        )

    def test_guided_search_beats_random_prefix_usually(self, benchmark_instances, scorer):
        cfg = RerankConfig(budget=10, seed=13, bandwidth=0.2)
        bo = self._at(
            [bayesopt_rerank(i, scorer, cfg) for i in benchmark_instances], 10
        )
        ur = self._at(
            [uniq_random(i, scorer, cfg) for i in benchmark_instances], 10
        )
        assert np.mean(bo >= ur) >= 0.6

    def test_proxyfirst_beats_random_with_good_proxy(self, benchmark_instances, scorer):
        from bayesrank.evaluation import paired_t_one_sided

        proxy = SyntheticProxyScorer(0.9, seed=0)
        cfg = RerankConfig(budget=10, seed=13, bandwidth=0.2, proxy_count=50)
        pf = self._at(
            [proxy_first(i, scorer, proxy, cfg) for i in benchmark_instances], 10
        )
        ur = self._at(
            [uniq_random(i, scorer, cfg) for i in benchmark_instances], 10
        )
        assert paired_t_one_sided(pf, ur).p_value < 0.01


class TestRunMethodDispatch:
    def test_unknown_method(self, instances, scorer):
        with pytest.raises(ValueError, match="unknown method"):
            run_method("magic", instances[0], scorer, RerankConfig(budget=5))

    def test_missing_proxy_arguments(self, instances, scorer):
        with pytest.raises(ValueError):
            run_method("bayesopt-proxy", instances[0], scorer, RerankConfig(budget=5))
        with pytest.raises(ValueError):
            run_method("proxyfirst", instances[0], scorer, RerankConfig(budget=5))

    def test_json_payload_schema(self, instances, scorer):
        r = bayesopt_rerank(instances[0], scorer, RerankConfig(budget=8, seed=0, bandwidth=0.2))
        obj = r.to_json_obj()
        assert set(obj) == {
            "id",
            "method",
            "selected_index",
            "selected_score",
            "main_calls",
            "proxy_calls",
            "trajectory",
            "wall_times",
        }
