"""Candidate-selection strategies under a scoring budget.

All strategies share the same contract: evaluate at most `budget` unique
candidates with the main scorer, record the best-so-far trajectory after
every call, and return the observed argmax (raw scores; ties go to the
smaller candidate index). Randomized strategies draw from the per-instance
stream derived from (seed, instance id), so each instance's outcome is
independent of dataset order and worker count.

The posterior-guided loop: score a small random subset, then repeatedly
renormalize the observed scores, condition the Gaussian process on them,
compute expected improvement for every unobserved candidate against the best
normalized observation, and evaluate the top batch. The multi-fidelity
variant additionally conditions on proxy scores observed up front, coupling
the two scorers through the product of the embedding kernel and their
empirical score covariance; only the main scorer is called inside the loop.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import backend, streams
from .acquisition import AcquisitionValue, expected_improvement_batch, top_k
from .data import Candidate, Instance, dedup
from .errors import EmptyCandidateList, MissingPrecomputedScore, UnknownScorer
from .gp import normalize_scores, posterior_from_matrices
from .kernels import ScoreCovariance
from .scorers import Scorer

METHODS = (
    "bayesopt",
    "bayesopt-proxy",
    "uniqrandom",
    "logprob-avg",
    "logprob-sum",
    "hillclimb",
    "proxyfirst",
    "exhaustive",
)


@dataclass(frozen=True)
class RerankConfig:
    budget: int
    batch_size: int = 1
    init_size: int = 5
    proxy_count: int = 0
    bandwidth: float = 1.0
    jitter: float = 1e-6
    noise: float | None = None  # defaults to jitter
    seed: int = 0

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.init_size < 2:
            raise ValueError("init_size must be >= 2 (normalization needs spread)")
        if self.proxy_count < 0:
            raise ValueError("proxy_count must be >= 0")
        if not (self.bandwidth > 0 and np.isfinite(self.bandwidth)):
            raise ValueError("bandwidth must be finite and positive")
        if self.jitter < 0:
            raise ValueError("jitter must be >= 0")

    @property
    def effective_noise(self) -> float:
        return self.jitter if self.noise is None else self.noise


@dataclass
class RerankResult:
    instance_id: str
    method: str
    selected_index: int
    selected_score: float
    main_calls: int
    proxy_calls: int
    trajectory: list[float]
    wall_times: dict[str, float]
    main_order: list[int] = field(default_factory=list)  # not serialized

    def to_json_obj(self, include_wall_times: bool = True) -> dict:
        # Wall times are the one non-reproducible field; callers that need
        # byte-identical payloads across reruns drop the values.
        return {
            "id": self.instance_id,
            "method": self.method,
            "selected_index": self.selected_index,
            "selected_score": self.selected_score,
            "main_calls": self.main_calls,
            "proxy_calls": self.proxy_calls,
            "trajectory": self.trajectory,
            "wall_times": self.wall_times if include_wall_times else {},
        }


class _Tracker:
    """Observation bookkeeping: raw scores, call order, trajectory."""

    def __init__(self, instance: Instance, scorer: Scorer):
        self.instance = instance
        self.scorer = scorer
        self.main: dict[int, float] = {}
        self.order: list[int] = []
        self.trajectory: list[float] = []
        self.scoring_seconds = 0.0
        self.texts: set[str] = set()
        self._best = -np.inf
        self._best_idx = -1

    def score_main(self, cands: list[Candidate]) -> None:
        if not cands:
            return
        for cand in cands:
            if cand.text in self.texts:
                raise AssertionError(
                    f"candidate text scored twice in instance {self.instance.id!r}"
                )
            self.texts.add(cand.text)
        t0 = time.perf_counter()
        values = self.scorer.score_batch(
            [(self.instance, c.index) for c in cands]
        )
        self.scoring_seconds += time.perf_counter() - t0
        for cand, val in zip(cands, values):
            self.main[cand.index] = val
            self.order.append(cand.index)
            if val > self._best or (val == self._best and cand.index < self._best_idx):
                self._best = val
                self._best_idx = cand.index
            self.trajectory.append(self._best)

    def result(
        self,
        method: str,
        total_seconds: float,
        proxy_calls: int = 0,
        extra_stages: dict[str, float] | None = None,
    ) -> RerankResult:
        wall: dict[str, float] = {}
        if extra_stages:
            wall.update(extra_stages)
        wall["Scoring"] = self.scoring_seconds
        # Attribute the loop bookkeeping so the stages sum to the total:
        # to the posterior stage when one exists, else to subset selection.
        residual = max(total_seconds - sum(wall.values()), 0.0)
        if "BayesOpt+GP" in wall:
            wall["BayesOpt+GP"] += residual
        else:
            wall["Selection"] = residual
        wall["Total"] = total_seconds
        return RerankResult(
            instance_id=self.instance.id,
            method=method,
            selected_index=self._best_idx,
            selected_score=self._best,
            main_calls=len(self.order),
            proxy_calls=proxy_calls,
            trajectory=list(self.trajectory),
            wall_times=wall,
            main_order=list(self.order),
        )


def _require_candidates(instance: Instance) -> list[Candidate]:
    uniq = instance.unique_candidates
    if not uniq:
        raise EmptyCandidateList(f"instance {instance.id!r} has no candidates")
    return uniq


def _check_init(cfg: RerankConfig) -> None:
    if cfg.init_size > cfg.budget:
        raise ValueError(
            f"init_size ({cfg.init_size}) must not exceed budget ({cfg.budget})"
        )


def exhaustive(instance: Instance, scorer: Scorer, cfg: RerankConfig | None = None) -> RerankResult:
    """Score every unique candidate in list order and take the argmax."""
    t_start = time.perf_counter()
    uniq = _require_candidates(instance)
    tracker = _Tracker(instance, scorer)
    tracker.score_main(uniq)
    return tracker.result("exhaustive", time.perf_counter() - t_start)


def uniq_random(instance: Instance, scorer: Scorer, cfg: RerankConfig) -> RerankResult:
    """Shuffle the raw list, dedup by first appearance, score the prefix."""
    t_start = time.perf_counter()
    _require_candidates(instance)
    rng = streams.instance_stream(cfg.seed, instance.id)
    order = rng.permutation(len(instance.raw_candidates))
    shuffled = [instance.raw_candidates[i] for i in order]
    survivors = dedup(shuffled)
    take = min(cfg.budget, len(survivors))
    tracker = _Tracker(instance, scorer)
    tracker.score_main(survivors[:take])
    return tracker.result("uniqrandom", time.perf_counter() - t_start)


def logprob_sorted(
    instance: Instance, scorer: Scorer, cfg: RerankConfig, mode: str = "avg"
) -> RerankResult:
    """Score the most probable candidates first (by avg or summed logprob)."""
    if mode not in ("avg", "sum"):
        raise ValueError("mode must be 'avg' or 'sum'")
    t_start = time.perf_counter()
    uniq = _require_candidates(instance)

    def key(c: Candidate):
        lp = c.logprob_avg if mode == "avg" else c.logprob_sum
        if lp is None:
            raise MissingPrecomputedScore(
                f"candidate {c.index} in instance {instance.id!r} lacks logprob_{mode}"
            )
        return (-lp, c.index)

    ranked = sorted(uniq, key=key)
    take = min(cfg.budget, len(ranked))
    tracker = _Tracker(instance, scorer)
    tracker.score_main(ranked[:take])
    return tracker.result(f"logprob-{mode}", time.perf_counter() - t_start)


def hill_climbing(instance: Instance, scorer: Scorer, cfg: RerankConfig) -> RerankResult:
    """Greedy walk: repeatedly score the unobserved candidate nearest (in
    embedding space) to the best observation so far."""
    t_start = time.perf_counter()
    uniq = _require_candidates(instance)
    _check_init(cfg)
    n = len(uniq)
    budget = min(cfg.budget, n)
    rng = streams.instance_stream(cfg.seed, instance.id)
    perm = rng.permutation(n)
    emb = instance.embedding_matrix()
    pos_by_index = {c.index: p for p, c in enumerate(uniq)}

    tracker = _Tracker(instance, scorer)
    observed = [int(p) for p in perm[: min(cfg.init_size, budget)]]
    tracker.score_main([uniq[p] for p in observed])
    observed_set = set(observed)

    while len(observed) < budget:
        best_pos = pos_by_index[tracker._best_idx]
        unobs = [p for p in range(n) if p not in observed_set]
        dists = np.linalg.norm(emb[unobs] - emb[best_pos], axis=1)
        nxt = unobs[int(np.argmin(dists))]
        tracker.score_main([uniq[nxt]])
        observed.append(nxt)
        observed_set.add(nxt)
    return tracker.result("hillclimb", time.perf_counter() - t_start)


def bayesopt_rerank(instance: Instance, scorer: Scorer, cfg: RerankConfig) -> RerankResult:
    """Posterior-guided selection with expected improvement."""
    t_start = time.perf_counter()
    uniq = _require_candidates(instance)
    _check_init(cfg)
    n = len(uniq)
    budget = min(cfg.budget, n)
    rng = streams.instance_stream(cfg.seed, instance.id)
    perm = rng.permutation(n)

    t0 = time.perf_counter()
    gram = backend.rbf_gram(instance.embedding_matrix(), cfg.bandwidth, 0.0)
    sim_seconds = time.perf_counter() - t0

    tracker = _Tracker(instance, scorer)
    observed = [int(p) for p in perm[: min(cfg.init_size, budget)]]
    tracker.score_main([uniq[p] for p in observed])

    gp_seconds = 0.0
    noise = cfg.effective_noise
    while len(observed) < budget:
        t0 = time.perf_counter()
        values = np.array([tracker.main[uniq[p].index] for p in observed])
        ns = normalize_scores(values)
        best_norm = float(ns.values.max())
        observed_set = set(observed)
        unobs = [p for p in range(n) if p not in observed_set]
        post = posterior_from_matrices(
            gram[np.ix_(observed, observed)],
            gram[np.ix_(unobs, observed)],
            np.ones(len(unobs)),
            ns.values,
            noise=noise,
        )
        ei = expected_improvement_batch(post.mean, np.sqrt(post.variance), best_norm)
        take = min(cfg.batch_size, budget - len(observed), len(unobs))
        chosen = top_k(
            [AcquisitionValue(p, float(e)) for p, e in zip(unobs, ei)], take
        )
        gp_seconds += time.perf_counter() - t0
        tracker.score_main([uniq[p] for p in chosen])
        observed.extend(chosen)

    return tracker.result(
        "bayesopt",
        time.perf_counter() - t_start,
        extra_stages={"Similarities": sim_seconds, "BayesOpt+GP": gp_seconds},
    )


def bayesopt_proxy_rerank(
    instance: Instance,
    scorer: Scorer,
    proxy: Scorer,
    score_cov: ScoreCovariance,
    cfg: RerankConfig,
) -> RerankResult:
    """Posterior-guided selection seeded with cheap proxy observations.

    Proxy scores are taken once on a random subset of size `proxy_count`;
    the main scorer starts from a sub-subset of those and is the only oracle
    called inside the loop. Observations live on (candidate, scorer) pairs
    whose covariance is the embedding kernel times the scorer covariance;
    main and proxy observations are normalized as two separate lists.
    """
    t_start = time.perf_counter()
    uniq = _require_candidates(instance)
    _check_init(cfg)
    if cfg.proxy_count < 1:
        raise ValueError("bayesopt-proxy requires proxy_count >= 1")
    try:
        sid = score_cov.index_of(scorer.name)
        pid = score_cov.index_of(proxy.name)
    except KeyError as exc:
        raise UnknownScorer(f"score covariance lacks scorer {exc}")
    sc = score_cov.clamped().matrix
    rho = float(sc[sid, pid])
    same_scorer = sid == pid

    n = len(uniq)
    budget = min(cfg.budget, n)
    rng = streams.instance_stream(cfg.seed, instance.id)
    perm = rng.permutation(n)

    t0 = time.perf_counter()
    gram = backend.rbf_gram(instance.embedding_matrix(), cfg.bandwidth, 0.0)
    sim_seconds = time.perf_counter() - t0

    m = min(cfg.proxy_count, n)
    proxy_positions = [int(p) for p in perm[:m]]
    t0 = time.perf_counter()
    proxy_values = dict(
        zip(
            proxy_positions,
            proxy.score_batch([(instance, uniq[p].index) for p in proxy_positions]),
        )
    )
    proxy_seconds = time.perf_counter() - t0

    tracker = _Tracker(instance, scorer)
    observed = [int(p) for p in perm[: min(cfg.init_size, m, budget)]]
    tracker.score_main([uniq[p] for p in observed])

    gp_seconds = 0.0
    noise = cfg.effective_noise
    while len(observed) < budget:
        t0 = time.perf_counter()
        observed_set = set(observed)
        main_vals = np.array([tracker.main[uniq[p].index] for p in observed])
        ns_main = normalize_scores(main_vals)
        best_norm = float(ns_main.values.max())
        # With a single shared scorer a main observation supersedes the
        # proxy one for the same candidate (duplicate observation keys).
        retained = [
            p
            for p in proxy_positions
            if not (same_scorer and p in observed_set)
        ]
        if retained:
            ns_proxy = normalize_scores([proxy_values[p] for p in retained])
            k_obs = np.empty((len(observed) + len(retained),) * 2)
            a = len(observed)
            k_obs[:a, :a] = gram[np.ix_(observed, observed)] * sc[sid, sid]
            cross = gram[np.ix_(observed, retained)] * rho
            k_obs[:a, a:] = cross
            k_obs[a:, :a] = cross.T
            k_obs[a:, a:] = gram[np.ix_(retained, retained)] * sc[pid, pid]
            values = np.concatenate([ns_main.values, ns_proxy.values])
        else:
            k_obs = gram[np.ix_(observed, observed)] * sc[sid, sid]
            values = ns_main.values

        unobs = [p for p in range(n) if p not in observed_set]
        k_cross_main = gram[np.ix_(unobs, observed)] * sc[sid, sid]
        if retained:
            k_cross = np.hstack(
                [k_cross_main, gram[np.ix_(unobs, retained)] * rho]
            )
        else:
            k_cross = k_cross_main
        post = posterior_from_matrices(
            k_obs,
            k_cross,
            np.full(len(unobs), sc[sid, sid]),
            values,
            noise=noise,
        )
        ei = expected_improvement_batch(post.mean, np.sqrt(post.variance), best_norm)
        take = min(cfg.batch_size, budget - len(observed), len(unobs))
        chosen = top_k(
            [AcquisitionValue(p, float(e)) for p, e in zip(unobs, ei)], take
        )
        gp_seconds += time.perf_counter() - t0
        tracker.score_main([uniq[p] for p in chosen])
        observed.extend(chosen)

    return tracker.result(
        "bayesopt-proxy",
        time.perf_counter() - t_start,
        proxy_calls=m,
        extra_stages={
            "Similarities": sim_seconds,
            "BayesOpt+GP": gp_seconds,
            "Proxy": proxy_seconds,
        },
    )


def proxy_first(
    instance: Instance, scorer: Scorer, proxy: Scorer, cfg: RerankConfig
) -> RerankResult:
    """Proxy-score a random subset, then main-score its top ranks; if budget
    exceeds the proxy subset, continue in shuffled-dedup order."""
    t_start = time.perf_counter()
    uniq = _require_candidates(instance)
    if cfg.proxy_count < 1:
        raise ValueError("proxyfirst requires proxy_count >= 1")
    n = len(uniq)
    budget = min(cfg.budget, n)
    rng = streams.instance_stream(cfg.seed, instance.id)
    perm = rng.permutation(n)
    m = min(cfg.proxy_count, n)
    proxy_positions = [int(p) for p in perm[:m]]

    t0 = time.perf_counter()
    proxy_vals = proxy.score_batch(
        [(instance, uniq[p].index) for p in proxy_positions]
    )
    proxy_seconds = time.perf_counter() - t0
    ranked = [
        p
        for p, _ in sorted(
            zip(proxy_positions, proxy_vals), key=lambda pv: (-pv[1], pv[0])
        )
    ]

    tracker = _Tracker(instance, scorer)
    head = ranked[: min(budget, m)]
    tracker.score_main([uniq[p] for p in head])

    if budget > m:
        raw = instance.raw_candidates
        order = rng.permutation(len(raw))
        for cand in dedup([raw[i] for i in order]):
            if len(tracker.order) >= budget:
                break
            if cand.text not in tracker.texts:
                tracker.score_main([cand])

    return tracker.result(
        "proxyfirst",
        time.perf_counter() - t_start,
        proxy_calls=m,
        extra_stages={"Proxy": proxy_seconds},
    )


def run_method(
    method: str,
    instance: Instance,
    scorer: Scorer,
    cfg: RerankConfig,
    proxy: Scorer | None = None,
    score_cov: ScoreCovariance | None = None,
) -> RerankResult:
    """Dispatch a method name from `METHODS` to its strategy function."""
    if method == "exhaustive":
        return exhaustive(instance, scorer, cfg)
    if method == "uniqrandom":
        return uniq_random(instance, scorer, cfg)
    if method == "logprob-avg":
        return logprob_sorted(instance, scorer, cfg, mode="avg")
    if method == "logprob-sum":
        return logprob_sorted(instance, scorer, cfg, mode="sum")
    if method == "hillclimb":
        return hill_climbing(instance, scorer, cfg)
    if method == "bayesopt":
        return bayesopt_rerank(instance, scorer, cfg)
    if method == "bayesopt-proxy":
        if proxy is None or score_cov is None:
            raise ValueError("bayesopt-proxy needs a proxy scorer and a covariance")
        return bayesopt_proxy_rerank(instance, scorer, proxy, score_cov, cfg)
    if method == "proxyfirst":
        if proxy is None:
            raise ValueError("proxyfirst needs a proxy scorer")
        return proxy_first(instance, scorer, proxy, cfg)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
