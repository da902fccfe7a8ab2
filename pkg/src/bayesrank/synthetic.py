"""Synthetic scoring landscapes and benchmark dataset generation.

The synthetic main scorer is a deterministic function of (seed, embedding):
a per-instance mixture of RBF bumps

    score(e) = sum_j h_j * exp(-||e - c_j||^2 / (2 * 0.25^2)) + eta(e)

with centers c_j and heights h_j drawn from the per-instance stream and
eta Gaussian with variance 0.01, keyed by the embedding bytes, so duplicates
of a candidate always score identically. Proxy presets add further Gaussian noise
scaled to the instance's score spread so that the empirical covariance with
the main scorer lands near a target (0.9 / 0.6 / 0.3).

The generator samples candidates clustered around the bump centers, which is
what makes the smoothness assumption of the posterior model hold on these
benchmarks; it can embed the resulting score tables so the same data works
with precomputed scorers.
"""

from __future__ import annotations

import math

import numpy as np

from . import streams
from .data import Candidate, Dataset, Instance
from .scorers import Scorer

BUMP_COUNT = 5
BUMP_WIDTH = 0.25
NOISE_SD = 0.1  # eta ~ Normal(0, 0.01): variance 0.01
HEIGHT_LOW = 0.2
HEIGHT_HIGH = 1.0
CLOUD_SPREAD = 0.12  # candidate scatter around the instance anchor
CENTER_SPREAD = 0.18  # bump-center scatter around the same anchor
PROXY_PRESETS = (0.9, 0.6, 0.3)


def landscape(scorer_seed: int, instance_id: str, dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-instance landscape: unit anchor, bump centers near it, heights.

    Candidates for an instance cluster around the anchor (one source, many
    near-paraphrases), and the bumps sit inside that cloud, so scores vary
    smoothly over the region the candidates occupy.
    """
    rng = streams.stream("landscape", scorer_seed, instance_id)
    anchor = rng.normal(size=dim)
    anchor /= np.linalg.norm(anchor)
    centers = anchor + CENTER_SPREAD * rng.normal(size=(BUMP_COUNT, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    heights = rng.uniform(HEIGHT_LOW, HEIGHT_HIGH, size=BUMP_COUNT)
    return anchor, centers, heights


def bump_value(emb, centers: np.ndarray, heights: np.ndarray) -> float:
    """Noise-free landscape value at an embedding."""
    e = np.asarray(emb, dtype=np.float64)
    d2 = np.sum((centers - e) ** 2, axis=1)
    return float(np.sum(heights * np.exp(-d2 / (2.0 * BUMP_WIDTH * BUMP_WIDTH))))


def lipschitz_bound(heights=None) -> float:
    """Upper bound on the noise-free landscape's gradient norm."""
    total = BUMP_COUNT * HEIGHT_HIGH if heights is None else float(np.sum(heights))
    return total * math.exp(-0.5) / BUMP_WIDTH


class SyntheticScorer(Scorer):
    """Deterministic bump-landscape scorer (the benchmark main oracle)."""

    kind = "synthetic"
    capability = "expensive"

    def __init__(self, seed: int = 0, name: str = "synthetic-main"):
        super().__init__(name)
        self.seed = seed
        self._cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def _landscape(self, instance: Instance) -> tuple[np.ndarray, np.ndarray]:
        got = self._cache.get(instance.id)
        if got is None:
            dim = instance.raw_candidates[0].embedding.shape[0]
            _, centers, heights = landscape(self.seed, instance.id, dim)
            got = (centers, heights)
            self._cache[instance.id] = got
        return got

    def _score_one(self, instance: Instance, candidate_index: int) -> float:
        cand = self._candidate(instance, candidate_index)
        centers, heights = self._landscape(instance)
        clean = bump_value(cand.embedding.astype(np.float64), centers, heights)
        eta = streams.gauss_from_key(
            "score-noise", self.seed, instance.id, cand.embedding.tobytes().hex()
        )
        return clean + NOISE_SD * eta


class SyntheticProxyScorer(Scorer):
    """Main synthetic score plus extra noise targeting a covariance level.

    The extra noise is scaled per instance to tau = sd * sqrt(1/rho^2 - 1)
    where sd is the population spread of the main scores over the unique
    candidates, which makes the per-instance-normalized empirical covariance
    with the main scorer come out near rho.
    """

    kind = "synthetic"
    capability = "cheap"

    def __init__(self, target_covariance: float, seed: int = 0, name: str | None = None):
        if not 0.0 < target_covariance < 1.0:
            raise ValueError("target covariance must be in (0, 1)")
        super().__init__(name or f"synthetic-proxy-{target_covariance}")
        self.target_covariance = target_covariance
        self.seed = seed
        self._main = SyntheticScorer(seed=seed)
        self._tau: dict[str, float] = {}

    def _tau_for(self, instance: Instance) -> float:
        tau = self._tau.get(instance.id)
        if tau is None:
            vals = np.array(
                [
                    self._main._score_one(instance, c.index)
                    for c in instance.unique_candidates
                ]
            )
            sd = float(vals.std())
            rho = self.target_covariance
            tau = sd * math.sqrt(1.0 / (rho * rho) - 1.0)
            self._tau[instance.id] = tau
        return tau

    def _score_one(self, instance: Instance, candidate_index: int) -> float:
        cand = self._candidate(instance, candidate_index)
        base = self._main._score_one(instance, candidate_index)
        eps = streams.gauss_from_key(
            "proxy-noise",
            self.seed,
            self.target_covariance,
            instance.id,
            cand.embedding.tobytes().hex(),
        )
        return base + self._tau_for(instance) * eps


def make_synthetic_scorer(preset: str, seed: int = 0) -> Scorer:
    """Preset names: `main`, `proxy-0.9`, `proxy-0.6`, `proxy-0.3`."""
    if preset == "main":
        return SyntheticScorer(seed=seed)
    if preset.startswith("proxy-"):
        rho = float(preset.removeprefix("proxy-"))
        return SyntheticProxyScorer(rho, seed=seed)
    raise ValueError(f"unknown synthetic preset {preset!r}")


_SYLLABLES = (
    "ka to mi ra su ne vo li da pe sho gu en ti ba ru lo mei zan fur".split()
)


def _pseudo_sentence(rng: np.random.Generator, words: int) -> str:
    out = []
    for _ in range(words):
        n = int(rng.integers(2, 4))
        out.append("".join(rng.choice(_SYLLABLES) for _ in range(n)))
    return " ".join(out)


def make_instance(
    instance_id: str,
    n_candidates: int,
    dim: int,
    seed: int = 0,
    scorer_seed: int = 0,
    duplicate_rate: float = 0.0,
    cloud_spread: float = CLOUD_SPREAD,
) -> Instance:
    """Sample one synthetic instance: a candidate cloud around the
    landscape anchor shared with the synthetic scorer."""
    rng = streams.stream("candidates", seed, instance_id)
    anchor, centers, heights = landscape(scorer_seed, instance_id, dim)

    n_unique = max(1, int(round(n_candidates * (1.0 - duplicate_rate))))
    uniques: list[Candidate] = []
    clean_values = np.empty(n_unique)
    for k in range(n_unique):
        vec = anchor + cloud_spread * rng.normal(size=dim)
        vec /= np.linalg.norm(vec)
        emb32 = vec.astype(np.float32)
        clean_values[k] = bump_value(emb32.astype(np.float64), centers, heights)
        text = f"{_pseudo_sentence(rng, int(rng.integers(3, 8)))} #{k}"
        uniques.append(
            Candidate(index=-1, text=text, embedding=emb32)
        )

    # Length-normalized logprob loosely tracks the clean score (rank
    # correlation near 0.2) so the logprob baselines are informative but
    # beatable; the summed variant orders differently because lengths vary.
    z = clean_values - clean_values.mean()
    sd = clean_values.std()
    if sd > 1e-12:
        z /= sd
    for k, cand in enumerate(uniques):
        xi = rng.normal()
        cand.logprob_avg = -math.exp(-(0.3 * z[k] + 0.95 * xi))
        length = int(rng.integers(5, 25))
        cand.logprob_sum = cand.logprob_avg * length

    raw: list[Candidate] = list(uniques)
    for _ in range(n_candidates - n_unique):
        duplicate_of = uniques[int(rng.integers(0, n_unique))]
        raw.insert(
            int(rng.integers(0, len(raw) + 1)),
            Candidate(
                index=-1,
                text=duplicate_of.text,
                embedding=duplicate_of.embedding,
                logprob_sum=duplicate_of.logprob_sum,
                logprob_avg=duplicate_of.logprob_avg,
            ),
        )
    for pos, cand in enumerate(raw):
        cand.index = pos

    source = _pseudo_sentence(streams.stream("source", seed, instance_id), 6)
    return Instance(id=instance_id, source=source, raw_candidates=raw)


def make_dataset(
    n_instances: int,
    n_candidates: int,
    dim: int,
    seed: int = 0,
    scorer_seed: int = 0,
    duplicate_rate: float = 0.0,
    score_scorers: list[Scorer] | None = None,
) -> Dataset:
    """Generate a synthetic benchmark dataset, optionally embedding score
    tables computed by the given scorers (matched across duplicates)."""
    instances = []
    for i in range(n_instances):
        inst = make_instance(
            f"inst-{i:04d}",
            n_candidates,
            dim,
            seed=seed,
            scorer_seed=scorer_seed,
            duplicate_rate=duplicate_rate,
        )
        instances.append(inst)
    dataset = Dataset(
        instances=instances,
        embedding_dim=dim,
        declared_scorers=[],
    )
    if score_scorers:
        attach_scores(dataset, score_scorers)
    return dataset


def attach_scores(dataset: Dataset, scorers: list[Scorer]) -> None:
    """Embed per-candidate score tables; duplicates share their text's value."""
    for scorer in scorers:
        for inst in dataset.instances:
            requests = [(inst, c.index) for c in inst.unique_candidates]
            values = scorer.score_batch(requests)
            by_text = {c.text: v for c, v in zip(inst.unique_candidates, values)}
            for cand in inst.raw_candidates:
                if cand.scores is None:
                    cand.scores = {}
                cand.scores[scorer.name] = by_text[cand.text]
        if scorer.name not in dataset.declared_scorers:
            dataset.declared_scorers.append(scorer.name)
