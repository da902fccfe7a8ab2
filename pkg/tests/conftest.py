import json

import numpy as np
import pytest

from bayesrank import backend, synthetic
from bayesrank.synthetic import SyntheticScorer


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # Trigger numba compilation once so timed tests measure steady state.
    emb = np.eye(4, 6)
    for name in backend.available_backends():
        backend.set_backend(name)
        backend.rbf_gram(emb, 1.0, 1e-6)
        backend.expected_improvement(np.zeros(3), np.ones(3), 0.0)
        backend.kendall_counts(np.arange(4.0), np.arange(4.0))
    backend.set_backend(backend._env_default())


@pytest.fixture(scope="session")
def synthetic_instances():
    return [
        synthetic.make_instance(f"fix-{i:03d}", 60, 8, seed=21, scorer_seed=0)
        for i in range(8)
    ]


@pytest.fixture(scope="session")
def main_scorer():
    return SyntheticScorer(seed=0)


def write_jsonl(path, lines):
    path.write_text("\n".join(json.dumps(obj) for obj in lines) + "\n", encoding="utf-8")


def tiny_dataset_lines(dim=3, normalized=True):
    def unit(v):
        arr = np.asarray(v, dtype=np.float64)
        return (arr / np.linalg.norm(arr)).tolist()

    return [
        {"meta": {"embedding_dim": dim, "normalized": normalized}},
        {
            "id": "a",
            "source": "src a",
            "candidates": [
                {
                    "text": "uno",
                    "embedding": unit([1, 0, 0]),
                    "logprob_sum": -10.0,
                    "logprob_avg": -1.0,
                    "scores": {"main": 0.5, "proxy": 0.4},
                },
                {
                    "text": "dos",
                    "embedding": unit([0, 1, 0]),
                    "logprob_sum": -8.0,
                    "logprob_avg": -2.0,
                    "scores": {"main": 0.8, "proxy": 0.9},
                },
                {
                    "text": "uno",
                    "embedding": unit([1, 0, 0]),
                    "logprob_sum": -10.0,
                    "logprob_avg": -1.0,
                    "scores": {"main": 0.5, "proxy": 0.4},
                },
            ],
        },
        {
            "id": "b",
            "source": "src b",
            "candidates": [
                {
                    "text": "tres",
                    "embedding": unit([0, 0, 1]),
                    "logprob_sum": -4.0,
                    "logprob_avg": -0.5,
                    "scores": {"main": 0.1, "proxy": 0.3},
                },
                {
                    "text": "cuatro",
                    "embedding": unit([1, 1, 0]),
                    "logprob_sum": -6.0,
                    "logprob_avg": -1.5,
                    "scores": {"main": 0.7, "proxy": 0.6},
                },
            ],
        },
    ]


@pytest.fixture
def tiny_dataset_file(tmp_path):
    path = tmp_path / "tiny.jsonl"
    write_jsonl(path, tiny_dataset_lines())
    return path
