"""Command-line interface.

Commands: validate, rerank, benchmark, score-covariance, tune-bandwidth,
profile, make-synthetic. Every command that writes files also writes a
run manifest (flags, seed, input hashes, timestamps); result payloads are
byte-reproducible given the same seed and inputs, timestamps live only in
the manifest.

Exit codes: 0 success, 1 data error, 2 usage error, 3 oracle failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, backend
from .data import Dataset, load_dataset, save_dataset, validation_summary
from .errors import DataError, OracleError
from .evaluation import (
    build_curve,
    normalized_auc,
    significance_matrix,
    tune_bandwidth,
)
from .kernels import ScoreCovariance, estimate_score_covariance
from .scorers import CallLedger, PrecomputedScorer, Scorer, parse_scorer_spec
from .strategies import METHODS, RerankConfig, RerankResult, run_method
from .synthetic import SyntheticScorer, make_dataset

DEFAULT_BUDGETS = list(range(10, 201, 10))
DEFAULT_BANDWIDTH_GRID = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0]


def _sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, args: argparse.Namespace, started: str, extra: dict | None = None) -> None:
    snapshot = {
        k: v for k, v in sorted(vars(args).items()) if k not in ("func",)
    }
    manifest = {
        "command": sys.argv,
        "config": snapshot,
        "seed": getattr(args, "seed", None),
        "dataset": getattr(args, "dataset", None),
        "scorer": getattr(args, "scorer", None),
        "proxy_scorer": getattr(args, "proxy_scorer", None),
        "backend": backend.active_backend(),
        "version": __version__,
        "started_at": started,
        "finished_at": datetime.now(timezone.utc).isoformat(),
    }
    if getattr(args, "dataset", None):
        manifest["dataset_sha256"] = _sha256_file(args.dataset)
    if getattr(args, "covariance", None):
        manifest["covariance_sha256"] = _sha256_file(args.covariance)
    if extra:
        manifest.update(extra)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )


def _config_from_args(args: argparse.Namespace) -> RerankConfig:
    bandwidth = args.bandwidth
    if bandwidth is None and getattr(args, "bandwidth_file", None):
        obj = json.loads(Path(args.bandwidth_file).read_text(encoding="utf-8"))
        bandwidth = float(obj["bandwidth"])
    if bandwidth is None:
        bandwidth = 1.0
    return RerankConfig(
        budget=args.budget,
        batch_size=args.batch_size,
        init_size=args.init_size,
        proxy_count=args.proxy_count,
        bandwidth=bandwidth,
        jitter=args.jitter,
        seed=args.seed,
    )


def _scorers_from_args(args: argparse.Namespace) -> tuple[Scorer, Scorer | None, ScoreCovariance | None]:
    scorer = parse_scorer_spec(args.scorer, scorer_seed=args.scorer_seed)
    proxy = None
    if getattr(args, "proxy_scorer", None):
        proxy = parse_scorer_spec(args.proxy_scorer, scorer_seed=args.scorer_seed)
    cov = None
    if getattr(args, "covariance", None):
        cov = ScoreCovariance.load(args.covariance)
    return scorer, proxy, cov


def _run_all(
    dataset: Dataset,
    method: str,
    scorer: Scorer,
    cfg: RerankConfig,
    proxy: Scorer | None,
    cov: ScoreCovariance | None,
    workers: int,
) -> list[RerankResult]:
    if workers <= 1:
        return [
            run_method(method, inst, scorer, cfg, proxy=proxy, score_cov=cov)
            for inst in dataset.instances
        ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(run_method, method, inst, scorer, cfg, proxy=proxy, score_cov=cov)
            for inst in dataset.instances
        ]
        return [f.result() for f in futures]


def _exhaustive_reference(dataset: Dataset, scorer: Scorer) -> dict[str, float] | None:
    """Per-instance exhaustive maximum, when obtainable without real cost."""
    if isinstance(scorer, (PrecomputedScorer, SyntheticScorer)) or scorer.capability == "free":
        best = {}
        for inst in dataset.instances:
            vals = [scorer._score_one(inst, c.index) for c in inst.unique_candidates]
            best[inst.id] = max(vals)
        return best
    return None


def cmd_validate(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    summary = validation_summary(dataset)
    print(f"instances:         {summary['instances']}")
    print(f"raw candidates:    {summary['raw_candidates']}")
    print(f"unique candidates: {summary['unique_candidates']}")
    print(f"dedup ratio:       {summary['dedup_ratio']:.4f}")
    print(f"embedding dim:     {summary['embedding_dim']}")
    print(f"precomputed:       {', '.join(summary['scorers']) or '(none)'}")
    return 0


def cmd_rerank(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc).isoformat()
    dataset = load_dataset(args.dataset)
    cfg = _config_from_args(args)
    scorer, proxy, cov = _scorers_from_args(args)
    ledger = CallLedger()
    scorer.ledger = ledger
    if proxy is not None:
        proxy.ledger = ledger

    results = _run_all(dataset, args.method, scorer, cfg, proxy, cov, args.parallel)
    # Timings are volatile, so the result payload stays byte-reproducible
    # and the measured stage times go to a companion file.
    lines = [json.dumps(r.to_json_obj(include_wall_times=False)) for r in results]
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "results.jsonl").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
        (out_dir / "timings.jsonl").write_text(
            "\n".join(
                json.dumps({"id": r.instance_id, "wall_times": r.wall_times})
                for r in results
            )
            + "\n",
            encoding="utf-8",
        )
        _write_manifest(out_dir, args, started, extra={"ledger": ledger.counts})
    else:
        for line in lines:
            print(line)
    scorer.close()
    if proxy is not None:
        proxy.close()
    return 0


def cmd_benchmark(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc).isoformat()
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise ValueError("no methods given")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
    budgets = sorted(int(b) for b in args.budgets.split(","))
    dataset = load_dataset(args.dataset)
    scorer, proxy, cov = _scorers_from_args(args)

    reference = _exhaustive_reference(dataset, scorer)
    max_budget = max(budgets)
    per_method: dict[str, list[RerankResult]] = {}
    for method in methods:
        cfg = _config_from_args(args)
        cfg = RerankConfig(
            budget=max_budget,
            batch_size=cfg.batch_size,
            init_size=cfg.init_size,
            proxy_count=cfg.proxy_count,
            bandwidth=cfg.bandwidth,
            jitter=cfg.jitter,
            seed=cfg.seed,
        )
        per_method[method] = _run_all(
            dataset, method, scorer, cfg, proxy, cov, args.parallel
        )

    instance_ids = [inst.id for inst in dataset.instances]
    curves = {}
    aucs = {}
    score_tables: dict[str, dict[str, np.ndarray]] = {}
    for method, results in per_method.items():
        trajs = {r.instance_id: r.trajectory for r in results}
        curve = build_curve(trajs, budgets, exhaustive_best=reference)
        curves[method] = curve
        aucs[method] = normalized_auc(curve) if len(budgets) >= 2 else None
        table: dict[str, np.ndarray] = {}
        for b in budgets:
            table[f"budget-{b:04d}"] = np.array(
                [
                    r.trajectory[min(b, len(r.trajectory)) - 1]
                    for r in results
                ]
            )
        table["pooled"] = np.concatenate([table[f"budget-{b:04d}"] for b in budgets])
        score_tables[method] = table

    significance = significance_matrix(score_tables, threshold=args.significance)
    significance["metadata"] = {
        "pooling": "instance x budget pairs pooled over the budget grid",
        "instances": len(instance_ids),
    }

    report = {
        "methods": methods,
        "budgets": budgets,
        "curves": {
            m: {
                "budgets": c.budgets,
                "mean_scores": c.mean_scores,
                "pct_best": c.pct_best,
            }
            for m, c in curves.items()
        },
        "normalized_auc": aucs,
        "significance": significance,
    }

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "curves.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "budget", "mean_score", "pct_best", "auc"])
        for method in methods:
            c = curves[method]
            for i, b in enumerate(c.budgets):
                writer.writerow(
                    [
                        method,
                        b,
                        repr(c.mean_scores[i]),
                        "" if c.pct_best is None else repr(c.pct_best[i]),
                        "" if aucs[method] is None else repr(aucs[method]),
                    ]
                )
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8"
    )
    _write_manifest(out_dir, args, started)
    print(f"wrote {out_dir / 'curves.csv'} and {out_dir / 'report.json'}")
    return 0


def cmd_score_covariance(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc).isoformat()
    dataset = load_dataset(args.dataset)
    names = [s.strip() for s in args.scorers.split(",") if s.strip()]
    if not names:
        raise ValueError("no scorer names given")
    cov = estimate_score_covariance(dataset, names)
    text = cov.to_json() + "\n"
    if args.out:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text, encoding="utf-8")
        _write_manifest(out_path.parent, args, started)
        print(f"wrote {out_path}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_tune_bandwidth(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc).isoformat()
    dataset = load_dataset(args.dataset)
    scorer, _, _ = _scorers_from_args(args)
    grid = [float(w) for w in args.grid.split(",")]
    cfg = _config_from_args(args)
    chosen = tune_bandwidth(dataset, scorer, grid, cfg)
    print(f"bandwidth: {chosen}")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "bandwidth.json").write_text(
            json.dumps({"bandwidth": chosen}) + "\n", encoding="utf-8"
        )
        _write_manifest(out_dir, args, started, extra={"bandwidth": chosen})
    scorer.close()
    return 0


def cmd_profile(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc).isoformat()
    dataset = load_dataset(args.dataset)
    cfg = _config_from_args(args)
    scorer, proxy, cov = _scorers_from_args(args)
    t0 = time.perf_counter()
    results = _run_all(dataset, args.method, scorer, cfg, proxy, cov, args.parallel)
    elapsed = time.perf_counter() - t0

    stages: dict[str, float] = {}
    for r in results:
        for stage, seconds in r.wall_times.items():
            stages[stage] = stages.get(stage, 0.0) + seconds
    n = len(results)
    order = [s for s in ("Similarities", "BayesOpt+GP", "Proxy", "Selection", "Scoring", "Total") if s in stages]
    order += [s for s in sorted(stages) if s not in order]
    print(f"{'stage':<14} {'total_s':>10} {'ms_per_instance':>16}")
    for stage in order:
        print(f"{stage:<14} {stages[stage]:>10.4f} {1000.0 * stages[stage] / n:>16.3f}")
    overhead = sum(stages.get(s, 0.0) for s in ("Similarities", "BayesOpt+GP"))
    print(f"non-scoring overhead: {1000.0 * overhead / n:.3f} ms/instance")
    accounted = sum(v for k, v in stages.items() if k != "Total")
    print(f"stage sum vs total: {accounted:.4f} s / {stages.get('Total', 0.0):.4f} s")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = {
            "stages_total_seconds": stages,
            "instances": n,
            "overhead_ms_per_instance": 1000.0 * overhead / n,
            "wall_seconds": elapsed,
        }
        (out_dir / "profile.json").write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8"
        )
        _write_manifest(out_dir, args, started)
    scorer.close()
    if proxy is not None:
        proxy.close()
    return 0


def cmd_make_synthetic(args: argparse.Namespace) -> int:
    scorer_specs = [s.strip() for s in args.with_scores.split(",") if s.strip()]
    scorers = [
        parse_scorer_spec(f"synthetic:{spec}", scorer_seed=args.scorer_seed)
        for spec in scorer_specs
    ]
    dataset = make_dataset(
        n_instances=args.instances,
        n_candidates=args.candidates,
        dim=args.dim,
        seed=args.seed,
        scorer_seed=args.scorer_seed,
        duplicate_rate=args.duplicate_rate,
        score_scorers=scorers,
    )
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, out_path)
    print(f"wrote {out_path} ({args.instances} instances)")
    return 0


def _add_common_flags(p: argparse.ArgumentParser, scorer_required: bool = True) -> None:
    p.add_argument("--scorer", required=scorer_required, help="scorer spec: precomputed:<name> | external:<cmd or host:port> | synthetic:<preset> | logprob:avg|sum")
    p.add_argument("--proxy-scorer", dest="proxy_scorer", default=None)
    p.add_argument("--covariance", default=None, help="score-covariance JSON file")
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=1)
    p.add_argument("--init-size", dest="init_size", type=int, default=5)
    p.add_argument("--proxy-count", dest="proxy_count", type=int, default=0)
    p.add_argument("--bandwidth", type=float, default=None)
    p.add_argument("--bandwidth-file", dest="bandwidth_file", default=None)
    p.add_argument("--jitter", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scorer-seed", dest="scorer_seed", type=int, default=0)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bayesrank",
        description="Budgeted candidate-list reranking with GP-guided search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a dataset file")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rerank", help="rerank every instance with one method")
    p.add_argument("dataset")
    p.add_argument("--method", required=True, choices=METHODS)
    _add_common_flags(p)
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("benchmark", help="quality-cost curves over a budget grid")
    p.add_argument("dataset")
    p.add_argument("--methods", required=True, help="comma-separated method list")
    p.add_argument(
        "--budgets",
        default=",".join(str(b) for b in DEFAULT_BUDGETS),
        help="comma-separated budget grid",
    )
    p.add_argument("--significance", type=float, default=0.01)
    _add_common_flags(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("score-covariance", help="empirical covariance between precomputed scorers")
    p.add_argument("dataset")
    p.add_argument("--scorers", required=True, help="comma-separated precomputed score names")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_score_covariance)

    p = sub.add_parser("tune-bandwidth", help="grid-search the RBF bandwidth on a dev set")
    p.add_argument("dataset")
    p.add_argument("--grid", default=",".join(str(w) for w in DEFAULT_BANDWIDTH_GRID))
    _add_common_flags(p)
    p.set_defaults(func=cmd_tune_bandwidth)

    p = sub.add_parser("profile", help="per-stage wall-time accounting")
    p.add_argument("dataset")
    p.add_argument("--method", required=True, choices=METHODS)
    _add_common_flags(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("make-synthetic", help="generate a synthetic benchmark dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--candidates", type=int, default=200)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scorer-seed", dest="scorer_seed", type=int, default=0)
    p.add_argument("--duplicate-rate", dest="duplicate_rate", type=float, default=0.0)
    p.add_argument(
        "--with-scores",
        dest="with_scores",
        default="",
        help="comma-separated synthetic presets to embed as precomputed scores",
    )
    p.set_defaults(func=cmd_make_synthetic)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
