#!/usr/bin/env python3
"""Desk-scale experiment grid: synthetic corpus, both sampling strategies,
category bins, and an aggregate comparison of uncertainty sampling against
relevance feedback.

Builds everything under one output directory:

    python3 scripts/demo_grid.py -o demo_out

Then look at demo_out/aggregate.json and demo_out/trajectory_*.csv.
"""

import argparse
import json
import sys
from pathlib import Path

from tarsim.cli import main as tarsim_main
from tarsim.corpus import BinThresholds, assign_bins, category_prevalence, load_corpus
from tarsim.engine import load_run, timing_report

CATEGORIES = [
    # name, prevalence, noise: spans prevalence levels and an easy/hard axis
    {"name": "rare_easy", "prevalence": 0.004, "noise": 0.0},
    {"name": "rare_hard", "prevalence": 0.004, "noise": 0.35},
    {"name": "medium_easy", "prevalence": 0.02, "noise": 0.0},
    {"name": "medium_hard", "prevalence": 0.02, "noise": 0.35},
    {"name": "common_easy", "prevalence": 0.10, "noise": 0.0},
    {"name": "common_hard", "prevalence": 0.10, "noise": 0.35},
]


def build_corpus(out: Path, n_docs: int, seed: int) -> Path:
    spec = {
        "n_docs": n_docs,
        "categories": CATEGORIES,
        "vocab_size": 400,
        "doc_length": 30,
    }
    spec_path = out / "corpus_spec.json"
    spec_path.write_text(json.dumps(spec, indent=1))
    corpus_path = out / "corpus.jsonl"
    code = tarsim_main(["synth", str(spec_path), "-o", str(corpus_path), "--seed", str(seed)])
    if code != 0:
        sys.exit(code)
    return corpus_path


def build_manifest(out: Path, corpus_path: Path, iterations: int, batch: int, seed: int) -> Path:
    runs = []
    for cat in CATEGORIES:
        for kind in ("relevance", "uncertainty"):
            runs.append(
                {
                    "category": cat["name"],
                    "strategy": {"kind": kind, "batch_size": batch},
                    "classifier": {"kind": "logreg", "penalty": 1.0},
                    "iterations": iterations,
                    "rng_seed": seed,
                }
            )
    manifest = {
        "corpus": corpus_path.name,
        "output_dir": "runs",
        "parallelism": 2,
        "runs": runs,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1))
    return path


def build_bins(out: Path, corpus_path: Path) -> Path:
    """Bin categories by realized prevalence and by baseline difficulty
    (final R-Precision of the relevance-feedback run, tercile split)."""
    corpus = load_corpus(corpus_path)
    names = [c["name"] for c in CATEGORIES]
    prevalences = {n: category_prevalence(corpus, n) for n in names}
    difficulty = {}
    for name in names:
        result = load_run(out / "runs" / "logreg-relevance" / f"{name}.jsonl")
        difficulty[name] = result.records[-1].r_precision
    thresholds = BinThresholds.from_difficulty_terciles(
        difficulty.values(), prevalence_rare_below=0.01, prevalence_medium_below=0.05
    )
    bins = assign_bins(names, prevalences, difficulty, thresholds)
    path = out / "bins.json"
    path.write_text(
        json.dumps(
            [
                {
                    "category": b.category,
                    "prevalence_bin": b.prevalence_bin,
                    "difficulty_bin": b.difficulty_bin,
                }
                for b in bins
            ],
            indent=1,
        )
    )
    return path


def print_timings(out: Path) -> None:
    results = [load_run(p) for p in sorted((out / "runs").rglob("*.jsonl"))
               if not p.name.endswith((".metrics.jsonl", ".timings"))]
    report = timing_report(results)
    overall = report["overall"]
    print(
        f"\ntimings over {overall['n_runs']} runs: "
        f"mean fit {overall['mean_fit_seconds']:.3f}s, "
        f"mean score {overall['mean_score_seconds']:.3f}s, "
        f"total {overall['total_run_seconds']:.1f}s"
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("-o", "--output", default="demo_out")
    parser.add_argument("--n-docs", type=int, default=5000)
    parser.add_argument("--iterations", type=int, default=10)
    parser.add_argument("--batch", type=int, default=50)
    parser.add_argument("--seed", type=int, default=17)
    args = parser.parse_args()

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    corpus_path = build_corpus(out, args.n_docs, args.seed)
    manifest = build_manifest(out, corpus_path, args.iterations, args.batch, args.seed)
    if tarsim_main(["run", str(manifest)]) != 0:
        return 1

    bins_path = build_bins(out, corpus_path)
    code = tarsim_main(
        [
            "aggregate",
            str(out / "runs" / "logreg-uncertainty"),
            "--baseline",
            str(out / "runs" / "logreg-relevance"),
            "--bins",
            str(bins_path),
            "-o",
            str(out / "aggregate.json"),
        ]
    )
    if code != 0:
        return code
    for cat in ("common_easy", "common_hard"):
        tarsim_main(
            [
                "trajectory",
                str(out / "runs"),
                "--category",
                cat,
                "-o",
                str(out / f"trajectory_{cat}.csv"),
            ]
        )
    print_timings(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
