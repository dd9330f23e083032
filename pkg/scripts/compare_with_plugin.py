#!/usr/bin/env python3
"""Compare the transformer plugin against the logistic regression baseline
on a synthetic corpus, sweeping the plugin's LM fine-tuning epochs.

Requires the plugin to be built first:

    cd transformer-plugin && npm install && npm run build

Then:

    python3 scripts/compare_with_plugin.py -o compare_out

Prints, per LM-epoch setting, the mean relative cost against the baseline
(below 1.0 means the transformer reduced review cost).
"""

import argparse
import json
import sys
from pathlib import Path

from tarsim.cli import aggregate_reports, main as tarsim_main

PLUGIN_ENTRY = Path(__file__).parent.parent / "transformer-plugin" / "dist" / "main.js"

CATEGORIES = [
    {"name": "easy", "prevalence": 0.08, "noise": 0.0},
    {"name": "hard", "prevalence": 0.08, "noise": 0.3},
]


def build_manifest(out: Path, corpus: Path, lm_sweep, iterations, batch) -> Path:
    runs = []
    for cat in CATEGORIES:
        runs.append(
            {
                "category": cat["name"],
                "strategy": {"kind": "relevance", "batch_size": batch},
                "classifier": {"kind": "logreg", "penalty": 1.0},
                "iterations": iterations,
                "rng_seed": 11,
                "label": "baseline",
            }
        )
        for lm_epochs in lm_sweep:
            runs.append(
                {
                    "category": cat["name"],
                    "strategy": {"kind": "relevance", "batch_size": batch},
                    "classifier": {
                        "kind": "plugin",
                        "argv": ["node", str(PLUGIN_ENTRY)],
                        "config": {
                            "lm_epochs": lm_epochs,
                            "cls_epochs": 10,
                            "d_model": 32,
                            "num_layers": 2,
                            "num_heads": 4,
                            "ffn_dim": 64,
                            "max_tokens": 24,
                            "vocab_size": 400,
                            "cache_dir": str(out / "plugin-cache"),
                        },
                        "label": f"transformer-lm{lm_epochs}",
                    },
                    "iterations": iterations,
                    "rng_seed": 11,
                    "label": f"transformer-lm{lm_epochs}",
                }
            )
    manifest = {
        "corpus": corpus.name,
        "output_dir": "runs",
        "parallelism": 1,
        "runs": runs,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1))
    return path


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("-o", "--output", default="compare_out")
    parser.add_argument("--n-docs", type=int, default=300)
    parser.add_argument("--iterations", type=int, default=4)
    parser.add_argument("--batch", type=int, default=20)
    parser.add_argument("--lm-sweep", type=int, nargs="+", default=[0, 1, 2])
    args = parser.parse_args()

    if not PLUGIN_ENTRY.exists():
        print(f"error: plugin not built ({PLUGIN_ENTRY} missing)", file=sys.stderr)
        return 1

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    spec = {
        "n_docs": args.n_docs,
        "categories": CATEGORIES,
        "vocab_size": 300,
        "doc_length": 16,
    }
    (out / "spec.json").write_text(json.dumps(spec, indent=1))
    corpus = out / "corpus.jsonl"
    if tarsim_main(["synth", str(out / "spec.json"), "-o", str(corpus), "--seed", "8"]) != 0:
        return 1
    manifest = build_manifest(out, corpus, args.lm_sweep, args.iterations, args.batch)
    if tarsim_main(["run", str(manifest)]) != 0:
        return 1

    print(f"\n{'condition':<20}{'rel cost uniform':>18}{'rel cost expensive':>20}")
    for lm_epochs in args.lm_sweep:
        report = aggregate_reports(out / "runs" / f"transformer-lm{lm_epochs}", out / "runs" / "baseline")
        row = report["overall"]
        print(
            f"{'lm_epochs=' + str(lm_epochs):<20}"
            f"{row['mean_relative_cost_uniform']:>18.4f}"
            f"{row['mean_relative_cost_expensive']:>20.4f}"
        )
        (out / f"aggregate_lm{lm_epochs}.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
