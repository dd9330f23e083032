"""Command-line surface: synthesize corpora, execute run manifests,
aggregate against a baseline, and emit cost-trajectory plot data."""

from __future__ import annotations

import argparse
import csv
import json
import os
import re
import sys
from concurrent import futures
from pathlib import Path
from typing import Mapping, Sequence

from . import engine
from . import metrics as M
from .classifier import PluginProtocolError
from .corpus import Corpus, CorpusError, load_corpus, serialize_corpus
from .synth import SynthSpec, generate_corpus

OUTPUT_DIR_ENV = "TARSIM_OUTPUT_DIR"

_SLUG_RE = re.compile(r"[^A-Za-z0-9_.-]+")


def _slug(text: str) -> str:
    return _SLUG_RE.sub("_", text) or "_"


class ManifestError(ValueError):
    pass


class ManifestRun:
    def __init__(self, config: engine.RunConfig, label: str):
        self.config = config
        self.label = label


class Manifest:
    """Declares a grid of runs over one corpus plus execution knobs."""

    def __init__(self, corpus_path: Path, output_dir: Path, parallelism: int,
                 runs: Sequence[ManifestRun]):
        self.corpus_path = corpus_path
        self.output_dir = output_dir
        self.parallelism = parallelism
        self.runs = list(runs)


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    if "corpus" not in data or "runs" not in data:
        raise ManifestError(f"{path}: manifest needs 'corpus' and 'runs'")

    base = path.parent
    corpus_path = Path(data["corpus"])
    if not corpus_path.is_absolute():
        corpus_path = (base / corpus_path).resolve()
    if "output_dir" in data:
        output_dir = Path(data["output_dir"])
        if not output_dir.is_absolute():
            output_dir = (base / output_dir).resolve()
    else:
        env = os.environ.get(OUTPUT_DIR_ENV)
        if not env:
            raise ManifestError(
                f"{path}: no output_dir in manifest and {OUTPUT_DIR_ENV} is not set"
            )
        output_dir = Path(env)
    parallelism = int(data.get("parallelism", 1))
    if parallelism < 1:
        raise ManifestError(f"{path}: parallelism must be >= 1")

    runs = []
    seen_triples = set()
    seen_outputs = set()
    for i, entry in enumerate(data["runs"]):
        try:
            config = engine.run_config_from_json({**entry, "corpus": str(corpus_path)})
        except (KeyError, ValueError) as exc:
            raise ManifestError(f"{path}: run #{i}: {exc}") from exc
        triple = (
            config.category,
            json.dumps(engine.strategy_to_json(config.strategy), sort_keys=True),
            json.dumps(engine.classifier_spec_to_json(config.classifier), sort_keys=True),
        )
        if triple in seen_triples:
            raise ManifestError(
                f"{path}: duplicate (category, strategy, classifier) triple for "
                f"{config.category!r}"
            )
        seen_triples.add(triple)
        label = entry.get("label") or f"{config.classifier.slug}-{config.strategy.kind}"
        out_key = (label, config.category)
        if out_key in seen_outputs:
            raise ManifestError(
                f"{path}: runs #{i} collides on output {label}/{config.category}; "
                "give the runs distinct labels"
            )
        seen_outputs.add(out_key)
        runs.append(ManifestRun(config, label))
    return Manifest(corpus_path, output_dir, parallelism, runs)


def run_paths(output_dir: Path, run: ManifestRun) -> tuple[Path, Path]:
    directory = output_dir / _slug(run.label)
    stem = _slug(run.config.category)
    return directory / f"{stem}.jsonl", directory / f"{stem}.metrics.jsonl"


def report_records(result: engine.RunResult) -> list[dict]:
    """Project a run result onto the metrics report schema."""
    rows = []
    for r in result.records:
        rows.append(
            {
                "category": result.config.category,
                "iteration": r.iteration,
                "n_labeled": r.n_labeled_pos + r.n_labeled_neg,
                "n_labeled_pos": r.n_labeled_pos,
                "r_precision": r.r_precision,
                "d_star": r.d_star,
                "cost_uniform": r.costs[M.UNIFORM.key],
                "cost_expensive": r.costs[M.EXPENSIVE_TRAINING.key],
                "dfr": r.dfr,
                "wss": r.wss,
            }
        )
    return rows


def _execute_run(run: ManifestRun, corpus: Corpus, result_path: Path, report_path: Path) -> None:
    result_path.parent.mkdir(parents=True, exist_ok=True)
    result = engine.run_tar(run.config, corpus, partial_output_path=result_path)
    engine.persist_run(result, result_path)
    M.write_report(report_records(result), report_path)


def cmd_run(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    try:
        corpus = load_corpus(manifest.corpus_path)
    except (OSError, CorpusError) as exc:
        print(f"error: cannot load corpus {manifest.corpus_path}: {exc}", file=sys.stderr)
        return 1

    pending: list[tuple[ManifestRun, Path, Path]] = []
    skipped = 0
    for run in manifest.runs:
        result_path, report_path = run_paths(manifest.output_dir, run)
        if result_path.exists() and not args.force:
            skipped += 1
            continue
        pending.append((run, result_path, report_path))

    failures: list[tuple[ManifestRun, Exception]] = []

    def job(item):
        run, result_path, report_path = item
        _execute_run(run, corpus, result_path, report_path)

    if manifest.parallelism > 1 and len(pending) > 1:
        with futures.ThreadPoolExecutor(max_workers=manifest.parallelism) as pool:
            futs = {pool.submit(job, item): item for item in pending}
            for fut in futures.as_completed(futs):
                run = futs[fut][0]
                try:
                    fut.result()
                except Exception as exc:
                    failures.append((run, exc))
    else:
        for item in pending:
            try:
                job(item)
            except Exception as exc:
                failures.append((item[0], exc))

    for run, exc in failures:
        print(f"run failed [{run.label}/{run.config.category}]: {exc}", file=sys.stderr)
    completed = len(pending) - len(failures)
    print(f"completed {completed} run(s), skipped {skipped} existing, {len(failures)} failed")
    return 1 if failures else 0


def cmd_synth(args: argparse.Namespace) -> int:
    data = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    spec = SynthSpec.from_json(data)
    corpus = generate_corpus(spec, args.seed)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    serialize_corpus(corpus, out)
    n_cats = len(corpus.category_index)
    print(f"wrote {len(corpus)} documents, {n_cats} categories to {out}")
    return 0


def _load_reports(directory: Path) -> dict[str, list[dict]]:
    directory = Path(directory)
    files = sorted(directory.glob("*.metrics.jsonl"))
    if not files:
        raise ValueError(f"no *.metrics.jsonl report files in {directory}")
    by_category: dict[str, list[dict]] = {}
    source: dict[str, Path] = {}
    for f in files:
        for record in M.read_report(f):
            cat = record["category"]
            if cat in source and source[cat] != f:
                raise ValueError(
                    f"category {cat!r} appears in both {source[cat].name} and {f.name}; "
                    "an aggregation directory must hold one condition"
                )
            source[cat] = f
            by_category.setdefault(cat, []).append(record)
    for records in by_category.values():
        records.sort(key=lambda r: r["iteration"])
    return by_category


_COST_FIELDS = {"uniform": "cost_uniform", "expensive": "cost_expensive"}


def _category_summary(records: list[dict]) -> dict:
    summary = {"final_r_precision": records[-1]["r_precision"]}
    for name, field_name in _COST_FIELDS.items():
        it, cost = M.min_cost_over_run((r["iteration"], r[field_name]) for r in records)
        summary[f"min_cost_{name}"] = cost
        summary[f"min_cost_{name}_iteration"] = it
    return summary


def _load_bins(path: Path) -> dict[str, str]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    bins = {}
    for entry in data:
        bins[entry["category"]] = f"{entry['prevalence_bin']}/{entry['difficulty_bin']}"
    return bins


def aggregate_reports(
    results_dir: Path, baseline_dir: Path, bins: Mapping[str, str] | None = None
) -> dict:
    """Per-bin and overall mean relative cost of results against baseline,
    plus paired t-tests on the raw minimum costs."""
    results = _load_reports(Path(results_dir))
    baseline = _load_reports(Path(baseline_dir))
    common = sorted(set(results) & set(baseline))
    excluded = {
        "results_only": sorted(set(results) - set(baseline)),
        "baseline_only": sorted(set(baseline) - set(results)),
    }
    if not common:
        raise ValueError("no categories common to results and baseline")

    per_category = {}
    for cat in common:
        res = _category_summary(results[cat])
        base = _category_summary(baseline[cat])
        entry = {
            "r_precision_results": res["final_r_precision"],
            "r_precision_baseline": base["final_r_precision"],
        }
        for name in _COST_FIELDS:
            entry[f"cost_{name}_results"] = res[f"min_cost_{name}"]
            entry[f"cost_{name}_baseline"] = base[f"min_cost_{name}"]
            entry[f"relative_cost_{name}"] = M.relative_cost(
                res[f"min_cost_{name}"], base[f"min_cost_{name}"]
            )
        per_category[cat] = entry

    def summarize(categories: Sequence[str]) -> dict:
        block = {
            "n_categories": len(categories),
            "mean_r_precision_results": float(
                sum(per_category[c]["r_precision_results"] for c in categories) / len(categories)
            ),
            "mean_r_precision_baseline": float(
                sum(per_category[c]["r_precision_baseline"] for c in categories) / len(categories)
            ),
        }
        for name in _COST_FIELDS:
            ratios = [per_category[c][f"relative_cost_{name}"] for c in categories]
            block[f"mean_relative_cost_{name}"] = M.aggregate_relative_costs(ratios)
        return block

    overall = summarize(common)
    for name in _COST_FIELDS:
        raw_results = [per_category[c][f"cost_{name}_results"] for c in common]
        raw_baseline = [per_category[c][f"cost_{name}_baseline"] for c in common]
        try:
            test = M.paired_t_test(raw_results, raw_baseline)
            overall[f"t_test_{name}"] = {"t": test.t, "p": test.p, "df": test.df}
        except (M.DegenerateTestError, ValueError) as exc:
            overall[f"t_test_{name}"] = {"degenerate": True, "reason": str(exc)}

    report = {
        "overall": overall,
        "per_category": per_category,
        "excluded": excluded,
    }
    if bins is not None:
        grouped: dict[str, list[str]] = {}
        unbinned = []
        for cat in common:
            cell = bins.get(cat)
            if cell is None:
                unbinned.append(cat)
            else:
                grouped.setdefault(cell, []).append(cat)
        report["bins"] = {cell: summarize(cats) for cell, cats in sorted(grouped.items())}
        if unbinned:
            report["unbinned"] = unbinned
    return report


def _print_aggregate_table(report: dict) -> None:
    overall = report["overall"]
    print(f"categories compared: {overall['n_categories']}")
    for side in ("results", "baseline"):
        print(f"mean final R-Precision ({side}): {overall[f'mean_r_precision_{side}']:.4f}")
    header = f"{'group':<24}{'n':>4}" + "".join(f"{('rel cost ' + n):>20}" for n in _COST_FIELDS)
    print(header)
    line = f"{'overall':<24}{overall['n_categories']:>4}"
    for name in _COST_FIELDS:
        line += f"{overall[f'mean_relative_cost_{name}']:>20.4f}"
    print(line)
    for cell, block in report.get("bins", {}).items():
        line = f"{cell:<24}{block['n_categories']:>4}"
        for name in _COST_FIELDS:
            line += f"{block[f'mean_relative_cost_{name}']:>20.4f}"
        print(line)
    for name in _COST_FIELDS:
        test = overall[f"t_test_{name}"]
        if "degenerate" in test:
            print(f"paired t-test ({name}): degenerate ({test['reason']})")
        else:
            print(f"paired t-test ({name}): t={test['t']:.4f} p={test['p']:.4g} df={test['df']}")
    for key, cats in report["excluded"].items():
        if cats:
            print(f"warning: excluded categories ({key}): {', '.join(cats)}", file=sys.stderr)


def cmd_aggregate(args: argparse.Namespace) -> int:
    bins = _load_bins(Path(args.bins)) if args.bins else None
    report = aggregate_reports(Path(args.results), Path(args.baseline), bins)
    _print_aggregate_table(report)
    if args.output:
        Path(args.output).write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def cmd_trajectory(args: argparse.Namespace) -> int:
    results_dir = Path(args.results)
    series: list[tuple[str, list[tuple[int, float]]]] = []
    for path in sorted(results_dir.rglob("*.jsonl")):
        if path.name.endswith(".metrics.jsonl"):
            continue
        try:
            result = engine.load_run(path)
        except (ValueError, KeyError):
            continue
        if result.config.category != args.category:
            continue
        prefix = f"{result.config.classifier.slug}-{result.config.strategy.kind}"
        for key in sorted(result.records[0].costs) if result.records else []:
            rows = [(r.iteration, r.costs[key]) for r in result.records]
            series.append((f"{prefix}:{key}", rows))
    if not series:
        print(f"error: no runs for category {args.category!r} under {results_dir}", file=sys.stderr)
        return 1
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["series", "iteration", "cost"])
        for name, rows in series:
            for iteration, cost in rows:
                writer.writerow([name, iteration, cost])
    print(f"wrote {sum(len(rows) for _, rows in series)} points, {len(series)} series to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tarsim",
        description="Simulate and evaluate technology-assisted review runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute all runs declared in a manifest")
    p_run.add_argument("manifest", help="manifest JSON file")
    p_run.add_argument("--force", action="store_true", help="recompute existing outputs")
    p_run.set_defaults(func=cmd_run)

    p_agg = sub.add_parser("aggregate", help="compare run reports against a baseline")
    p_agg.add_argument("results", help="directory of *.metrics.jsonl report files")
    p_agg.add_argument("--baseline", required=True, help="baseline report directory")
    p_agg.add_argument("--bins", help="JSON file of category bin assignments")
    p_agg.add_argument("-o", "--output", help="write the full report as JSON")
    p_agg.set_defaults(func=cmd_aggregate)

    p_synth = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p_synth.add_argument("spec", help="synthetic corpus spec JSON file")
    p_synth.add_argument("-o", "--output", required=True, help="corpus file to write")
    p_synth.add_argument("--seed", type=int, required=True, help="generation seed")
    p_synth.set_defaults(func=cmd_synth)

    p_traj = sub.add_parser("trajectory", help="emit per-iteration cost series for a category")
    p_traj.add_argument("results", help="directory containing run result files")
    p_traj.add_argument("--category", required=True)
    p_traj.add_argument("-o", "--output", required=True, help="CSV file to write")
    p_traj.set_defaults(func=cmd_trajectory)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, CorpusError, ManifestError, PluginProtocolError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
