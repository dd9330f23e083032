"""One TAR run: seed, iterate fit/score/record/select, persist the trail.

The recording point is fixed: metrics at iteration k are computed from the
model trained on the labeled set *before* the iteration's batch is added,
so a run of k iterations evaluates k models, the first trained on the seed
document alone.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from . import metrics as M
from .classifier import (
    LabeledSet,
    PluginHandle,
    PluginLaunchSpec,
    PluginProtocolError,
    fit_logreg,
    plugin_open,
    predict_proba,
    validate_score_vector,
)
from .corpus import Corpus
from .features import VectorizerConfig, build_vocabulary, vectorize
from .sampling import CorpusExhausted, SamplingStrategy, select_batch, select_seed


@dataclass(frozen=True)
class LogregSpec:
    penalty: float = 1.0
    vectorizer: VectorizerConfig = VectorizerConfig()

    @property
    def slug(self) -> str:
        return "logreg"


@dataclass(frozen=True)
class PluginClassifierSpec:
    launch: PluginLaunchSpec
    label: str = "plugin"

    @property
    def slug(self) -> str:
        return self.label


ClassifierSpec = Union[LogregSpec, PluginClassifierSpec]


@dataclass(frozen=True)
class RunConfig:
    corpus_ref: str
    category: str
    strategy: SamplingStrategy
    classifier: ClassifierSpec
    iterations: int = 20
    recall_target: float = 0.8
    cost_structures: tuple[M.CostStructure, ...] = (M.UNIFORM, M.EXPENSIVE_TRAINING)
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if not 0.0 < self.recall_target <= 1.0:
            raise ValueError(f"recall_target must be in (0, 1], got {self.recall_target}")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    batch_selected: tuple[str, ...]
    n_labeled_pos: int
    n_labeled_neg: int
    scores_digest: str
    r_precision: float
    d_star: int
    dfr: float
    wss: float
    costs: dict[str, float]
    fit_seconds: float | None = None
    score_seconds: float | None = None


@dataclass(frozen=True)
class RunResult:
    config: RunConfig
    records: tuple[IterationRecord, ...]
    min_cost: dict[str, tuple[int, float]]


class _LogregScorer:
    def __init__(self, corpus: Corpus, spec: LogregSpec):
        self.spec = spec
        self.vocab = build_vocabulary(corpus, spec.vectorizer)
        self.matrix = vectorize(corpus, self.vocab, spec.vectorizer)
        self.doc_index = {doc_id: i for i, doc_id in enumerate(corpus.doc_ids)}
        self.model = None

    def fit(self, labeled: LabeledSet) -> None:
        self.model = fit_logreg(self.matrix, labeled, self.doc_index, self.spec.penalty)

    def score(self) -> np.ndarray:
        assert self.model is not None
        return predict_proba(self.model, self.matrix)

    def close(self) -> None:
        pass


class _PluginScorer:
    def __init__(self, corpus: Corpus, spec: PluginClassifierSpec, corpus_ref: str, category: str):
        self.doc_ids = corpus.doc_ids
        self.handle: PluginHandle = plugin_open(spec.launch)
        try:
            n_docs = self.handle.load_corpus(corpus_ref, category)
        except PluginProtocolError:
            self.handle.close()
            raise
        if n_docs != len(corpus):
            self.handle.close()
            raise PluginProtocolError(
                f"plugin loaded {n_docs} documents but the corpus has {len(corpus)}"
            )

    def fit(self, labeled: LabeledSet) -> None:
        self.handle.fit(labeled)

    def score(self) -> np.ndarray:
        return self.handle.score(self.doc_ids)

    def close(self) -> None:
        self.handle.close()


def _evaluated_structures(config: RunConfig) -> list[M.CostStructure]:
    """Configured structures, plus the canonical two the report format needs."""
    structures = list(config.cost_structures)
    present = {cs.key for cs in structures}
    for canonical in (M.UNIFORM, M.EXPENSIVE_TRAINING):
        if canonical.key not in present:
            structures.append(canonical)
    return structures


def run_tar(
    config: RunConfig,
    corpus: Corpus,
    partial_output_path: str | Path | None = None,
) -> RunResult:
    """Execute one simulated review run.

    Reviews are simulated by revealing gold labels. On classifier failure
    mid-run the partial result is persisted to ``partial_output_path`` (when
    given) before the error propagates. Deterministic given the config and
    a deterministic classifier.
    """
    qrels = corpus.relevant_ids(config.category)
    doc_ids = corpus.doc_ids
    seed_doc = select_seed(corpus, config.category, config.rng_seed)
    labeled = LabeledSet()
    labeled.add(seed_doc, 1, iteration_acquired=0)
    structures = _evaluated_structures(config)

    if isinstance(config.classifier, LogregSpec):
        scorer = _LogregScorer(corpus, config.classifier)
    else:
        scorer = _PluginScorer(corpus, config.classifier, config.corpus_ref, config.category)

    records: list[IterationRecord] = []
    try:
        for k in range(1, config.iterations + 1):
            t0 = time.monotonic()
            scorer.fit(labeled)
            t1 = time.monotonic()
            scores = scorer.score()
            t2 = time.monotonic()
            scores = validate_score_vector(scores, len(corpus))

            state = M.RunState(
                doc_ids=doc_ids,
                scores=scores,
                labeled=labeled,
                qrels=qrels,
                recall_target=config.recall_target,
            )
            counts = M.phase_counts(state)
            ranked = M.rank_documents(scores, doc_ids)
            dfr_value = M.dfr(ranked, qrels, config.recall_target)
            try:
                batch = select_batch(scores, labeled, config.strategy, doc_ids)
            except CorpusExhausted:
                batch = []
            records.append(
                IterationRecord(
                    iteration=k,
                    batch_selected=tuple(batch),
                    n_labeled_pos=labeled.n_pos,
                    n_labeled_neg=labeled.n_neg,
                    scores_digest=hashlib.sha256(scores.tobytes()).hexdigest()[:16],
                    r_precision=M.r_precision(scores, doc_ids, qrels),
                    d_star=counts[2] + counts[3],
                    dfr=dfr_value,
                    wss=M.wss(dfr_value, config.recall_target),
                    costs={cs.key: M.cost_from_counts(counts, cs) for cs in structures},
                    fit_seconds=t1 - t0,
                    score_seconds=t2 - t1,
                )
            )
            if not batch:
                break
            labels = [1 if doc_id in qrels else 0 for doc_id in batch]
            labeled.add_batch(batch, labels, iteration=k)
    except PluginProtocolError:
        if partial_output_path is not None:
            persist_run(_finalize(config, records), partial_output_path)
        raise
    finally:
        scorer.close()

    return _finalize(config, records)


def _finalize(config: RunConfig, records: Sequence[IterationRecord]) -> RunResult:
    min_cost: dict[str, tuple[int, float]] = {}
    if records:
        for key in records[0].costs:
            min_cost[key] = M.min_cost_over_run((r.iteration, r.costs[key]) for r in records)
    return RunResult(config=config, records=tuple(records), min_cost=min_cost)


# --------------------------------------------------------------------------
# Serialization. The run file is newline-delimited JSON with a fixed field
# order: config line, one record line per iteration, then the min-cost
# summary. Wall-clock timings are not part of the run file (they would
# break byte-for-byte reproducibility); they live in a `.timings` sidecar.


def strategy_to_json(strategy: SamplingStrategy) -> dict:
    return {"kind": strategy.kind, "batch_size": strategy.batch_size}


def strategy_from_json(data: Mapping) -> SamplingStrategy:
    return SamplingStrategy(kind=data["kind"], batch_size=data.get("batch_size", 200))


def cost_structure_to_json(cs: M.CostStructure) -> dict:
    return {
        "name": cs.name,
        "train_pos": cs.train_pos,
        "train_neg": cs.train_neg,
        "review_pos": cs.review_pos,
        "review_neg": cs.review_neg,
    }


def cost_structure_from_json(data: Mapping) -> M.CostStructure:
    return M.CostStructure(
        train_pos=data["train_pos"],
        train_neg=data["train_neg"],
        review_pos=data["review_pos"],
        review_neg=data["review_neg"],
        name=data.get("name", ""),
    )


def classifier_spec_to_json(spec: ClassifierSpec) -> dict:
    if isinstance(spec, LogregSpec):
        v = spec.vectorizer
        return {
            "kind": "logreg",
            "penalty": spec.penalty,
            "vectorizer": {
                "k1": v.k1,
                "b": v.b,
                "min_df": v.min_df,
                "tokenizer": v.tokenizer,
                "use_idf": v.use_idf,
            },
        }
    return {
        "kind": "plugin",
        "label": spec.label,
        "argv": list(spec.launch.argv),
        "config": dict(spec.launch.config),
        "init_timeout": spec.launch.init_timeout,
        "call_timeout": spec.launch.call_timeout,
    }


def classifier_spec_from_json(data: Mapping) -> ClassifierSpec:
    kind = data.get("kind")
    if kind == "logreg":
        v = data.get("vectorizer", {})
        return LogregSpec(
            penalty=data.get("penalty", 1.0),
            vectorizer=VectorizerConfig(
                k1=v.get("k1", 1.2),
                b=v.get("b", 0.75),
                min_df=v.get("min_df", 1),
                tokenizer=v.get("tokenizer", "unicode-word"),
                use_idf=v.get("use_idf", False),
            ),
        )
    if kind == "plugin":
        return PluginClassifierSpec(
            launch=PluginLaunchSpec(
                argv=tuple(data["argv"]),
                config=dict(data.get("config", {})),
                init_timeout=data.get("init_timeout", 60.0),
                call_timeout=data.get("call_timeout", 3600.0),
            ),
            label=data.get("label", "plugin"),
        )
    raise ValueError(f"unknown classifier kind {kind!r}")


def run_config_to_json(config: RunConfig) -> dict:
    return {
        "corpus": config.corpus_ref,
        "category": config.category,
        "strategy": strategy_to_json(config.strategy),
        "classifier": classifier_spec_to_json(config.classifier),
        "iterations": config.iterations,
        "recall_target": config.recall_target,
        "cost_structures": [cost_structure_to_json(cs) for cs in config.cost_structures],
        "rng_seed": config.rng_seed,
    }


def run_config_from_json(data: Mapping) -> RunConfig:
    defaults = RunConfig.__dataclass_fields__
    structures = data.get("cost_structures")
    return RunConfig(
        corpus_ref=data["corpus"],
        category=data["category"],
        strategy=strategy_from_json(data["strategy"]),
        classifier=classifier_spec_from_json(data["classifier"]),
        iterations=data.get("iterations", 20),
        recall_target=data.get("recall_target", 0.8),
        cost_structures=(
            tuple(cost_structure_from_json(cs) for cs in structures)
            if structures is not None
            else (M.UNIFORM, M.EXPENSIVE_TRAINING)
        ),
        rng_seed=data.get("rng_seed", 0),
    )


def _record_to_json(record: IterationRecord) -> dict:
    return {
        "iteration": record.iteration,
        "batch_selected": list(record.batch_selected),
        "n_labeled_pos": record.n_labeled_pos,
        "n_labeled_neg": record.n_labeled_neg,
        "scores_digest": record.scores_digest,
        "r_precision": record.r_precision,
        "d_star": record.d_star,
        "dfr": record.dfr,
        "wss": record.wss,
        "costs": record.costs,
    }


def _record_from_json(data: Mapping) -> IterationRecord:
    return IterationRecord(
        iteration=data["iteration"],
        batch_selected=tuple(data["batch_selected"]),
        n_labeled_pos=data["n_labeled_pos"],
        n_labeled_neg=data["n_labeled_neg"],
        scores_digest=data["scores_digest"],
        r_precision=data["r_precision"],
        d_star=data["d_star"],
        dfr=data["dfr"],
        wss=data["wss"],
        costs=dict(data["costs"]),
    )


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _timings_path(path: Path) -> Path:
    return path.with_name(path.name + ".timings")


def persist_run(result: RunResult, path: str | Path) -> None:
    """Write the run file (deterministic bytes) and its timing sidecar."""
    path = Path(path)
    lines = [_dump({"type": "config", "config": run_config_to_json(result.config)})]
    for record in result.records:
        lines.append(_dump({"type": "record", "record": _record_to_json(record)}))
    summary = {
        key: {"iteration": it, "cost": cost} for key, (it, cost) in result.min_cost.items()
    }
    lines.append(_dump({"type": "summary", "min_cost": summary}))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    timed = [r for r in result.records if r.fit_seconds is not None or r.score_seconds is not None]
    if timed:
        with _timings_path(path).open("w", encoding="utf-8") as handle:
            for r in timed:
                handle.write(
                    _dump(
                        {
                            "iteration": r.iteration,
                            "fit_seconds": r.fit_seconds,
                            "score_seconds": r.score_seconds,
                        }
                    )
                    + "\n"
                )


def load_run(path: str | Path) -> RunResult:
    """Read a run file back; rejects truncated or malformed files outright."""
    path = Path(path)
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if len(lines) < 2:
        raise ValueError(f"{path}: not a run file (need config and summary lines)")
    parsed = [json.loads(line) for line in lines]
    if parsed[0].get("type") != "config":
        raise ValueError(f"{path}: first line must be the run config")
    if parsed[-1].get("type") != "summary":
        raise ValueError(f"{path}: truncated run file (missing summary line)")
    config = run_config_from_json(parsed[0]["config"])
    records = []
    for item in parsed[1:-1]:
        if item.get("type") != "record":
            raise ValueError(f"{path}: unexpected line of type {item.get('type')!r}")
        records.append(_record_from_json(item["record"]))
    min_cost = {
        key: (entry["iteration"], entry["cost"])
        for key, entry in parsed[-1]["min_cost"].items()
    }

    timings_file = _timings_path(path)
    if timings_file.exists():
        by_iteration = {}
        with timings_file.open("r", encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    entry = json.loads(line)
                    by_iteration[entry["iteration"]] = entry
        records = [
            replace(
                r,
                fit_seconds=by_iteration.get(r.iteration, {}).get("fit_seconds"),
                score_seconds=by_iteration.get(r.iteration, {}).get("score_seconds"),
            )
            for r in records
        ]
    return RunResult(config=config, records=tuple(records), min_cost=min_cost)


def timing_report(results: Sequence[RunResult]) -> dict:
    """Mean and total fit/score wall-clock seconds, per run and overall.

    Runs without timing data are reported with null means, never zeros.
    """
    per_run = []
    for result in results:
        fit_times = [r.fit_seconds for r in result.records if r.fit_seconds is not None]
        score_times = [r.score_seconds for r in result.records if r.score_seconds is not None]
        per_run.append(
            {
                "category": result.config.category,
                "strategy": result.config.strategy.kind,
                "classifier": result.config.classifier.slug,
                "n_iterations": len(result.records),
                "mean_fit_seconds": float(np.mean(fit_times)) if fit_times else None,
                "mean_score_seconds": float(np.mean(score_times)) if score_times else None,
                "total_fit_seconds": float(np.sum(fit_times)) if fit_times else None,
                "total_score_seconds": float(np.sum(score_times)) if score_times else None,
            }
        )
    timed = [r for r in per_run if r["mean_fit_seconds"] is not None]
    overall = {
        "n_runs": len(per_run),
        "mean_fit_seconds": (
            float(np.mean([r["mean_fit_seconds"] for r in timed])) if timed else None
        ),
        "mean_score_seconds": (
            float(np.mean([r["mean_score_seconds"] for r in timed if r["mean_score_seconds"] is not None]))
            if timed
            else None
        ),
        "total_run_seconds": (
            float(
                np.sum(
                    [
                        (r["total_fit_seconds"] or 0.0) + (r["total_score_seconds"] or 0.0)
                        for r in timed
                    ]
                )
            )
            if timed
            else None
        ),
    }
    return {"runs": per_run, "overall": overall}
