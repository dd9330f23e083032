"""Simulation and cost-aware evaluation of technology-assisted review.

Replays iterative active-learning review workflows over fully labeled
corpora and evaluates them with cost-structure-aware high-recall-retrieval
metrics. Classifiers are pluggable: a built-in sparse logistic regression
baseline, or any external process speaking the stdio scoring protocol.
"""

from .classifier import (
    LabeledExample,
    LabeledSet,
    LinearModel,
    PluginHandle,
    PluginLaunchSpec,
    PluginProtocolError,
    fit_logreg,
    plugin_close,
    plugin_fit,
    plugin_open,
    plugin_score,
    predict_proba,
)
from .corpus import (
    BinThresholds,
    CategoryBin,
    Corpus,
    CorpusError,
    Document,
    assign_bins,
    category_prevalence,
    downsample,
    load_corpus,
    load_qrels,
    merge_qrels,
    serialize_corpus,
)
from .engine import (
    ClassifierSpec,
    IterationRecord,
    LogregSpec,
    PluginClassifierSpec,
    RunConfig,
    RunResult,
    load_run,
    persist_run,
    run_tar,
    timing_report,
)
from .features import (
    VectorizerConfig,
    Vocabulary,
    build_vocabulary,
    vectorize,
)
from .metrics import (
    EXPENSIVE_TRAINING,
    UNIFORM,
    CostStructure,
    RunState,
    aggregate_relative_costs,
    dfr,
    min_cost_over_run,
    optimal_second_phase_depth,
    paired_t_test,
    r_precision,
    rank_documents,
    relative_cost,
    total_cost,
    wss,
)
from .sampling import (
    CategoryEmptyError,
    CorpusExhausted,
    SamplingStrategy,
    select_batch,
    select_seed,
)
from .synth import SynthCategorySpec, SynthSpec, generate_corpus

__version__ = "0.1.0"
