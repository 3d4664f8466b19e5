"""LLM-driven two-level SATD taxonomy generation and evaluation against human references."""

from .corpus import (
    CorpusError,
    Dataset,
    HumanTaxonomyRef,
    SatdComment,
    SourceContext,
    extract_context,
    load_dataset,
    load_human_reference,
    save_dataset,
)
from .evaluate import (
    ContingencyMatrix,
    HashEmbedder,
    MetricReport,
    aggregate_runs,
    best_match_metrics,
    contingency,
    cosine,
    evaluate_run,
    granularity,
    top_sim,
)
from .explain import Explanation, build_explain_prompt, generate_explanations
from .gateway import (
    ChatRequest,
    ChatResponse,
    CostModel,
    Gateway,
    HttpProvider,
    MockProvider,
    ProviderConfig,
    RunLedger,
    TokenUsage,
    compute_cost,
    request_hash,
)
from .naive import generate_naive_taxonomy
from .report import runlog_export, sankey_export, summary_table, swarm_export
from .taxonomize import (
    Batch,
    CategoryLabel,
    Taxonomy,
    build_level,
    build_taxonomy,
    generate_labels,
    make_batches,
    merge_labels,
)

__version__ = "0.1.0"
