"""attnpress: compress long user-personalization contexts into short profiles.

The toolkit scores each sentence of a user's history by how much a marking
model's final prompt token attends to it, wraps the high-scoring sentences
in explicit importance markers, and has a summarization model produce a
token-limited profile from the marked history. Baseline methods, task
evaluators, and a batch CLI round out the pipeline.
"""

from .attention import (
    AttentionSnapshot,
    SentenceScores,
    SignalScores,
    TokenScores,
    average_heads,
    sentence_scores,
    signal_scores,
)
from .context import (
    Sentence,
    TaskInstance,
    TokenAssignment,
    UserContext,
    assign_tokens,
    compose_context,
    filter_signals,
    generation_context,
    ingest_generation_dataset,
    ingest_selection_dataset,
    parse_generation_document,
    parse_selection_document,
    selection_context,
    split_free_text,
)
from .errors import (
    AttnpressError,
    CacheError,
    ContextError,
    DatasetError,
    GeneratorError,
    MarkingError,
    PipelineError,
    ProviderError,
    SnapshotError,
    TemplateError,
)
from .evaluation import (
    ReportTable,
    RougeScore,
    SelectionOutcome,
    ablate,
    eval_generation,
    eval_selection,
    rouge_l,
    run_grid,
    signal_report,
    token_efficiency,
)
from .marking import (
    END_MARKER,
    START_MARKER,
    MarkedContext,
    MarkSelection,
    mark_context,
    marked_spans,
    random_selection,
    select_important,
    strip_markers,
)
from .pipeline import (
    METHODS,
    CompressedProfile,
    CompressionConfig,
    ProfileCache,
    attention_selection,
    compress,
    compress_many,
    enforce_token_limit,
)

__version__ = "0.1.0"
