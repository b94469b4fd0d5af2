"""Link prediction by mean masked-token likelihood over a padded entity catalog."""

from .errors import (
    DatasetError,
    EngineError,
    EvaluationError,
    PromptError,
    ShapeError,
    TableFormatError,
    TokenizationError,
    UsageError,
    VocabularyError,
)
from .evaluation import (
    EvalReport,
    EvaluationRun,
    RankResult,
    TieBreakRng,
    aggregate_seeds,
    compute_metrics,
    evaluate_queries,
    filtered_candidates,
    rank_gold,
)
from .kg import (
    Entity,
    KnowledgeGraph,
    Relation,
    SplitSpec,
    Triple,
    clean_relation,
    clean_synset,
    load_dataset,
    load_dataset_dir,
    make_unseen_split,
    partition_by_entities,
    unseen_sides,
)
from .prompts import (
    PREDICT_HEAD,
    PREDICT_TAIL,
    Prompt,
    Query,
    build_prompt,
    enumerate_queries,
    make_query,
    query_id_of,
    read_prompts,
    render_prompt,
    write_prompts,
)
from .scoring import (
    LogitTable,
    ScoreVector,
    builtin_scorer,
    load_logit_tables,
    save_logit_tables,
    save_table_manifest,
    score_entities,
)
from .tokenizer import EntityCatalog, Vocabulary, vocab_from_texts

__version__ = "0.1.0"

__all__ = [
    "DatasetError", "EngineError", "EvaluationError", "PromptError", "ShapeError",
    "TableFormatError", "TokenizationError", "UsageError", "VocabularyError",
    "EvalReport", "EvaluationRun", "RankResult", "TieBreakRng", "aggregate_seeds",
    "compute_metrics", "evaluate_queries", "filtered_candidates", "rank_gold",
    "Entity", "KnowledgeGraph", "Relation", "SplitSpec", "Triple",
    "clean_relation", "clean_synset", "load_dataset", "load_dataset_dir",
    "make_unseen_split", "partition_by_entities", "unseen_sides",
    "PREDICT_HEAD", "PREDICT_TAIL", "Prompt", "Query", "build_prompt",
    "enumerate_queries", "make_query", "query_id_of", "read_prompts",
    "render_prompt", "write_prompts",
    "LogitTable", "ScoreVector", "builtin_scorer", "load_logit_tables",
    "save_logit_tables", "save_table_manifest", "score_entities",
    "EntityCatalog", "Vocabulary", "vocab_from_texts",
]
