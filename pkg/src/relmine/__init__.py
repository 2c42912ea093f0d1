"""Multilingual search-relevance corpus curation toolkit.

Builds binary query-category and query-item relevance corpora: cleaning
(conflicting labels, duplicates, numeric-only queries), taxonomy-driven
and embedding-mined negative generation, quota-based translation
augmentation, leakage-free splitting, and positive-class F1 evaluation
with per-language distribution reports.
"""

from .augment import (
    EmptyEligiblePoolError,
    HttpTranslator,
    PlannedEntry,
    StubTranslator,
    TranslationDiagnostic,
    TranslationPlan,
    Translator,
    TranslatorError,
    TranslatorUnavailableError,
    dev_paths,
    execute_plan,
    plan_from_json,
    plan_qc_augmentation,
    plan_qi_augmentation,
)
from .cleanse import (
    CleanseReport,
    CleanseResult,
    ConflictGroup,
    LabelStats,
    cleanse,
    dedup,
    filter_numeric,
    is_purely_numeric,
    language_stats,
    load_allowlist,
    remove_conflicts,
)
from .errors import InputError, RelmineError
from .metrics import (
    ConfusionCounts,
    DistributionReport,
    LanguageScore,
    MetricsReport,
    PredictionFileError,
    average_f1,
    confusion_counts,
    distribution_report,
    evaluate_task,
    f1_positive,
    parse_prediction_file,
    precision_recall_f1,
    render_distribution_svg,
    score_records,
    write_prediction_file,
)
from .mining import (
    DEFAULT_HARD_THRESHOLD,
    BatchMineResult,
    EmbeddingFormatError,
    EmbeddingStore,
    LoadDiagnostic,
    MineDiagnostic,
    MiningConfig,
    NoCandidatesBelowThresholdError,
    NoCandidatesError,
    UnknownItemError,
    batch_mine,
    cosine,
    load_embeddings,
    mine_easy,
    mine_hard,
    read_embv1,
    write_embv1,
)
from .records import (
    LANGUAGES,
    ORIGIN_GENERATED,
    ORIGIN_ORIGINAL,
    ORIGIN_TRANSLATED,
    ORIGINS,
    PATH_SEPARATOR,
    TASKS,
    CanonicalKey,
    CategoryPath,
    ParseDiagnostic,
    QCRecord,
    QIRecord,
    Record,
    RecordFileError,
    canonical_key,
    normalize_text,
    parse_record_file,
    serialize_records,
    write_record_file,
)
from .seeding import DEFAULT_SEED, check_seed, mix_seed
from .split import (
    DEFAULT_RATIOS,
    SPLIT_NAMES,
    SplitManifest,
    assign_query_group,
    check_ratios,
    split_query_disjoint,
    split_stratified,
)
from .taxonomy import (
    STRATEGIES,
    CollisionExhaustedError,
    GenDiagnostic,
    GeneratorUnavailableError,
    NegativeGenConfig,
    NoAlternativeError,
    QueryGenerator,
    StubQueryGenerator,
    SubprocessQueryGenerator,
    TaxonomyTree,
    batch_generate,
    build_taxonomy,
    gen_neg_cross_root,
    gen_neg_same_l1,
    gen_neg_sibling_leaf,
    gen_neg_synthetic_query,
)

__version__ = "0.1.0"
