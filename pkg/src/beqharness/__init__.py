"""Prover-backed equivalence metrics and an evaluation harness for
statement autoformalization.

The package drives a Lean REPL to decide whether two formal statements are
provably equivalent (`beq_l`, `beq_plus`), filters and selects sampled
formalization candidates (`pipeline`), and aggregates benchmark statistics
(`metrics`). The `beqh` command line ties these together.
"""

from .backend import (
    BackendError,
    CommandTimeout,
    LeanReplBackend,
    ProtocolError,
    ProverBackend,
    RecordingBackend,
    ReplResult,
    ScriptedBackend,
    SessionDead,
    SessionHandle,
    SessionPool,
    SorryGoal,
    StartupTimeout,
    ToolchainMissing,
    classify,
    make_request,
    parse_response,
    read_toolchain,
    resolve_repl_command,
)
from .beq import (
    BeqConfig,
    ContextClash,
    beq_l,
    beq_plus,
    build_check_env,
    goal_to_prop,
    merge_contexts,
    verdict_record,
)
from .core import (
    Candidate,
    CandidatePool,
    ContextMode,
    DecodeMode,
    Diagnostic,
    DirectionProof,
    EquivalenceVerdict,
    FormalStatement,
    GenerationConfig,
    Origin,
    StrategyKind,
    TypeCheckKind,
    TypeCheckStatus,
    Verdict,
    VerifRecord,
    parse_serialized,
    serialize_with_sorry,
    verdict_from_directions,
)
from .datasets import (
    SchemaError,
    atomic_write,
    decl_name,
    load_benchmark_points,
    load_pairs,
    load_pools,
    load_verif_dataset,
    pool_to_dict,
    sha256_file,
    verif_to_dict,
    write_jsonl,
)
from .metrics import (
    BenchmarkPoint,
    BinaryScore,
    EvalReport,
    MethodRow,
    MissingVerdicts,
    ProblemResult,
    aggregate_report,
    binary_metrics,
    f1_from_rates,
    kendall_tau_b,
    pass_at_k,
    pass_at_k_exact,
    pearson,
    stratify_by_length,
)
from .normalize import (
    NoDeclarationFound,
    clean,
    extract_code_block,
    find_declaration,
    normalize_whitespace,
    prepare_context,
    rename_theorem,
    strip_comments,
    strip_proof,
)
from .pipeline import (
    EmptyPool,
    SELECTORS,
    SelectionOutcome,
    UnionFind,
    annotate_typecheck,
    bleu,
    clean_pool,
    filter_well_typed,
    select_majority,
    select_majority_outcome,
    select_random,
    select_random_outcome,
    select_self_bleu,
    select_self_bleu_outcome,
    select_symbolic_equiv,
    select_symbolic_equiv_outcome,
    tokenize,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
