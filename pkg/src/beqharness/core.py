"""Shared domain types. No I/O here; everything is an immutable value."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace


class Origin(enum.Enum):
    REFERENCE = "reference"
    PREDICTION = "prediction"
    SYNTHETIC = "synthetic"


class ContextMode(enum.Enum):
    NONE = "none"
    FULL_FILE = "full_file"
    NO_THEOREMS_PROOFS = "no_theorems_proofs"
    NO_PROOFS = "no_proofs"


class DecodeMode(enum.Enum):
    GREEDY = "greedy"
    TEMPERATURE_SAMPLING = "temperature_sampling"


class TypeCheckKind(enum.Enum):
    WELL_TYPED_WITH_SORRY = "well_typed_with_sorry"
    WELL_TYPED_COMPLETE = "well_typed_complete"
    ILL_TYPED = "ill_typed"
    TIMEOUT = "timeout"
    BACKEND_FAILURE = "backend_failure"

    @property
    def is_well_typed(self) -> bool:
        return self in (TypeCheckKind.WELL_TYPED_WITH_SORRY, TypeCheckKind.WELL_TYPED_COMPLETE)


class Verdict(enum.Enum):
    EQUIVALENT = "equivalent"
    FORWARD_ONLY = "forward_only"
    BACKWARD_ONLY = "backward_only"
    NOT_PROVEN = "not_proven"
    TRIVIALITY_FLAGGED = "triviality_flagged"
    ERROR = "error"


class StrategyKind(enum.Enum):
    """Which stage of the staged prover closed a direction goal.

    CONCLUSION_MATCH covers both the bare `apply` hit (convert_depth is None on
    the DirectionProof) and `convert ... using k` hits (convert_depth = k).
    """

    EXACT_RESTRICTED = "exact_restricted"
    CONCLUSION_MATCH = "conclusion_match"
    DIRECT_ASSUMPTION = "direct_assumption"
    NONE = "none"


@dataclass(frozen=True)
class Diagnostic:
    """One prover message: severity, position span, message text."""

    severity: str  # "error" | "warning" | "info"
    message: str
    pos: tuple[int, int] | None = None  # (line, column)
    end_pos: tuple[int, int] | None = None

    @property
    def is_error(self) -> bool:
        return self.severity == "error"


@dataclass(frozen=True)
class FormalStatement:
    """A theorem statement as opaque source text plus recognized landmarks.

    `context` is the source preceding the declaration (imports, opens,
    variables; may be empty). `signature_src` runs from the declaration
    keyword through the statement, exclusive of any proof body.
    """

    name: str
    context: str
    signature_src: str
    origin: Origin

    def with_context(self, context: str) -> "FormalStatement":
        return replace(self, context=context)

    @property
    def length(self) -> int:
        """Unicode scalar count of signature_src only (context excluded)."""
        return len(self.signature_src)


def serialize_with_sorry(s: FormalStatement) -> str:
    """Canonical checkable form: context, newline, signature, ` := sorry`."""
    prefix = s.context + "\n" if s.context else ""
    return prefix + s.signature_src + " := sorry"


_DECL_STARTS = ("theorem ", "lemma ", "example ", "example:", "example :")


def parse_serialized(text: str) -> tuple[str, str]:
    """Split a `serialize_with_sorry` result back into (context, signature_src).

    The signature starts at the last line opening with a declaration keyword;
    the trailing ` := sorry` is removed. Limited to the canonical serialized
    form — not a general Lean parser.
    """
    body = text.rstrip()
    if body.endswith(":= sorry"):
        body = body[: -len(":= sorry")].rstrip()
    lines = body.split("\n")
    start = 0
    for i, line in enumerate(lines):
        if line.startswith(_DECL_STARTS):
            start = i
    context = "\n".join(lines[:start])
    signature = "\n".join(lines[start:])
    return context, signature


@dataclass(frozen=True)
class GenerationConfig:
    temperature: float
    num_samples: int
    model_id: str
    decode_mode: DecodeMode

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.num_samples < 1:
            raise ValueError(f"num_samples must be >= 1, got {self.num_samples}")
        if self.decode_mode is DecodeMode.GREEDY and self.num_samples != 1:
            raise ValueError("greedy decoding implies num_samples = 1")


@dataclass(frozen=True)
class TypeCheckStatus:
    kind: TypeCheckKind
    diagnostics: tuple[Diagnostic, ...] = ()

    def __post_init__(self) -> None:
        if self.kind is TypeCheckKind.ILL_TYPED and not any(d.is_error for d in self.diagnostics):
            raise ValueError("IllTyped status requires at least one error diagnostic")


@dataclass(frozen=True)
class Candidate:
    """One generator output: raw text plus the results pinned onto it."""

    raw_text: str
    cleaned: FormalStatement | None = None
    typecheck: TypeCheckStatus | None = None


@dataclass(frozen=True)
class CandidatePool:
    problem_id: str
    informal: str
    context_mode: ContextMode
    candidates: tuple[Candidate, ...]
    gen_config: GenerationConfig
    # Shared declaration context for every candidate in the pool (the pool
    # file's optional `context` field); candidates never carry their own.
    context: str = ""


@dataclass(frozen=True)
class DirectionProof:
    """Outcome of trying to derive one statement from the other."""

    success: bool
    strategy: StrategyKind
    script: str
    trivially_provable: bool = False
    elapsed: float = 0.0
    convert_depth: int | None = None

    def __post_init__(self) -> None:
        if self.success and (self.strategy is StrategyKind.NONE or not self.script):
            raise ValueError("a successful direction needs a strategy and a script")


def verdict_from_directions(
    forward: DirectionProof, backward: DirectionProof, triviality_guard: bool = True
) -> Verdict:
    """Pure truth table mapping the two direction proofs to a verdict.

    With the guard on, any trivially-provable direction dominates: the pair is
    flagged and never reported Equivalent. With the guard off the flags are
    ignored (the historical behavior).
    """
    if triviality_guard and (forward.trivially_provable or backward.trivially_provable):
        return Verdict.TRIVIALITY_FLAGGED
    if forward.success and backward.success:
        return Verdict.EQUIVALENT
    if forward.success:
        return Verdict.FORWARD_ONLY
    if backward.success:
        return Verdict.BACKWARD_ONLY
    return Verdict.NOT_PROVEN


@dataclass(frozen=True)
class EquivalenceVerdict:
    forward: DirectionProof
    backward: DirectionProof
    verdict: Verdict
    failure: str | None = None  # failing stage, set only for Verdict.ERROR


@dataclass(frozen=True)
class VerifRecord:
    """A labeled (reference, prediction) pair for metric validation."""

    id: str
    informal: str
    reference: FormalStatement
    prediction: FormalStatement
    label: bool
    reference_length: int = field(default=-1)

    def __post_init__(self) -> None:
        # Recomputed, never trusted from file.
        object.__setattr__(self, "reference_length", len(self.reference.signature_src))
