"""Sampling pipeline: type-check filtering and candidate selection.

Selection operates on pools that already went through `filter_well_typed`;
every selector is deterministic (given a seed where randomness is involved)
and ties always resolve toward the earliest-generated candidate.
"""

from __future__ import annotations

import logging
import math
import random
import re
from collections import Counter
from dataclasses import dataclass, replace
from typing import Callable, Sequence

from . import normalize
from .normalize import NoDeclarationFound
from .backend import (
    BackendError,
    CommandTimeout,
    ProverBackend,
    SessionPool,
    classify,
)
from .core import (
    Candidate,
    CandidatePool,
    Diagnostic,
    EquivalenceVerdict,
    FormalStatement,
    TypeCheckKind,
    TypeCheckStatus,
    Verdict,
    serialize_with_sorry,
)

logger = logging.getLogger(__name__)


class EmptyPool(ValueError):
    """Selection requested over a pool with no candidates."""


PREDICTION_NAME = "pred_thm"


def clean_pool(pool: CandidatePool, dummy: str = PREDICTION_NAME) -> CandidatePool:
    """Clean every raw candidate in a pool, sharing one dummy theorem name.

    The shared name keeps textually identical generations identical after
    cleaning, which is what majority voting groups on. Candidates with no
    recognizable declaration keep cleaned=None and fall out at the
    type-check filter.
    """
    updated: list[Candidate] = []
    for cand in pool.candidates:
        if cand.cleaned is not None:
            updated.append(cand)
            continue
        try:
            stmt = normalize.clean(cand.raw_text, dummy)
        except NoDeclarationFound:
            updated.append(cand)
            continue
        updated.append(replace(cand, cleaned=stmt))
    return replace(pool, candidates=tuple(updated))


# --------------------------------------------------------------------------
# Type-check filtering


def annotate_typecheck(
    pool: CandidatePool,
    backend: ProverBackend,
    project_root=None,
    sessions: SessionPool | None = None,
    timeout: float = 60.0,
) -> CandidatePool:
    """Type-check every candidate, returning the pool with statuses filled in.

    The pool's shared context is elaborated once per session and its env id
    cached; candidates already carrying a status are not re-checked (this is
    what makes filtering idempotent).
    """
    if not pool.candidates:
        return pool
    session = sessions.acquire() if sessions else backend.start_session(project_root)
    ctx_env: int | None = None
    ctx_broken: str | None = None
    try:
        if pool.context:
            try:
                r = backend.run_command(session, pool.context, timeout=timeout)
                if r.has_errors:
                    ctx_broken = "; ".join(d.message for d in r.messages if d.is_error)[:300]
                else:
                    ctx_env = r.env
                    session.base_env = r.env
            except BackendError as exc:
                ctx_broken = str(exc)
        updated: list[Candidate] = []
        for cand in pool.candidates:
            if cand.typecheck is not None:
                updated.append(cand)
                continue
            if cand.cleaned is None:
                status = TypeCheckStatus(
                    TypeCheckKind.ILL_TYPED,
                    (Diagnostic("error", "cleaning failed: no declaration found"),),
                )
            elif ctx_broken is not None:
                logger.warning("pool %s context failed, candidate excluded: %s", pool.problem_id, ctx_broken)
                status = TypeCheckStatus(TypeCheckKind.BACKEND_FAILURE)
            else:
                status = _typecheck_one(backend, session, cand.cleaned, ctx_env, timeout)
                if session.dead:
                    # Timed-out/dead session: restart so later candidates get a live one.
                    if sessions:
                        sessions.release(session)
                        session = sessions.acquire()
                    else:
                        backend.close_session(session)
                        session = backend.start_session(project_root)
                    ctx_env = None
                    if pool.context:
                        try:
                            r = backend.run_command(session, pool.context, timeout=timeout)
                            ctx_env = r.env if not r.has_errors else None
                        except BackendError:
                            pass
            updated.append(replace(cand, typecheck=status))
        return replace(pool, candidates=tuple(updated))
    finally:
        if sessions:
            sessions.release(session)
        else:
            backend.close_session(session)


def _typecheck_one(
    backend: ProverBackend,
    session,
    stmt: FormalStatement,
    ctx_env: int | None,
    timeout: float,
) -> TypeCheckStatus:
    src = stmt.signature_src + " := sorry" if ctx_env is not None else serialize_with_sorry(stmt)
    try:
        return classify(backend.run_command(session, src, env=ctx_env, timeout=timeout))
    except CommandTimeout:
        return TypeCheckStatus(TypeCheckKind.TIMEOUT)
    except BackendError as exc:
        logger.warning("backend failure on candidate, excluded: %s", exc)
        return TypeCheckStatus(TypeCheckKind.BACKEND_FAILURE)


def filter_well_typed(
    pool: CandidatePool,
    backend: ProverBackend,
    project_root=None,
    sessions: SessionPool | None = None,
    timeout: float = 60.0,
) -> CandidatePool:
    """Keep only candidates whose statement elaborates (sorry allowed),
    in generation order."""
    annotated = annotate_typecheck(pool, backend, project_root, sessions, timeout)
    survivors = tuple(
        c for c in annotated.candidates if c.typecheck is not None and c.typecheck.kind.is_well_typed
    )
    return replace(annotated, candidates=survivors)


# --------------------------------------------------------------------------
# Selection


@dataclass(frozen=True)
class SelectionOutcome:
    index: int
    candidate: Candidate
    tie_break_applied: bool = False
    pair_checks: int = 0  # symbolic selection only
    budget_exhausted: bool = False


def _require_nonempty(pool: CandidatePool) -> None:
    if not pool.candidates:
        raise EmptyPool(f"pool {pool.problem_id!r} has no candidates to select from")


def select_random_outcome(pool: CandidatePool, seed: int) -> SelectionOutcome:
    _require_nonempty(pool)
    idx = random.Random(seed).randrange(len(pool.candidates))
    return SelectionOutcome(index=idx, candidate=pool.candidates[idx])


def select_random(pool: CandidatePool, seed: int) -> Candidate:
    return select_random_outcome(pool, seed).candidate


def _cleaned_text(cand: Candidate) -> str:
    if cand.cleaned is None:
        raise ValueError("selection requires cleaned candidates")
    return cand.cleaned.signature_src


def select_majority_outcome(pool: CandidatePool) -> SelectionOutcome:
    _require_nonempty(pool)
    groups: dict[str, list[int]] = {}
    for i, cand in enumerate(pool.candidates):
        groups.setdefault(_cleaned_text(cand), []).append(i)
    best_size = max(len(members) for members in groups.values())
    tied = [members for members in groups.values() if len(members) == best_size]
    winner = min(tied, key=lambda members: members[0])
    return SelectionOutcome(
        index=winner[0], candidate=pool.candidates[winner[0]], tie_break_applied=len(tied) > 1
    )


def select_majority(pool: CandidatePool) -> Candidate:
    return select_majority_outcome(pool).candidate


# 4-gram BLEU with brevity penalty; add-one smoothing on the higher orders.

_TOKEN_RE = re.compile(r"[\w'!?]+|[^\s\w]", re.UNICODE)


def tokenize(src: str) -> list[str]:
    """Split on whitespace and punctuation/operator boundaries."""
    return _TOKEN_RE.findall(src)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypothesis: Sequence[str], reference: Sequence[str], max_n: int = 4) -> float:
    if not hypothesis:
        return 0.0
    log_precision = 0.0
    for n in range(1, max_n + 1):
        total = max(len(hypothesis) - n + 1, 0)
        overlap = _ngrams(hypothesis, n) & _ngrams(reference, n)
        match = sum(overlap.values())
        if n == 1:
            if match == 0:
                return 0.0
            p = match / total
        else:
            p = (match + 1) / (total + 1)
        log_precision += math.log(p) / max_n
    if len(hypothesis) < len(reference):
        bp = math.exp(1 - len(reference) / len(hypothesis))
    else:
        bp = 1.0
    return bp * math.exp(log_precision)


def select_self_bleu_outcome(pool: CandidatePool) -> SelectionOutcome:
    _require_nonempty(pool)
    token_lists = [tokenize(_cleaned_text(c)) for c in pool.candidates]
    scores = []
    for i, hyp in enumerate(token_lists):
        scores.append(sum(bleu(hyp, ref) for j, ref in enumerate(token_lists) if j != i))
    best = max(scores)
    winners = [i for i, s in enumerate(scores) if s == best]
    return SelectionOutcome(
        index=winners[0], candidate=pool.candidates[winners[0]], tie_break_applied=len(winners) > 1
    )


def select_self_bleu(pool: CandidatePool) -> Candidate:
    return select_self_bleu_outcome(pool).candidate


class UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        # Smaller index wins the root so representatives are deterministic.
        if ra < rb:
            self.parent[rb] = ra
        else:
            self.parent[ra] = rb

    def clusters(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for i in range(len(self.parent)):
            out.setdefault(self.find(i), []).append(i)
        return out


BeqEngine = Callable[[FormalStatement, FormalStatement], EquivalenceVerdict]


def select_symbolic_equiv_outcome(
    pool: CandidatePool,
    beq_engine: BeqEngine,
    backend: ProverBackend | None = None,
    max_checks: int | None = None,
) -> SelectionOutcome:
    """Cluster candidates into provable-equivalence classes; pick from the
    largest.

    Pairs are visited in canonical (i, j) order and skipped when union-find
    already knows them equivalent, so transitive hits cut below n(n-1)/2.
    The `backend` parameter is informational; `beq_engine` is expected to be
    a closure over whatever backend it runs on.
    """
    _require_nonempty(pool)
    n = len(pool.candidates)
    statements = [
        c.cleaned.with_context(pool.context) if c.cleaned is not None else None
        for c in pool.candidates
    ]
    uf = UnionFind(n)
    checks = 0
    budget_exhausted = False
    for i in range(n):
        if budget_exhausted:
            break
        for j in range(i + 1, n):
            if uf.find(i) == uf.find(j):
                continue
            if max_checks is not None and checks >= max_checks:
                budget_exhausted = True
                break
            si, sj = statements[i], statements[j]
            if si is None or sj is None:
                continue
            checks += 1
            if beq_engine(si, sj).verdict is Verdict.EQUIVALENT:
                uf.union(i, j)
    clusters = list(uf.clusters().values())
    best_size = max(len(c) for c in clusters)
    tied = [c for c in clusters if len(c) == best_size]
    winner = min(tied, key=lambda c: c[0])
    if budget_exhausted:
        logger.warning(
            "pool %s: pair-check budget exhausted after %d checks; selecting from partial classes",
            pool.problem_id,
            checks,
        )
    return SelectionOutcome(
        index=winner[0],
        candidate=pool.candidates[winner[0]],
        tie_break_applied=len(tied) > 1,
        pair_checks=checks,
        budget_exhausted=budget_exhausted,
    )


def select_symbolic_equiv(
    pool: CandidatePool,
    beq_engine: BeqEngine,
    backend: ProverBackend | None = None,
    max_checks: int | None = None,
) -> Candidate:
    return select_symbolic_equiv_outcome(pool, beq_engine, backend, max_checks).candidate


SELECTORS = ("random", "majority", "self-bleu", "symbolic")
