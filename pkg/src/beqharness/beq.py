"""Symbolic statement-equivalence engine.

Two metrics over a prover backend, each run in both implication directions:

* the restricted-`exact?` check: a direction counts only when the suggestion
  that closes the goal actually references the source theorem;
* the staged extension: restricted `exact?`, then conclusion matching
  (`apply` / `convert … using k` with a closure-tactic loop over residual
  subgoals), then direct assumption (`have … := by apply_rules [...]`).

Every attempt is a fresh command against a cached check environment, so the
command stream for a given (t1, t2, config) is deterministic and auditable.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass

from . import normalize
from .backend import (
    CommandTimeout,
    ProverBackend,
    ReplResult,
    SessionDead,
    SessionHandle,
    SessionPool,
)
from .core import (
    DirectionProof,
    EquivalenceVerdict,
    FormalStatement,
    StrategyKind,
    Verdict,
    verdict_from_directions,
)

SRC_NAME = "src_thm"
TGT_NAME = "tgt_thm"

DEFAULT_CLOSURE_TACTICS = ("tauto", "simp_all_arith!", "noncomm_ring", "exact?")
# Main-goal closers of the direct-assumption stage; the `this` is the have.
DIRECT_MAIN_TACTICS = ("tauto", "simp_all_arith!", "exact? using this")


class ContextClash(Exception):
    """Merged context (or a statement inside it) fails to elaborate."""


class _CheckError(Exception):
    """Internal: abort the whole check with an Error verdict."""


@dataclass(frozen=True)
class BeqConfig:
    max_convert_depth: int = 5
    closure_tactics: tuple[str, ...] = DEFAULT_CLOSURE_TACTICS
    max_closure_rounds: int = 3
    per_attempt_timeout: float = 20.0
    triviality_guard: bool = True
    command_timeout: float = 60.0  # env building: context + sorry declarations

    def __post_init__(self) -> None:
        if self.max_convert_depth < 0:
            raise ValueError("max_convert_depth must be >= 0")
        if self.max_closure_rounds < 1:
            raise ValueError("max_closure_rounds must be >= 1")


# --------------------------------------------------------------------------
# Script construction. These are pure so tests can pin exact byte sequences.


def closure_block(cfg: BeqConfig, indent: str = "  ", tactics: tuple[str, ...] | None = None) -> str:
    """The round-robin closure loop compiled to straight-line tactics.

    Each round is total (`skip` absorbs goals none of the arsenal moves), so a
    stalled state just wastes the remaining rounds; the attempt still fails
    unless every goal is closed by the end.
    """
    arsenal = tactics if tactics is not None else cfg.closure_tactics
    line = indent + "all_goals first | " + " | ".join(arsenal) + " | skip"
    return "\n".join([line] * cfg.max_closure_rounds)


def exact_attempt_cmd(goal_sig: str) -> str:
    return f"{goal_sig} := by\n  exact?"


def apply_attempt_cmd(goal_sig: str, source_name: str, cfg: BeqConfig) -> str:
    return f"{goal_sig} := by\n  apply {source_name}\n{closure_block(cfg)}"


def convert_attempt_cmd(goal_sig: str, source_name: str, k: int, cfg: BeqConfig) -> str:
    return f"{goal_sig} := by\n  convert {source_name} using {k}\n{closure_block(cfg)}"


def direct_attempt_cmd(goal_sig: str, source_name: str, source_prop: str, cfg: BeqConfig) -> str:
    return (
        f"{goal_sig} := by\n"
        f"  have : {source_prop} := by\n"
        f"    apply_rules [{source_name}]\n"
        f"{closure_block(cfg, indent='    ')}\n"
        f"{closure_block(cfg, tactics=DIRECT_MAIN_TACTICS)}"
    )


def probe_attempt_cmd(goal_sig: str, cfg: BeqConfig) -> str:
    """Standalone-provability probe: the goal with the closure arsenal alone,
    source theorem nowhere in scope."""
    return f"{goal_sig} := by\n{closure_block(cfg)}"


_DAGGER_MARKS = "✝¹²³⁴⁵⁶⁷⁸⁹⁰"


def goal_to_prop(goal_text: str) -> str:
    """Re-fold a pretty-printed goal state into a standalone proposition.

    Hypothesis lines above the turnstile become a forall telescope;
    instance-style hypotheses become instance-implicit binders; inaccessible
    (daggered) names are sanitized. Best effort — a statement this produces
    that fails to elaborate simply fails its attempt.
    """
    entries: list[str] = []
    for line in goal_text.split("\n"):
        if not line.strip():
            continue
        if line[0] in " \t" and entries:
            entries[-1] += " " + line.strip()
        else:
            entries.append(line.strip())
    conclusion = None
    binders: list[str] = []
    used: set[str] = set()
    for entry in entries:
        if entry.startswith("⊢"):
            conclusion = entry[1:].strip()
            continue
        if conclusion is not None:
            conclusion += " " + entry
            continue
        if " : " not in entry:
            continue
        names_part, type_part = entry.split(" : ", 1)
        names = names_part.split()
        if names and all(n.startswith("inst") for n in names):
            binders.append(f"[{type_part}]")
            continue
        clean_names = []
        for n in names:
            base = "".join(ch for ch in n if ch not in _DAGGER_MARKS) or "a"
            candidate = base
            i = 1
            while candidate in used:
                candidate = f"{base}_{i}"
                i += 1
            used.add(candidate)
            clean_names.append(candidate)
        binders.append(f"({' '.join(clean_names)} : {type_part})")
    if conclusion is None:
        raise ValueError(f"goal text has no turnstile: {goal_text[:80]!r}")
    if binders:
        return "∀ " + " ".join(binders) + ", " + conclusion
    return conclusion


def merge_contexts(c1: str, c2: str) -> str:
    """Line-level set union, first-seen order, duplicates and blanks dropped."""
    seen: set[str] = set()
    out: list[str] = []
    for line in (c1 + "\n" + c2).split("\n"):
        stripped = line.strip()
        if stripped and stripped not in seen:
            seen.add(stripped)
            out.append(stripped)
    return "\n".join(out)


_IDENT_TAIL = r"[A-Za-z0-9_'!?]"


def mentions_name(text: str, name: str) -> bool:
    pattern = rf"(?<!{_IDENT_TAIL}){re.escape(name)}(?!{_IDENT_TAIL})"
    return re.search(pattern, text) is not None


def extract_suggestion(result: ReplResult) -> str | None:
    """The proof term `exact?` reported, if any ("Try this: …" info message)."""
    for d in result.messages:
        if d.severity == "info" and "Try this:" in d.message:
            return d.message.split("Try this:", 1)[1].strip()
    return None


# --------------------------------------------------------------------------
# The checker: owns one session for the duration of one pair check.


@dataclass
class _DirectionEnv:
    goal_env: int | None  # merged context + direction source declared via sorry
    ctx_env: int | None  # merged context only (probe target)
    source_goal: str  # pretty goal of the source declaration


class _Checker:
    def __init__(
        self,
        backend: ProverBackend,
        cfg: BeqConfig,
        project_root=None,
        pool: SessionPool | None = None,
        max_rebuilds: int = 3,
    ) -> None:
        self.backend = backend
        self.cfg = cfg
        self.project_root = project_root
        self.pool = pool
        self.session: SessionHandle | None = None
        self.rebuilds_left = max_rebuilds
        self.context = ""
        self.source_sig = ""
        self.env: _DirectionEnv | None = None

    # session plumbing ------------------------------------------------------

    def _fresh_session(self) -> SessionHandle:
        if self.pool is not None:
            return self.pool.acquire()
        return self.backend.start_session(self.project_root)

    def release(self) -> None:
        if self.session is None:
            return
        if self.pool is not None:
            self.pool.release(self.session)
        else:
            self.backend.close_session(self.session)
        self.session = None

    def _ensure_session(self) -> SessionHandle:
        if self.session is not None and not self.session.dead:
            return self.session
        if self.rebuilds_left <= 0:
            raise _CheckError("session died repeatedly; giving up on this pair")
        self.rebuilds_left -= 1
        if self.session is not None:
            if self.pool is None:
                self.backend.close_session(self.session)
            else:
                self.pool.release(self.session)  # dead; the pool recycles it
        self.session = self._fresh_session()
        if self.source_sig:
            self.env = self._build_env(self.context, self.source_sig)
        return self.session

    # environment building --------------------------------------------------

    def _run_build(self, src: str, env: int | None) -> ReplResult:
        session = self._ensure_session()
        try:
            return self.backend.run_command(session, src, env=env, timeout=self.cfg.command_timeout)
        except CommandTimeout as exc:
            raise _CheckError(f"build_check_env: {exc}") from exc
        except SessionDead as exc:
            raise _CheckError(f"build_check_env: {exc}") from exc

    def _build_env(self, context: str, source_sig: str) -> _DirectionEnv:
        ctx_env: int | None = None
        if context:
            r = self._run_build(context, None)
            if r.has_errors:
                raise ContextClash(
                    "merged context ill-typed: "
                    + "; ".join(d.message for d in r.messages if d.is_error)[:300]
                )
            ctx_env = r.env
        r = self._run_build(source_sig + " := sorry", ctx_env)
        if r.has_errors:
            raise ContextClash(
                "source ill-typed in merged context: "
                + "; ".join(d.message for d in r.messages if d.is_error)[:300]
            )
        source_goal = r.sorries[0].goal if r.sorries else ""
        return _DirectionEnv(goal_env=r.env, ctx_env=ctx_env, source_goal=source_goal)

    def set_direction(self, context: str, source_sig: str) -> None:
        self.context = context
        self.source_sig = ""  # keep _ensure_session from pre-building the env
        self._ensure_session()
        self.env = self._build_env(context, source_sig)
        self.source_sig = source_sig

    # attempts ---------------------------------------------------------------

    def attempt(self, cmd: str, env: int | None) -> ReplResult | None:
        """Run one proof attempt; None means the attempt failed (timeout)."""
        for _ in range(2):
            session = self._ensure_session()
            try:
                return self.backend.run_command(
                    session, cmd, env=env, timeout=self.cfg.per_attempt_timeout
                )
            except CommandTimeout:
                return None  # session is dead; the next attempt rebuilds
            except SessionDead:
                continue  # crash without timeout: rebuild once and retry
        raise _CheckError("session unavailable for attempt")


def _failure_proof(elapsed: float, trivially_provable: bool = False) -> DirectionProof:
    return DirectionProof(
        success=False,
        strategy=StrategyKind.NONE,
        script="",
        trivially_provable=trivially_provable,
        elapsed=elapsed,
    )


def _direction(
    checker: _Checker,
    goal_sig: str,
    source_name: str,
    cfg: BeqConfig,
    staged: bool,
) -> DirectionProof:
    """Run the staged strategy for one direction, stopping at first success."""
    assert checker.env is not None
    start = time.monotonic()
    trivial_seen = False

    # Step 1: restricted exact?.
    result = checker.attempt(exact_attempt_cmd(goal_sig), checker.env.goal_env)
    if result is not None and not result.has_errors:
        suggestion = extract_suggestion(result)
        if suggestion is not None:
            if mentions_name(suggestion, source_name):
                return DirectionProof(
                    success=True,
                    strategy=StrategyKind.EXACT_RESTRICTED,
                    script=suggestion,
                    elapsed=time.monotonic() - start,
                )
            # A suggestion closed the goal without the source theorem.
            trivial_seen = True
    if not staged:
        return _failure_proof(time.monotonic() - start, trivial_seen)

    # Step 2: conclusion matching — apply, then convert at increasing depth.
    step2 = [(apply_attempt_cmd(goal_sig, source_name, cfg), None)]
    step2 += [
        (convert_attempt_cmd(goal_sig, source_name, k, cfg), k)
        for k in range(cfg.max_convert_depth + 1)
    ]
    for cmd, depth in step2:
        result = checker.attempt(cmd, checker.env.goal_env)
        if result is not None and not result.has_errors:
            return DirectionProof(
                success=True,
                strategy=StrategyKind.CONCLUSION_MATCH,
                script=cmd.split(":= by\n", 1)[1],
                trivially_provable=trivial_seen,
                elapsed=time.monotonic() - start,
                convert_depth=depth,
            )

    # Step 3: direct assumption of the source statement.
    if checker.env.source_goal:
        try:
            prop = goal_to_prop(checker.env.source_goal)
        except ValueError:
            prop = None
        if prop is not None:
            cmd = direct_attempt_cmd(goal_sig, source_name, prop, cfg)
            result = checker.attempt(cmd, checker.env.goal_env)
            if result is not None and not result.has_errors:
                return DirectionProof(
                    success=True,
                    strategy=StrategyKind.DIRECT_ASSUMPTION,
                    script=cmd.split(":= by\n", 1)[1],
                    trivially_provable=trivial_seen,
                    elapsed=time.monotonic() - start,
                )

    return _failure_proof(time.monotonic() - start, trivial_seen)


def _apply_guard(checker: _Checker, proof: DirectionProof, goal_sig: str, source_name: str, cfg: BeqConfig) -> DirectionProof:
    """Triviality guard for one successful direction: name-occurrence analysis
    on the closing script plus the standalone-provability probe."""
    if not proof.success or proof.trivially_provable:
        return proof
    if not mentions_name(proof.script, source_name):
        return DirectionProof(
            success=proof.success,
            strategy=proof.strategy,
            script=proof.script,
            trivially_provable=True,
            elapsed=proof.elapsed,
            convert_depth=proof.convert_depth,
        )
    assert checker.env is not None
    result = checker.attempt(probe_attempt_cmd(goal_sig, cfg), checker.env.ctx_env)
    if result is not None and not result.has_errors:
        return DirectionProof(
            success=proof.success,
            strategy=proof.strategy,
            script=proof.script,
            trivially_provable=True,
            elapsed=proof.elapsed,
            convert_depth=proof.convert_depth,
        )
    return proof


def _error_verdict(message: str) -> EquivalenceVerdict:
    nothing = _failure_proof(0.0)
    return EquivalenceVerdict(
        forward=nothing, backward=nothing, verdict=Verdict.ERROR, failure=message
    )


def _check_pair(
    t1: FormalStatement,
    t2: FormalStatement,
    cfg: BeqConfig,
    backend: ProverBackend,
    staged: bool,
    project_root=None,
    pool: SessionPool | None = None,
    short_circuit: bool = False,
) -> EquivalenceVerdict:
    src_sig = normalize.rename_theorem(t1.signature_src, SRC_NAME)
    tgt_sig = normalize.rename_theorem(t2.signature_src, TGT_NAME)
    context = merge_contexts(t1.context, t2.context)
    checker = _Checker(backend, cfg, project_root=project_root, pool=pool)
    try:
        # Forward: does the target follow from the source?
        checker.set_direction(context, src_sig)
        forward = _direction(checker, tgt_sig, SRC_NAME, cfg, staged)
        if staged and cfg.triviality_guard:
            forward = _apply_guard(checker, forward, tgt_sig, SRC_NAME, cfg)

        if short_circuit and not forward.success:
            backward = _failure_proof(0.0)
        else:
            checker.set_direction(context, tgt_sig)
            backward = _direction(checker, src_sig, TGT_NAME, cfg, staged)
            if staged and cfg.triviality_guard:
                backward = _apply_guard(checker, backward, src_sig, TGT_NAME, cfg)
    except ContextClash as exc:
        return _error_verdict(f"context_clash: {exc}")
    except _CheckError as exc:
        return _error_verdict(str(exc))
    finally:
        checker.release()
    verdict = verdict_from_directions(forward, backward, cfg.triviality_guard)
    return EquivalenceVerdict(forward=forward, backward=backward, verdict=verdict)


def beq_plus(
    t1: FormalStatement,
    t2: FormalStatement,
    cfg: BeqConfig | None = None,
    backend: ProverBackend | None = None,
    project_root=None,
    pool: SessionPool | None = None,
    short_circuit: bool = False,
) -> EquivalenceVerdict:
    """Staged bidirectional equivalence check of two cleaned statements."""
    if backend is None:
        raise ValueError("beq_plus requires a prover backend")
    return _check_pair(
        t1, t2, cfg or BeqConfig(), backend, staged=True,
        project_root=project_root, pool=pool, short_circuit=short_circuit,
    )


def beq_l(
    t1: FormalStatement,
    t2: FormalStatement,
    backend: ProverBackend | None = None,
    cfg: BeqConfig | None = None,
    project_root=None,
    pool: SessionPool | None = None,
    short_circuit: bool = False,
) -> EquivalenceVerdict:
    """Restricted-`exact?` bidirectional check (each direction is step 1 only)."""
    if backend is None:
        raise ValueError("beq_l requires a prover backend")
    return _check_pair(
        t1, t2, cfg or BeqConfig(), backend, staged=False,
        project_root=project_root, pool=pool, short_circuit=short_circuit,
    )


def build_check_env(
    t1: FormalStatement,
    t2: FormalStatement,
    session: SessionHandle,
    backend: ProverBackend,
    cfg: BeqConfig | None = None,
) -> int | None:
    """Build the forward check environment (merged contexts + t1 via sorry)
    on an existing session and return its environment id."""
    cfg = cfg or BeqConfig()
    checker = _Checker(backend, cfg)
    checker.session = session
    checker.rebuilds_left = 0
    src_sig = normalize.rename_theorem(t1.signature_src, SRC_NAME)
    env = checker._build_env(merge_contexts(t1.context, t2.context), src_sig)
    return env.goal_env


# --------------------------------------------------------------------------
# Verdict-log serialization (JSONL, scripts included, for audit).


def _direction_dict(p: DirectionProof) -> dict:
    return {
        "success": p.success,
        "strategy": p.strategy.value,
        "convert_depth": p.convert_depth,
        "script": p.script,
        "trivially_provable": p.trivially_provable,
        "elapsed": p.elapsed,
    }


def verdict_dict(v: EquivalenceVerdict) -> dict:
    return {
        "verdict": v.verdict.value,
        "failure": v.failure,
        "forward": _direction_dict(v.forward),
        "backward": _direction_dict(v.backward),
    }


def verdict_record(pair_id: str, v: EquivalenceVerdict) -> str:
    return json.dumps({"pair_id": pair_id, **verdict_dict(v)}, ensure_ascii=False)
