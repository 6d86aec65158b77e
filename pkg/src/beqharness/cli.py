"""Command-line surface: `beqh <subcommand>`.

Exit codes: 0 success, 2 schema/usage error, 3 backend unavailable,
4 partial results (some items failed but output was written).

Every run writes a `run_manifest.json` next to its outputs holding the
resolved flags, the seed, dataset hashes, the backend kind and the toolchain
string — enough to reproduce the run. Manifests carry no timestamps, so two
identical runs produce identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import beq as beq_mod
from .backend import (
    BackendError,
    LeanReplBackend,
    ProverBackend,
    ScriptedBackend,
    SessionPool,
    StartupTimeout,
    ToolchainMissing,
    read_toolchain,
    resolve_repl_command,
)
from .beq import BeqConfig, beq_l, beq_plus, verdict_dict
from .core import FormalStatement, Origin, Verdict
from .datasets import (
    SchemaError,
    atomic_write,
    load_benchmark_points,
    load_pairs,
    load_pools,
    load_verif_dataset,
    sha256_file,
    write_jsonl,
)
from .metrics import (
    EvalReport,
    ProblemResult,
    aggregate_report,
    binary_metrics,
    kendall_tau_b,
    pearson,
    stratify_by_length,
)
from .pipeline import (
    SELECTORS,
    annotate_typecheck,
    clean_pool,
    select_majority_outcome,
    select_random_outcome,
    select_self_bleu_outcome,
    select_symbolic_equiv_outcome,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_BACKEND = 3
EXIT_PARTIAL = 4

DEFAULT_MAX_PAIR_CHECKS = 1225  # C(50, 2): every pair of a full 50-sample pool


# --------------------------------------------------------------------------
# Configuration: flags > config file > environment > defaults.


def load_config(path: str | Path) -> dict[str, str]:
    """Key/value config file; same names as the long flags, `#` comments."""
    data: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SchemaError(path, [f"line {lineno}: expected key = value, got {line!r}"])
            key, _, value = line.partition("=")
            value = value.strip()
            if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
                value = value[1:-1]
            data[key.strip().replace("-", "_")] = value
    return data


def _pick(flag_value, config: dict, key: str, env_var: str | None, default, cast):
    if flag_value is not None:
        return flag_value
    if key in config:
        return cast(config[key])
    if env_var and os.environ.get(env_var):
        return cast(os.environ[env_var])
    return default


@dataclass
class Settings:
    backend: str
    project: str | None
    jobs: int
    timeout: float | None
    transcript: str | None


def resolve_settings(args: argparse.Namespace, config: dict[str, str]) -> Settings:
    return Settings(
        backend=_pick(getattr(args, "backend", None), config, "backend", None, "lean", str),
        project=_pick(getattr(args, "project", None), config, "project", "BEQH_LEAN_PROJECT", None, str),
        jobs=_pick(getattr(args, "jobs", None), config, "jobs", None, 1, int),
        timeout=_pick(getattr(args, "timeout", None), config, "timeout", "BEQH_TIMEOUT", None, float),
        transcript=_pick(getattr(args, "transcript", None), config, "transcript", None, None, str),
    )


def make_backend(settings: Settings) -> tuple[ProverBackend, str]:
    """Build the prover backend; returns (backend, toolchain string)."""
    if settings.backend == "scripted":
        if not settings.transcript:
            raise UsageError("--backend scripted requires --transcript FILE")
        return ScriptedBackend.from_file(settings.transcript), "scripted"
    resolve_repl_command(settings.project)  # fail fast when no REPL is reachable
    return LeanReplBackend(), read_toolchain(settings.project)


def beq_config(settings: Settings, guard: bool = True) -> BeqConfig:
    if settings.timeout is not None:
        return BeqConfig(
            triviality_guard=guard,
            per_attempt_timeout=settings.timeout,
            command_timeout=settings.timeout,
        )
    return BeqConfig(triviality_guard=guard)


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# Run manifest


def write_manifest(
    out_dir: Path,
    command: str,
    settings: Settings,
    flags: dict,
    datasets: dict[str, str | Path],
    toolchain: str,
    seed: int | None = None,
) -> None:
    manifest = {
        "command": command,
        "backend": settings.backend,
        "toolchain": toolchain,
        "project": settings.project,
        "jobs": settings.jobs,
        "timeout": settings.timeout,
        "transcript": settings.transcript,
        "seed": seed,
        "flags": flags,
        "datasets": {
            role: {"path": str(p), "sha256": sha256_file(p)}
            for role, p in datasets.items()
            if p is not None
        },
    }
    atomic_write(
        out_dir / "run_manifest.json",
        json.dumps(manifest, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
    )


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(getattr(args, "out_dir", None) or "beqh-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


class PartialFailure(Exception):
    """A hard failure mid-run; carries the ordered results finished so far."""

    def __init__(self, results: list, cause: Exception) -> None:
        super().__init__(str(cause))
        self.results = results
        self.cause = cause


def _run_parallel(jobs: int, fn, items: list):
    """Apply fn over items preserving order; bounded workers when jobs > 1.

    A BackendError aborts the run but re-raises as PartialFailure so callers
    can still write out the prefix that completed.
    """
    results: list = []
    try:
        if jobs <= 1 or len(items) <= 1:
            for item in items:
                results.append(fn(item))
        else:
            with ThreadPoolExecutor(max_workers=jobs) as executor:
                for result in executor.map(fn, items):
                    results.append(result)
    except BackendError as exc:
        raise PartialFailure(results, exc) from exc
    return results


# --------------------------------------------------------------------------
# typecheck


def cmd_typecheck(args: argparse.Namespace, settings: Settings) -> int:
    out_dir = _out_dir(args)
    pools = load_pools(args.pools)
    backend, toolchain = make_backend(settings)
    timeout = settings.timeout if settings.timeout is not None else 60.0
    sessions = SessionPool(backend, settings.project, size=settings.jobs)
    try:
        annotated = _run_parallel(
            settings.jobs,
            lambda pool: annotate_typecheck(
                clean_pool(pool), backend, settings.project, sessions=sessions, timeout=timeout
            ),
            pools,
        )
    finally:
        sessions.close()
        backend.close()
    rows = []
    total = well_typed = 0
    for pool in annotated:
        for index, cand in enumerate(pool.candidates):
            status = cand.typecheck
            total += 1
            ok = status is not None and status.kind.is_well_typed
            well_typed += ok
            rows.append(
                {
                    "problem_id": pool.problem_id,
                    "index": index,
                    "status": status.kind.value if status else None,
                    "well_typed": ok,
                    "errors": [d.message for d in (status.diagnostics if status else ()) if d.is_error],
                }
            )
    out_path = Path(args.out) if args.out else out_dir / "typecheck.jsonl"
    write_jsonl(out_path, rows)
    write_manifest(
        out_dir, "typecheck", settings, {"pools": str(args.pools), "out": str(out_path)},
        {"pools": args.pools}, toolchain,
    )
    rate = 100.0 * well_typed / total if total else 0.0
    print(f"{len(annotated)} pools, {total} candidates, {well_typed} well-typed ({rate:.1f}%)")
    print(f"wrote {out_path}")
    return EXIT_OK


# --------------------------------------------------------------------------
# beq


def cmd_beq(args: argparse.Namespace, settings: Settings) -> int:
    out_dir = _out_dir(args)
    pairs = load_pairs(args.pairs)
    backend, toolchain = make_backend(settings)
    cfg = beq_config(settings, guard=not args.no_guard)
    check = beq_l if args.metric == "beq-l" else beq_plus
    sessions = SessionPool(backend, settings.project, size=settings.jobs)
    out_path = Path(args.out) if args.out else out_dir / "verdicts.jsonl"
    aborted = False
    try:
        verdicts = _run_parallel(
            settings.jobs,
            lambda pair: check(
                pair[1], pair[2], cfg=cfg, backend=backend,
                project_root=settings.project, pool=sessions,
                short_circuit=args.short_circuit,
            ),
            pairs,
        )
    except PartialFailure as exc:
        verdicts = exc.results
        aborted = True
        logger.error("backend failed mid-run, %d/%d pairs done: %s", len(verdicts), len(pairs), exc)
    finally:
        sessions.close()
        backend.close()
    errored = 0
    lines: list[str] = []
    for (pair_id, _, _), verdict in zip(pairs, verdicts):
        errored += verdict.verdict is Verdict.ERROR
        lines.append(beq_mod.verdict_record(pair_id, verdict))
    atomic_write(out_path, "".join(line + "\n" for line in lines))
    if aborted:
        print(f"aborted; partial verdict log ({len(verdicts)} pairs) at {out_path}", file=sys.stderr)
        return EXIT_BACKEND
    write_manifest(
        out_dir, "beq", settings,
        {
            "pairs": str(args.pairs), "metric": args.metric, "no_guard": args.no_guard,
            "short_circuit": args.short_circuit, "out": str(out_path),
        },
        {"pairs": args.pairs}, toolchain,
    )
    counts: dict[str, int] = {}
    for v in verdicts:
        counts[v.verdict.value] = counts.get(v.verdict.value, 0) + 1
    print(f"{len(pairs)} pairs: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    print(f"wrote {out_path}")
    return EXIT_PARTIAL if errored else EXIT_OK


# --------------------------------------------------------------------------
# eval-verif


def _parse_cuts(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(part) for part in text.split(","))
    except ValueError:
        raise UsageError(f"--strata expects two comma-separated integers, got {text!r}") from None
    if not lo < hi:
        raise UsageError(f"--strata cuts must be increasing, got {text!r}")
    return lo, hi


def cmd_eval_verif(args: argparse.Namespace, settings: Settings) -> int:
    out_dir = _out_dir(args)
    cuts = _parse_cuts(args.strata)
    records = load_verif_dataset(args.dataset)
    positives = sum(r.label for r in records)
    print(f"loaded {len(records)} records, {positives} positive")
    backend, toolchain = make_backend(settings)
    cfg = beq_config(settings)
    check = beq_l if args.metric == "beq-l" else beq_plus
    sessions = SessionPool(backend, settings.project, size=settings.jobs)
    verdict_path = out_dir / "verdicts.jsonl"
    aborted = False
    try:
        verdicts = _run_parallel(
            settings.jobs,
            lambda rec: check(
                rec.prediction, rec.reference, cfg=cfg, backend=backend,
                project_root=settings.project, pool=sessions,
            ),
            records,
        )
    except PartialFailure as exc:
        verdicts = exc.results
        aborted = True
        logger.error(
            "backend failed mid-run, %d/%d records done: %s", len(verdicts), len(records), exc
        )
    finally:
        sessions.close()
        backend.close()
    log_rows = []
    for rec, v in zip(records, verdicts):
        log_rows.append({"pair_id": rec.id, "label": rec.label, **verdict_dict(v)})
    write_jsonl(verdict_path, log_rows)
    if aborted:
        print(f"aborted; partial verdict log ({len(verdicts)} records) at {verdict_path}", file=sys.stderr)
        return EXIT_BACKEND
    by_id = {rec.id: v.verdict is Verdict.EQUIVALENT for rec, v in zip(records, verdicts)}

    overall = binary_metrics([by_id[r.id] for r in records], [r.label for r in records])
    lo, hi = cuts
    names = (f"length<{lo}", f"{lo}<=length<={hi}", f"length>{hi}")
    strata = {}
    for name, subset in zip(names, stratify_by_length(records, cuts)):
        strata[name] = (
            binary_metrics([by_id[r.id] for r in subset], [r.label for r in subset]).as_dict()
            if subset
            else None
        )
        if strata[name] is not None:
            strata[name]["n"] = len(subset)
    report = {
        "total": len(records),
        "positives": positives,
        "metric": args.metric,
        "overall": {**overall.as_dict(), "n": len(records)},
        "strata": strata,
    }
    atomic_write(
        out_dir / "verif_report.json",
        json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
    )
    write_manifest(
        out_dir, "eval-verif", settings,
        {"dataset": str(args.dataset), "metric": args.metric, "strata": args.strata},
        {"dataset": args.dataset}, toolchain,
    )

    def fmt(x):
        return "—" if x is None else f"{x:.1f}"

    print("| Slice | N | Precision | Recall | F1 |")
    print("|---|---|---|---|---|")
    rows = [("overall", {**overall.as_dict(), "n": len(records)})]
    rows += [(name, strata[name]) for name in names if strata[name] is not None]
    for name, row in rows:
        print(f"| {name} | {row['n']} | {fmt(row['precision'])} | {fmt(row['recall'])} | {fmt(row['f1'])} |")
    print(f"wrote {out_dir / 'verif_report.json'} and {verdict_path}")
    return EXIT_PARTIAL if any(v.verdict is Verdict.ERROR for v in verdicts) else EXIT_OK


# --------------------------------------------------------------------------
# eval-autoform


def load_references(path) -> dict[str, FormalStatement]:
    """Reference statements keyed by problem_id: problem_id, reference,
    context (optional)."""
    refs: dict[str, FormalStatement] = {}
    problems: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append(f"line {lineno}: invalid JSON ({exc.msg})")
                continue
            missing = [k for k in ("problem_id", "reference") if obj.get(k) is None]
            if missing:
                problems.append(f"line {lineno}: missing field(s) {', '.join(missing)}")
                continue
            if obj["problem_id"] in refs:
                problems.append(f"line {lineno}: duplicate problem_id {obj['problem_id']!r}")
                continue
            refs[obj["problem_id"]] = FormalStatement(
                name="reference",
                context=obj.get("context", "") or "",
                signature_src=obj["reference"],
                origin=Origin.REFERENCE,
            )
    if problems:
        raise SchemaError(path, problems)
    return refs


def _parse_k_list(text: str | None) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        ks = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise UsageError(f"--k expects comma-separated integers, got {text!r}") from None
    if any(k < 1 for k in ks):
        raise UsageError("--k values must be >= 1")
    return ks


def cmd_eval_autoform(args: argparse.Namespace, settings: Settings) -> int:
    out_dir = _out_dir(args)
    k_list = _parse_k_list(args.k)
    pools = load_pools(args.pools)
    refs = load_references(args.refs)
    missing = [p.problem_id for p in pools if p.problem_id not in refs]
    if missing:
        logger.warning(
            "%d pool(s) have no reference and are skipped: %s",
            len(missing), ", ".join(missing[:10]),
        )
    pools = [p for p in pools if p.problem_id in refs]
    if not pools:
        print("no pools joined with references; nothing to evaluate", file=sys.stderr)
        return EXIT_SCHEMA
    backend, toolchain = make_backend(settings)
    cfg = beq_config(settings)
    timeout = settings.timeout if settings.timeout is not None else 60.0
    sessions = SessionPool(backend, settings.project, size=settings.jobs)
    method = args.select

    def eval_problem(pool):
        pool = clean_pool(pool)
        annotated = annotate_typecheck(
            pool, backend, settings.project, sessions=sessions, timeout=timeout
        )
        keep = [
            i for i, c in enumerate(annotated.candidates)
            if c.typecheck is not None and c.typecheck.kind.is_well_typed
        ]
        survivors = replace(annotated, candidates=tuple(annotated.candidates[i] for i in keep))
        pool_size = len(pool.candidates)
        selection_row = {
            "problem_id": pool.problem_id,
            "method": method,
            "index": None,
            "cleaned": None,
            "tie_break_applied": False,
            "pair_checks": 0,
            "budget_exhausted": False,
        }
        if not keep:
            result = ProblemResult(
                problem_id=pool.problem_id, method=method, pool_size=pool_size,
                survivors=0, n_correct=0 if k_list else None,
            )
            return result, selection_row, None

        ref = refs[pool.problem_id]
        cache: dict[str, tuple[bool, object]] = {}

        def plus_equivalent(stmt: FormalStatement) -> tuple[bool, object]:
            """(is-equivalent, full verdict); one check per distinct cleaned text."""
            key = stmt.signature_src
            if key not in cache:
                v = beq_plus(
                    stmt, ref, cfg=cfg, backend=backend,
                    project_root=settings.project, pool=sessions,
                )
                cache[key] = (v.verdict is Verdict.EQUIVALENT, v)
            return cache[key]

        if method == "random":
            outcome = select_random_outcome(survivors, args.seed)
        elif method == "majority":
            outcome = select_majority_outcome(survivors)
        elif method == "self-bleu":
            outcome = select_self_bleu_outcome(survivors)
        else:
            engine = lambda a, b: beq_plus(  # noqa: E731
                a, b, cfg=cfg, backend=backend,
                project_root=settings.project, pool=sessions,
            )
            outcome = select_symbolic_equiv_outcome(
                survivors, engine, backend=backend, max_checks=args.max_checks
            )
        selected = outcome.candidate.cleaned.with_context(pool.context)
        selection_row.update(
            {
                "index": keep[outcome.index],
                "cleaned": outcome.candidate.cleaned.signature_src,
                "tie_break_applied": outcome.tie_break_applied,
                "pair_checks": outcome.pair_checks,
                "budget_exhausted": outcome.budget_exhausted,
            }
        )
        l_verdict = beq_l(
            selected, ref, cfg=cfg, backend=backend,
            project_root=settings.project, pool=sessions,
        )
        _, p_full = plus_equivalent(selected)
        n_correct = None
        if k_list:
            n_correct = sum(
                plus_equivalent(c.cleaned.with_context(pool.context))[0]
                for c in survivors.candidates
            )
        result = ProblemResult(
            problem_id=pool.problem_id, method=method, pool_size=pool_size,
            survivors=len(keep), beq_l_verdict=l_verdict.verdict,
            beq_plus_verdict=p_full.verdict, n_correct=n_correct,
        )
        verdict_row = {
            "problem_id": pool.problem_id,
            "selected_index": keep[outcome.index],
            "n_correct": n_correct,
            "beq_l": verdict_dict(l_verdict),
            "beq_plus": verdict_dict(p_full),
        }
        return result, selection_row, verdict_row

    try:
        evaluated = _run_parallel(settings.jobs, eval_problem, pools)
    except PartialFailure as exc:
        logger.error("backend failed mid-run after %d/%d problems: %s", len(exc.results), len(pools), exc)
        return EXIT_BACKEND
    finally:
        sessions.close()
        backend.close()

    results = [r for r, _, _ in evaluated]
    report = aggregate_report(results, k_list)
    atomic_write(out_dir / "report.json", report.to_json())
    atomic_write(out_dir / "report.md", report.to_markdown())
    write_jsonl(out_dir / "selections.jsonl", [sel for _, sel, _ in evaluated])
    write_jsonl(out_dir / "verdicts.jsonl", [v for _, _, v in evaluated if v is not None])
    write_manifest(
        out_dir, "eval-autoform", settings,
        {
            "pools": str(args.pools), "refs": str(args.refs), "select": method,
            "k": args.k, "max_checks": args.max_checks,
        },
        {"pools": args.pools, "refs": args.refs}, toolchain, seed=args.seed,
    )
    print(report.to_markdown(), end="")
    print(f"wrote report.json, report.md, selections.jsonl, verdicts.jsonl to {out_dir}")
    return EXIT_OK


# --------------------------------------------------------------------------
# correlate


def cmd_correlate(args: argparse.Namespace, settings: Settings) -> int:
    out_dir = _out_dir(args)
    points = load_benchmark_points(args.points)
    usable = [p for p in points if p.human_accuracy is not None]
    if len(usable) < 2:
        print("correlate needs at least 2 points with human_accuracy", file=sys.stderr)
        return EXIT_SCHEMA
    human = [p.human_accuracy for p in usable]
    columns = {
        "type_check_rate": [p.type_check_rate for p in usable],
        "beq_l_rate": [p.beq_l_rate for p in usable],
        "beq_plus_rate": [p.beq_plus_rate for p in usable],
    }
    table = {
        name: {"pearson": pearson(human, xs), "kendall_tau_b": kendall_tau_b(human, xs)}
        for name, xs in columns.items()
    }
    atomic_write(
        out_dir / "correlations.json",
        json.dumps({"n": len(usable), "columns": table}, sort_keys=True, indent=2) + "\n",
    )
    write_manifest(
        out_dir, "correlate", settings, {"points": str(args.points)},
        {"points": args.points}, "none",
    )

    def fmt(x):
        return "—" if x is None else f"{x:.3f}"

    print(f"| Metric | Pearson r | Kendall τ_b |  (n={len(usable)})")
    print("|---|---|---|")
    for name in ("type_check_rate", "beq_l_rate", "beq_plus_rate"):
        row = table[name]
        print(f"| {name} | {fmt(row['pearson'])} | {fmt(row['kendall_tau_b'])} |")
    print(f"wrote {out_dir / 'correlations.json'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# generate


def load_problems(path) -> list[dict]:
    rows: list[dict] = []
    problems: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append(f"line {lineno}: invalid JSON ({exc.msg})")
                continue
            missing = [k for k in ("problem_id", "informal") if obj.get(k) is None]
            if missing:
                problems.append(f"line {lineno}: missing field(s) {', '.join(missing)}")
                continue
            rows.append(obj)
    if problems:
        raise SchemaError(path, problems)
    return rows


def cmd_generate(args: argparse.Namespace, settings: Settings, config: dict[str, str]) -> int:
    from .generate import EndpointConfig, GenerationError, generate_candidates

    out_dir = _out_dir(args)
    problems = load_problems(args.problems)
    endpoint = _pick(args.endpoint, config, "endpoint", None, None, str)
    if not endpoint:
        print(
            "no generation endpoint configured; pass --endpoint URL or set "
            "`endpoint` in the config file (an auth token, if needed, is read "
            "from the env var named by `auth_token_env`)",
            file=sys.stderr,
        )
        return EXIT_SCHEMA
    cfg = EndpointConfig(
        url=endpoint,
        model_id=_pick(args.model, config, "model", None, "default", str),
        temperature=_pick(args.temperature, config, "temperature", None, 0.7, float),
        num_samples=_pick(args.n, config, "n", None, 50, int),
        auth_token_env=_pick(args.auth_token_env, config, "auth_token_env", None, None, str),
    )
    out_path = Path(args.out) if args.out else out_dir / "pools.jsonl"
    try:
        completed, failed = generate_candidates(problems, cfg, out_path)
    except GenerationError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_SCHEMA
    write_manifest(
        out_dir, "generate", settings,
        {
            "problems": str(args.problems), "endpoint": endpoint, "model": cfg.model_id,
            "temperature": cfg.temperature, "n": cfg.num_samples,
            "auth_token_env": cfg.auth_token_env, "out": str(out_path),
        },
        {"problems": args.problems}, "none",
    )
    print(f"{completed} pool(s) written to {out_path}, {failed} problem(s) failed")
    return EXIT_PARTIAL if failed else EXIT_OK


# --------------------------------------------------------------------------
# Parser


def _add_backend_opts(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--backend", choices=("lean", "scripted"), default=None)
    sub.add_argument("--transcript", default=None, help="response transcript for --backend scripted")
    sub.add_argument("--project", default=None, help="Lean project root (env: BEQH_LEAN_PROJECT)")
    sub.add_argument("--jobs", type=int, default=None, help="parallel workers (default 1)")
    sub.add_argument("--timeout", type=float, default=None, help="per-command seconds (env: BEQH_TIMEOUT)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beqh",
        description="Prover-backed equivalence metrics and evaluation for statement autoformalization.",
    )
    parser.add_argument("--config", default=None, help="key = value config file; flags win")
    parser.add_argument("--verbose", action="store_true", help="info-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("typecheck", help="clean and type-check candidate pools")
    p.add_argument("--pools", required=True)
    p.add_argument("--out", default=None, help="annotated results (default OUT_DIR/typecheck.jsonl)")
    p.add_argument("--out-dir", default=None)
    _add_backend_opts(p)

    p = sub.add_parser("beq", help="check statement pairs for provable equivalence")
    p.add_argument("--pairs", required=True)
    p.add_argument("--metric", choices=("beq-l", "beq-plus"), default="beq-plus")
    p.add_argument("--no-guard", action="store_true", help="disable the triviality guard")
    p.add_argument("--short-circuit", action="store_true", help="skip backward when forward fails")
    p.add_argument("--out", default=None, help="verdict log (default OUT_DIR/verdicts.jsonl)")
    p.add_argument("--out-dir", default=None)
    _add_backend_opts(p)

    p = sub.add_parser("eval-verif", help="score labeled (prediction, reference) pairs")
    p.add_argument("--dataset", required=True)
    p.add_argument("--metric", choices=("beq-l", "beq-plus"), default="beq-plus")
    p.add_argument("--strata", default="115,165", help="length cuts LO,HI")
    p.add_argument("--out-dir", default=None)
    _add_backend_opts(p)

    p = sub.add_parser("eval-autoform", help="filter, select and score candidate pools")
    p.add_argument("--pools", required=True)
    p.add_argument("--refs", required=True)
    p.add_argument("--select", choices=SELECTORS, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", default=None, help="pass@k values, e.g. 1,5,20,50")
    p.add_argument("--max-checks", type=int, default=DEFAULT_MAX_PAIR_CHECKS,
                   help="pair-check budget for symbolic selection")
    p.add_argument("--out-dir", default=None)
    _add_backend_opts(p)

    p = sub.add_parser("correlate", help="correlate benchmark rates with human accuracy")
    p.add_argument("--points", required=True)
    p.add_argument("--out-dir", default=None)

    p = sub.add_parser("generate", help="sample candidate formalizations from an HTTP endpoint")
    p.add_argument("--problems", required=True)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--auth-token-env", default=None,
                   help="name of the env var holding the bearer token")
    p.add_argument("--out", default=None)
    p.add_argument("--out-dir", default=None)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config) if args.config else {}
        settings = resolve_settings(args, config)
        if args.command == "typecheck":
            return cmd_typecheck(args, settings)
        if args.command == "beq":
            return cmd_beq(args, settings)
        if args.command == "eval-verif":
            return cmd_eval_verif(args, settings)
        if args.command == "eval-autoform":
            return cmd_eval_autoform(args, settings)
        if args.command == "correlate":
            return cmd_correlate(args, settings)
        if args.command == "generate":
            return cmd_generate(args, settings, config)
        raise AssertionError(f"unhandled command {args.command}")
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_SCHEMA
    except SchemaError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_SCHEMA
    except FileNotFoundError as exc:
        print(f"file not found: {exc.filename}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ToolchainMissing, StartupTimeout) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
