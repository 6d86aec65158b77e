"""Dataset I/O: JSONL loaders with line-numbered schema validation, writers
for round-tripping, and atomic file output."""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
from pathlib import Path
from typing import Iterable

from .core import (
    Candidate,
    CandidatePool,
    ContextMode,
    DecodeMode,
    FormalStatement,
    GenerationConfig,
    Origin,
    VerifRecord,
)
from .metrics import BenchmarkPoint


class SchemaError(ValueError):
    """One or more records failed validation; message lists every line."""

    def __init__(self, path, problems: list[str]) -> None:
        self.problems = problems
        super().__init__(f"{path}: {len(problems)} schema error(s):\n  " + "\n  ".join(problems))


def _iter_jsonl(path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            yield lineno, line


def _field_mapping(path) -> dict[str, str]:
    """Optional sidecar `<file>.fields.json` mapping canonical field names to
    the names actually used in the file."""
    sidecar = Path(str(path) + ".fields.json")
    if sidecar.exists():
        return json.loads(sidecar.read_text(encoding="utf-8"))
    return {}


_NAME_RE = re.compile(r"(?:theorem|lemma)\s+([^\s({\[⟨⦃:]+)")


def decl_name(signature_src: str) -> str:
    m = _NAME_RE.search(signature_src)
    return m.group(1) if m else "unnamed"


def load_verif_dataset(path) -> list[VerifRecord]:
    """Labeled (reference, prediction) pairs.

    Fields: id, nl_statement, src_header, reference, prediction, label.
    """
    mapping = _field_mapping(path)
    required = ["id", "nl_statement", "src_header", "reference", "prediction", "label"]
    records: list[VerifRecord] = []
    problems: list[str] = []
    seen_ids: set[str] = set()
    for lineno, line in _iter_jsonl(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append(f"line {lineno}: invalid JSON ({exc.msg})")
            continue
        row = {k: obj.get(mapping.get(k, k)) for k in required}
        missing = [k for k in required if row[k] is None]
        if missing:
            problems.append(f"line {lineno}: missing field(s) {', '.join(missing)}")
            continue
        if not isinstance(row["label"], bool):
            problems.append(f"line {lineno}: field 'label' must be a boolean")
            continue
        if row["id"] in seen_ids:
            problems.append(f"line {lineno}: duplicate id {row['id']!r}")
            continue
        seen_ids.add(row["id"])
        header = row["src_header"]
        records.append(
            VerifRecord(
                id=row["id"],
                informal=row["nl_statement"],
                reference=FormalStatement(
                    name=decl_name(row["reference"]),
                    context=header,
                    signature_src=row["reference"],
                    origin=Origin.REFERENCE,
                ),
                prediction=FormalStatement(
                    name=decl_name(row["prediction"]),
                    context=header,
                    signature_src=row["prediction"],
                    origin=Origin.PREDICTION,
                ),
                label=row["label"],
            )
        )
    if problems:
        raise SchemaError(path, problems)
    return records


def verif_to_dict(r: VerifRecord) -> dict:
    return {
        "id": r.id,
        "nl_statement": r.informal,
        "src_header": r.reference.context,
        "reference": r.reference.signature_src,
        "prediction": r.prediction.signature_src,
        "label": r.label,
    }


def _parse_context_mode(value, lineno: int, problems: list[str]) -> ContextMode:
    if value is None:
        return ContextMode.NONE
    key = str(value).strip().lower().replace("-", "_")
    aliases = {
        "none": ContextMode.NONE,
        "full_file": ContextMode.FULL_FILE,
        "fullfile": ContextMode.FULL_FILE,
        "no_theorems_proofs": ContextMode.NO_THEOREMS_PROOFS,
        "notheoremsproofs": ContextMode.NO_THEOREMS_PROOFS,
        "no_proofs": ContextMode.NO_PROOFS,
        "noproofs": ContextMode.NO_PROOFS,
    }
    if key not in aliases:
        problems.append(f"line {lineno}: unknown context_mode {value!r}")
        return ContextMode.NONE
    return aliases[key]


def load_pools(path) -> list[CandidatePool]:
    """Candidate pools: problem_id, informal, context (optional), context_mode,
    candidates[], gen_config."""
    mapping = _field_mapping(path)
    pools: list[CandidatePool] = []
    problems: list[str] = []
    seen: set[str] = set()
    for lineno, line in _iter_jsonl(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append(f"line {lineno}: invalid JSON ({exc.msg})")
            continue
        get = lambda k, default=None: obj.get(mapping.get(k, k), default)  # noqa: E731
        missing = [k for k in ("problem_id", "informal", "candidates", "gen_config") if get(k) is None]
        if missing:
            problems.append(f"line {lineno}: missing field(s) {', '.join(missing)}")
            continue
        pid = get("problem_id")
        if pid in seen:
            problems.append(f"line {lineno}: duplicate problem_id {pid!r}")
            continue
        seen.add(pid)
        gc = get("gen_config")
        try:
            decode = gc.get("decode_mode")
            if decode is None:
                decode_mode = (
                    DecodeMode.GREEDY
                    if gc.get("temperature", 0) == 0 and gc.get("num_samples", 1) == 1
                    else DecodeMode.TEMPERATURE_SAMPLING
                )
            else:
                decode_mode = DecodeMode(str(decode).strip().lower())
            gen_config = GenerationConfig(
                temperature=float(gc["temperature"]),
                num_samples=int(gc["num_samples"]),
                model_id=str(gc.get("model_id", "unknown")),
                decode_mode=decode_mode,
            )
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"line {lineno}: bad gen_config ({exc})")
            continue
        candidates = []
        bad = False
        for c in get("candidates"):
            if isinstance(c, str):
                candidates.append(Candidate(raw_text=c))
            elif isinstance(c, dict) and "raw_text" in c:
                candidates.append(Candidate(raw_text=c["raw_text"]))
            else:
                problems.append(f"line {lineno}: candidate entries must be strings or objects with raw_text")
                bad = True
                break
        if bad:
            continue
        pools.append(
            CandidatePool(
                problem_id=pid,
                informal=get("informal"),
                context_mode=_parse_context_mode(get("context_mode"), lineno, problems),
                candidates=tuple(candidates),
                gen_config=gen_config,
                context=get("context", "") or "",
            )
        )
    if problems:
        raise SchemaError(path, problems)
    return pools


def pool_to_dict(pool: CandidatePool) -> dict:
    return {
        "problem_id": pool.problem_id,
        "informal": pool.informal,
        "context": pool.context,
        "context_mode": pool.context_mode.value,
        "candidates": [c.raw_text for c in pool.candidates],
        "gen_config": {
            "temperature": pool.gen_config.temperature,
            "num_samples": pool.gen_config.num_samples,
            "model_id": pool.gen_config.model_id,
            "decode_mode": pool.gen_config.decode_mode.value,
        },
    }


def load_pairs(path) -> list[tuple[str, FormalStatement, FormalStatement]]:
    """Ad-hoc equivalence pairs: id, t1, t2, context (optional)."""
    mapping = _field_mapping(path)
    out = []
    problems: list[str] = []
    for lineno, line in _iter_jsonl(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append(f"line {lineno}: invalid JSON ({exc.msg})")
            continue
        get = lambda k, default=None: obj.get(mapping.get(k, k), default)  # noqa: E731
        missing = [k for k in ("id", "t1", "t2") if get(k) is None]
        if missing:
            problems.append(f"line {lineno}: missing field(s) {', '.join(missing)}")
            continue
        context = get("context", "") or ""
        out.append(
            (
                get("id"),
                FormalStatement(decl_name(get("t1")), context, get("t1"), Origin.REFERENCE),
                FormalStatement(decl_name(get("t2")), context, get("t2"), Origin.PREDICTION),
            )
        )
    if problems:
        raise SchemaError(path, problems)
    return out


def load_benchmark_points(path) -> list[BenchmarkPoint]:
    required = ["label", "human_accuracy", "type_check_rate", "beq_l_rate", "beq_plus_rate"]
    mapping = _field_mapping(path)
    points = []
    problems: list[str] = []
    for lineno, line in _iter_jsonl(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append(f"line {lineno}: invalid JSON ({exc.msg})")
            continue
        row = {k: obj.get(mapping.get(k, k)) for k in required}
        missing = [k for k in required if row[k] is None]
        if missing:
            problems.append(f"line {lineno}: missing field(s) {', '.join(missing)}")
            continue
        try:
            points.append(
                BenchmarkPoint(
                    label=str(row["label"]),
                    human_accuracy=float(row["human_accuracy"]),
                    type_check_rate=float(row["type_check_rate"]),
                    beq_l_rate=float(row["beq_l_rate"]),
                    beq_plus_rate=float(row["beq_plus_rate"]),
                )
            )
        except ValueError as exc:
            problems.append(f"line {lineno}: {exc}")
    if problems:
        raise SchemaError(path, problems)
    return points


# --------------------------------------------------------------------------
# Output


def atomic_write(path, text: str) -> None:
    """Write via temp file + rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path, rows: Iterable[dict]) -> None:
    atomic_write(path, "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
