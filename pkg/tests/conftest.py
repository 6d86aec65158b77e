import json
import os
import shutil
import stat
from pathlib import Path

import pytest

from beqharness import FormalStatement, Origin, ScriptedBackend

TESTS_DIR = Path(__file__).parent

FAKE_REPL = TESTS_DIR / "fake_repl.py"


def _executable(path: Path) -> str:
    path.chmod(path.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    return str(path)


@pytest.fixture()
def fake_repl_path() -> str:
    """Path to the stand-in REPL, made executable so it resolves as a command."""
    return _executable(FAKE_REPL)


def statement(sig: str, context: str = "", name: str = "", origin=Origin.PREDICTION) -> FormalStatement:
    if not name:
        parts = sig.split()
        name = parts[1] if len(parts) > 1 else "stmt"
    return FormalStatement(name=name, context=context, signature_src=sig, origin=origin)


def scripted(entries: list[tuple[str, dict]]) -> ScriptedBackend:
    """Build a scripted backend from (request, response-object) pairs."""
    return ScriptedBackend([{"request": req, "response": resp} for req, resp in entries])


def ok(env: int = 1) -> dict:
    return {"env": env}


def err(message: str = "type mismatch") -> dict:
    return {"messages": [{"severity": "error", "data": message}]}


def sorry_ok(env: int, goal: str) -> dict:
    return {
        "env": env,
        "messages": [{"severity": "warning", "data": "declaration uses 'sorry'"}],
        "sorries": [{"goal": goal, "proofState": env}],
    }


def exact_suggestion(text: str) -> dict:
    return {"env": 99, "messages": [{"severity": "info", "data": f"Try this: {text}"}]}


def write_jsonl_file(path: Path, rows: list[dict]) -> Path:
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")
    return path


def has_lean_toolchain() -> bool:
    """True when a real Lean REPL and toolchain are reachable in this environment."""
    if os.environ.get("BEQH_REPL") and Path(os.environ["BEQH_REPL"]).exists():
        return True
    return shutil.which("lake") is not None and shutil.which("repl") is not None


requires_lean = pytest.mark.skipif(
    not has_lean_toolchain(),
    reason="no Lean toolchain in this environment (needs lake + repl or $BEQH_REPL)",
)
