"""Prover backends: a subprocess client speaking the Lean REPL wire protocol,
and a scripted backend replaying canned transcripts for deterministic tests.

Wire framing: one request JSON object terminated by a blank line; one response
JSON object (possibly pretty-printed over several lines) terminated by a blank
line.
"""

from __future__ import annotations

import json
import logging
import os
import queue
import shutil
import subprocess
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .core import Diagnostic, TypeCheckKind, TypeCheckStatus

logger = logging.getLogger(__name__)

DEFAULT_COMMAND_TIMEOUT = 60.0
DEFAULT_STARTUP_TIMEOUT = 300.0
RECYCLE_AFTER_COMMANDS = 200

SORRY_MARKER = "declaration uses 'sorry'"


class BackendError(Exception):
    pass


class ToolchainMissing(BackendError):
    """No REPL executable is resolvable for the requested project."""


class StartupTimeout(BackendError):
    pass


class CommandTimeout(BackendError):
    pass


class SessionDead(BackendError):
    pass


class ProtocolError(BackendError):
    """Response unparseable, or (scripted) request not in the transcript."""


class SessionHandle:
    """One live prover session. Single-consumer: a lock serializes commands."""

    def __init__(self, session_id: str, toolchain: str = "unknown") -> None:
        self.session_id = session_id
        self.toolchain = toolchain
        self.base_env: int | None = None
        self.command_count = 0
        self.dead = False
        self.lock = threading.Lock()

    def __repr__(self) -> str:  # pragma: no cover
        return f"SessionHandle({self.session_id!r}, commands={self.command_count})"


@dataclass(frozen=True)
class SorryGoal:
    goal: str
    pos: tuple[int, int] | None = None
    end_pos: tuple[int, int] | None = None
    proof_state: int | None = None


@dataclass(frozen=True)
class ReplResult:
    env: int | None
    messages: tuple[Diagnostic, ...]
    sorries: tuple[SorryGoal, ...]
    raw: str

    @property
    def has_errors(self) -> bool:
        return any(d.is_error for d in self.messages)


def _pos_tuple(obj) -> tuple[int, int] | None:
    if isinstance(obj, dict) and "line" in obj and "column" in obj:
        return (obj["line"], obj["column"])
    return None


def parse_response(payload: str) -> ReplResult:
    """Parse one response payload; tolerant of unknown fields."""
    try:
        obj = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"unparseable response: {exc}: {payload[:200]!r}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError(f"response is not an object: {payload[:200]!r}")
    return result_from_object(obj, raw=payload)


def result_from_object(obj: dict, raw: str | None = None) -> ReplResult:
    messages = []
    for m in obj.get("messages", []) or []:
        messages.append(
            Diagnostic(
                severity=m.get("severity", "info"),
                message=m.get("data", ""),
                pos=_pos_tuple(m.get("pos")),
                end_pos=_pos_tuple(m.get("endPos")),
            )
        )
    sorries = []
    for s in obj.get("sorries", []) or []:
        sorries.append(
            SorryGoal(
                goal=s.get("goal", ""),
                pos=_pos_tuple(s.get("pos")),
                end_pos=_pos_tuple(s.get("endPos")),
                proof_state=s.get("proofState"),
            )
        )
    env = obj.get("env")
    if env is not None and not isinstance(env, int):
        raise ProtocolError(f"non-integer env in response: {env!r}")
    return ReplResult(
        env=env,
        messages=tuple(messages),
        sorries=tuple(sorries),
        raw=raw if raw is not None else canonical_response(obj),
    )


def canonical_response(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def make_request(src: str, env: int | None) -> str:
    body: dict = {"cmd": src}
    if env is not None:
        body["env"] = env
    return json.dumps(body, ensure_ascii=False) + "\n\n"


def normalize_request(src: str) -> str:
    """Whitespace-insensitive key under which transcript requests are matched."""
    return " ".join(src.split())


def classify(r: ReplResult) -> TypeCheckStatus:
    """Map a prover response to a type-check status.

    Errors dominate; otherwise a sorry marker (message or sorries field) means
    well-typed-with-sorry; otherwise the declaration elaborated completely.
    """
    if r.has_errors:
        return TypeCheckStatus(TypeCheckKind.ILL_TYPED, r.messages)
    if r.sorries or any(SORRY_MARKER in d.message for d in r.messages):
        return TypeCheckStatus(TypeCheckKind.WELL_TYPED_WITH_SORRY, r.messages)
    return TypeCheckStatus(TypeCheckKind.WELL_TYPED_COMPLETE, r.messages)


class ProverBackend:
    """Interface shared by the subprocess client and the scripted replayer."""

    kind = "abstract"

    def start_session(
        self, project_root: str | Path | None = None, timeout: float = DEFAULT_STARTUP_TIMEOUT
    ) -> SessionHandle:
        raise NotImplementedError

    def run_command(
        self,
        session: SessionHandle,
        src: str,
        env: int | None = None,
        timeout: float = DEFAULT_COMMAND_TIMEOUT,
    ) -> ReplResult:
        raise NotImplementedError

    def close_session(self, session: SessionHandle) -> None:
        pass

    def close(self) -> None:
        pass


def resolve_repl_command(project_root: str | Path | None, repl_cmd: str | None = None) -> list[str]:
    """Resolution order: explicit argument, $BEQH_REPL, the project's built
    binary, a `repl` on PATH. Wrapped in `lake env` when lake is available so
    project imports resolve."""
    candidates: list[str] = []
    if repl_cmd:
        candidates.append(repl_cmd)
    if os.environ.get("BEQH_REPL"):
        candidates.append(os.environ["BEQH_REPL"])
    if project_root:
        built = Path(project_root) / ".lake" / "build" / "bin" / "repl"
        if built.exists():
            candidates.append(str(built))
    on_path = shutil.which("repl")
    if on_path:
        candidates.append(on_path)
    for cand in candidates:
        path = shutil.which(cand) or (cand if Path(cand).exists() else None)
        if path:
            lake = shutil.which("lake")
            if lake and project_root:
                return [lake, "env", str(path)]
            return [str(path)]
    raise ToolchainMissing(
        "no Lean REPL executable resolvable (tried --repl-cmd, $BEQH_REPL, "
        ".lake/build/bin/repl, PATH)"
    )


def read_toolchain(project_root: str | Path | None) -> str:
    if project_root:
        pin = Path(project_root) / "lean-toolchain"
        if pin.exists():
            return pin.read_text(encoding="utf-8").strip()
    return "unknown"


class _ReplProcess:
    """Owns one child process plus the reader thread that frames responses."""

    def __init__(self, cmd: list[str], cwd: str | None) -> None:
        try:
            self.proc = subprocess.Popen(
                cmd,
                cwd=cwd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except FileNotFoundError as exc:
            raise ToolchainMissing(f"cannot execute {cmd[0]!r}: {exc}") from exc
        self.responses: queue.Queue[str] = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        buf: list[str] = []
        assert self.proc.stdout is not None
        for line in self.proc.stdout:
            if line.strip() == "":
                if buf:
                    self.responses.put("".join(buf).rstrip("\n"))
                    buf = []
                continue
            buf.append(line)
        if buf:
            self.responses.put("".join(buf).rstrip("\n"))

    def send(self, payload: str) -> None:
        assert self.proc.stdin is not None
        self.proc.stdin.write(payload)
        self.proc.stdin.flush()

    def receive(self, timeout: float) -> str:
        try:
            return self.responses.get(timeout=timeout)
        except queue.Empty:
            raise CommandTimeout(f"no response within {timeout}s")

    def alive(self) -> bool:
        return self.proc.poll() is None

    def kill(self) -> None:
        if self.alive():
            self.proc.kill()
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:  # pragma: no cover
            pass


class LeanReplBackend(ProverBackend):
    """Subprocess client for the Lean REPL."""

    kind = "lean"

    def __init__(self, repl_cmd: str | None = None) -> None:
        self.repl_cmd = repl_cmd
        self._sessions: dict[str, _ReplProcess] = {}
        self._counter = 0
        self._lock = threading.Lock()

    def start_session(
        self, project_root: str | Path | None = None, timeout: float = DEFAULT_STARTUP_TIMEOUT
    ) -> SessionHandle:
        cmd = resolve_repl_command(project_root, self.repl_cmd)
        proc = _ReplProcess(cmd, cwd=str(project_root) if project_root else None)
        deadline = time.monotonic() + timeout
        # The REPL prints no banner; readiness = the child staying alive while
        # accepting stdin. Give a fast-failing spawn a moment to surface.
        time.sleep(min(0.05, timeout))
        if not proc.alive():
            stderr = proc.proc.stderr.read() if proc.proc.stderr else ""
            proc.kill()
            if time.monotonic() > deadline:
                raise StartupTimeout(f"REPL did not become ready within {timeout}s")
            raise StartupTimeout(f"REPL exited on startup: {stderr[:500]}")
        with self._lock:
            session = SessionHandle(f"lean-{self._counter}", read_toolchain(project_root))
            self._counter += 1
            self._sessions[session.session_id] = proc
        return session

    def run_command(
        self,
        session: SessionHandle,
        src: str,
        env: int | None = None,
        timeout: float = DEFAULT_COMMAND_TIMEOUT,
    ) -> ReplResult:
        proc = self._sessions.get(session.session_id)
        if proc is None or session.dead or not proc.alive():
            session.dead = True
            raise SessionDead(f"session {session.session_id} is not live")
        with session.lock:
            proc.send(make_request(src, env))
            try:
                payload = proc.receive(timeout)
            except CommandTimeout:
                session.dead = True
                proc.kill()
                raise
            session.command_count += 1
        return parse_response(payload)

    def close_session(self, session: SessionHandle) -> None:
        proc = self._sessions.pop(session.session_id, None)
        if proc is not None:
            proc.kill()
        session.dead = True

    def close(self) -> None:
        for sid in list(self._sessions):
            self._sessions.pop(sid).kill()


class ScriptedBackend(ProverBackend):
    """Replays a recorded transcript; any unknown request is a ProtocolError.

    Transcript: JSONL of {"request": <src>, "response": <response object>},
    matched after whitespace normalization. An optional "raw" field carries
    the verbatim payload bytes a live session produced, so replays are
    byte-identical with the recording.
    """

    kind = "scripted"

    def __init__(self, entries: list[dict] | None = None, toolchain: str = "scripted") -> None:
        self._table: dict[str, dict] = {}
        self._counter = 0
        self._lock = threading.Lock()
        self.toolchain = toolchain
        self.command_log: list[str] = []
        for entry in entries or []:
            self.add_entry(entry)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        backend = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ProtocolError(f"{path}:{lineno}: bad transcript line: {exc}") from exc
                if "request" not in entry or "response" not in entry:
                    raise ProtocolError(f"{path}:{lineno}: transcript line needs request/response")
                backend.add_entry(entry)
        return backend

    def add_entry(self, entry: dict) -> None:
        key = normalize_request(entry["request"])
        self._table.setdefault(key, entry)

    def start_session(self, project_root=None, timeout: float = DEFAULT_STARTUP_TIMEOUT) -> SessionHandle:
        with self._lock:
            session = SessionHandle(f"scripted-{self._counter}", self.toolchain)
            self._counter += 1
        return session

    def run_command(
        self,
        session: SessionHandle,
        src: str,
        env: int | None = None,
        timeout: float = DEFAULT_COMMAND_TIMEOUT,
    ) -> ReplResult:
        if session.dead:
            raise SessionDead(f"session {session.session_id} is closed")
        with session.lock:
            self.command_log.append(src)
            session.command_count += 1
        entry = self._table.get(normalize_request(src))
        if entry is None:
            raise ProtocolError(f"request not in transcript: {normalize_request(src)[:120]!r}")
        raw = entry.get("raw")
        return result_from_object(entry["response"], raw=raw)

    def close_session(self, session: SessionHandle) -> None:
        session.dead = True


class RecordingBackend(ProverBackend):
    """Delegates to an inner backend while capturing a replayable transcript."""

    def __init__(self, inner: ProverBackend) -> None:
        self.inner = inner
        self.kind = inner.kind
        self.entries: list[dict] = []
        self._lock = threading.Lock()

    def start_session(self, project_root=None, timeout: float = DEFAULT_STARTUP_TIMEOUT) -> SessionHandle:
        return self.inner.start_session(project_root, timeout)

    def run_command(self, session, src, env=None, timeout=DEFAULT_COMMAND_TIMEOUT) -> ReplResult:
        result = self.inner.run_command(session, src, env=env, timeout=timeout)
        with self._lock:
            self.entries.append({"request": src, "response": json.loads(result.raw), "raw": result.raw})
        return result

    def close_session(self, session: SessionHandle) -> None:
        self.inner.close_session(session)

    def close(self) -> None:
        self.inner.close()

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.entries:
                fh.write(json.dumps(entry, ensure_ascii=False) + "\n")


class SessionPool:
    """Bounded pool of single-consumer sessions, recycled after heavy use."""

    def __init__(
        self,
        backend: ProverBackend,
        project_root: str | Path | None = None,
        size: int = 1,
        recycle_after: int = RECYCLE_AFTER_COMMANDS,
        startup_timeout: float = DEFAULT_STARTUP_TIMEOUT,
    ) -> None:
        if size < 1:
            raise ValueError("pool size must be >= 1")
        self.backend = backend
        self.project_root = project_root
        self.recycle_after = recycle_after
        self.startup_timeout = startup_timeout
        self._idle: queue.Queue[SessionHandle] = queue.Queue()
        for _ in range(size):
            self._idle.put(backend.start_session(project_root, startup_timeout))

    def acquire(self) -> SessionHandle:
        session = self._idle.get()
        if session.dead or session.command_count >= self.recycle_after:
            self.backend.close_session(session)
            session = self.backend.start_session(self.project_root, self.startup_timeout)
        return session

    def release(self, session: SessionHandle) -> None:
        self._idle.put(session)

    def lease(self):
        pool = self

        class _Lease:
            def __enter__(self) -> SessionHandle:
                self.session = pool.acquire()
                return self.session

            def __exit__(self, *exc) -> None:
                pool.release(self.session)

        return _Lease()

    def close(self) -> None:
        while not self._idle.empty():
            self.backend.close_session(self._idle.get_nowait())
