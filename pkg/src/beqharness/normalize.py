"""Cleaning applied to generator output before type-checking.

Statements are opaque source text; the only structure recognized here is the
handful of landmarks needed to trim proofs safely: declaration keywords,
bracket nesting, comments/strings, `let` bindings, top-level `:=` and `by`.
"""

from __future__ import annotations

import logging
import re

from .core import ContextMode, FormalStatement, Origin

logger = logging.getLogger(__name__)


class NoDeclarationFound(ValueError):
    """Input has no top-level theorem/lemma/example declaration."""


_DECL_KEYWORDS = ("theorem", "lemma", "example")

_OPEN_BRACKETS = {"(": ")", "[": "]", "{": "}", "⟨": "⟩", "⦃": "⦄", "«": "»"}
_CLOSE_BRACKETS = set(_OPEN_BRACKETS.values())

_IDENT_EXTRA = set("_'!?₀₁₂₃₄₅₆₇₈₉")


def _is_ident_char(ch: str) -> bool:
    return ch.isalnum() or ch in _IDENT_EXTRA


def _token_at(src: str, i: int, token: str) -> bool:
    """True when `token` occurs at i with identifier boundaries on both sides."""
    if not src.startswith(token, i):
        return False
    if i > 0 and _is_ident_char(src[i - 1]):
        return False
    end = i + len(token)
    return end >= len(src) or not _is_ident_char(src[end])


def _skip_noncode(src: str, i: int) -> int:
    """If src[i:] opens a comment or string literal, return the index just
    past it; otherwise return i unchanged."""
    if src.startswith("--", i):
        j = src.find("\n", i)
        return len(src) if j < 0 else j  # keep the newline itself
    if src.startswith("/-", i):
        depth = 1
        j = i + 2
        while j < len(src) and depth:
            if src.startswith("/-", j):
                depth += 1
                j += 2
            elif src.startswith("-/", j):
                depth -= 1
                j += 2
            else:
                j += 1
        return j
    if src[i] == '"':
        j = i + 1
        while j < len(src):
            if src[j] == "\\":
                j += 2
            elif src[j] == '"':
                return j + 1
            else:
                j += 1
        return j
    return i


def find_declaration(src: str, start: int = 0) -> tuple[int, str]:
    """Locate the first top-level declaration keyword.

    Returns (index, keyword). Comments, strings and bracketed regions are
    skipped, so a `theorem` mentioned in prose inside a comment does not count.
    """
    depth = 0
    i = start
    while i < len(src):
        j = _skip_noncode(src, i)
        if j != i:
            i = j
            continue
        ch = src[i]
        if ch in _OPEN_BRACKETS:
            depth += 1
        elif ch in _CLOSE_BRACKETS:
            depth = max(0, depth - 1)
        elif depth == 0:
            for kw in _DECL_KEYWORDS:
                if _token_at(src, i, kw):
                    return i, kw
        i += 1
    raise NoDeclarationFound("no theorem/lemma/example declaration found")


def strip_proof(raw: str) -> str:
    """Truncate a declaration at the end of its statement.

    Everything from the first top-level `:=` (or, failing that, a top-level
    `by`) onward is removed. `:=` inside binder defaults, anonymous
    constructors and `let` bindings does not truncate, and `=>` never does.
    Statements already proof-free come back unchanged.
    """
    decl_start, kw = find_declaration(raw)
    i = decl_start + len(kw)
    depth = 0
    open_lets = 0
    by_cut = -1
    while i < len(raw):
        j = _skip_noncode(raw, i)
        if j != i:
            i = j
            continue
        ch = raw[i]
        if ch in _OPEN_BRACKETS:
            depth += 1
        elif ch in _CLOSE_BRACKETS:
            depth = max(0, depth - 1)
        elif depth == 0:
            if raw.startswith(":=", i):
                if open_lets:
                    i += 2
                    continue
                return raw[:i].rstrip()
            if ch == ";" and open_lets:
                open_lets -= 1
            elif _token_at(raw, i, "let"):
                open_lets += 1
            elif by_cut < 0 and _token_at(raw, i, "by"):
                by_cut = i
        i += 1
    if by_cut >= 0:
        return raw[:by_cut].rstrip()
    return raw


_MODIFIERS = ("private", "protected", "noncomputable", "partial", "unsafe", "scoped")

# A declaration name ends at whitespace, a binder opener, or the statement colon.
_NAME_END = set(" \t\n({[⟨⦃:")


def rename_theorem(src: str, dummy: str) -> str:
    """Replace the declaration's name token with `dummy`; nothing else changes.

    Anonymous `example` declarations become `theorem <dummy>`. Later
    occurrences of the original name (or superstrings of it) are left alone.
    """
    decl_start, kw = find_declaration(src)
    after_kw = decl_start + len(kw)
    if kw == "example":
        return src[:decl_start] + "theorem " + dummy + src[after_kw:]
    i = after_kw
    while i < len(src) and src[i] in " \t\n":
        i += 1
    name_start = i
    while i < len(src) and src[i] not in _NAME_END:
        i += 1
    if i == name_start:
        raise NoDeclarationFound(f"{kw} declaration has no name token")
    return src[:name_start] + dummy + src[i:]


def normalize_whitespace(src: str) -> str:
    """Collapse space/tab runs, trim each line, drop blank lines. Idempotent."""
    lines = (re.sub(r"[ \t]+", " ", line).strip() for line in src.split("\n"))
    return "\n".join(line for line in lines if line)


def strip_comments(src: str) -> str:
    """Remove line and (nested) block comments; string contents are preserved."""
    out: list[str] = []
    i = 0
    while i < len(src):
        if src.startswith("--", i):
            j = _skip_noncode(src, i)
            i = j
            continue
        if src.startswith("/-", i):
            j = _skip_noncode(src, i)
            out.append(" ")  # keep token separation
            i = j
            continue
        if src[i] == '"':
            j = _skip_noncode(src, i)
            out.append(src[i:j])
            i = j
            continue
        out.append(src[i])
        i += 1
    return "".join(out)


_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


def extract_code_block(raw: str) -> str:
    """First fenced code block of any language tag, else the text unchanged."""
    m = _FENCE_RE.search(raw)
    return m.group(1) if m else raw


def clean(raw: str, dummy: str) -> FormalStatement:
    """Full cleaning pipeline for one generator output.

    Fence extraction, comment stripping, proof trimming, dummy renaming and
    whitespace normalization, in that order. Any import/open prefix the model
    emitted is discarded — candidates use their pool's shared context.
    """
    text = strip_comments(extract_code_block(raw))
    decl_start, _ = find_declaration(text)
    text = text[decl_start:]
    text = strip_proof(text)
    text = rename_theorem(text, dummy)
    text = normalize_whitespace(text)
    return FormalStatement(name=dummy, context="", signature_src=text, origin=Origin.PREDICTION)


def _split_blocks(file_content: str) -> list[str]:
    """Best-effort split of a Lean file into top-level declaration blocks.

    A block starts at a column-0 line outside block comments; indented and
    blank lines continue the current block. Attribute/doc-comment blocks are
    merged into the declaration that follows them.
    """
    blocks: list[list[str]] = []
    comment_depth = 0
    for line in file_content.split("\n"):
        starts_new = comment_depth == 0 and line and line[0] not in " \t"
        if starts_new or not blocks:
            blocks.append([line])
        else:
            blocks[-1].append(line)
        # Track block-comment nesting across lines (line comments hide openers).
        code = line.split("--", 1)[0]
        comment_depth += code.count("/-") - code.count("-/")
        comment_depth = max(0, comment_depth)
    merged: list[str] = []
    pending: list[str] = []
    for block_lines in blocks:
        text = "\n".join(block_lines)
        first = text.lstrip()
        if first.startswith("@[") or first.startswith("/--") or first.startswith("/-!"):
            pending.append(text)
            continue
        merged.append("\n".join(pending + [text]) if pending else text)
        pending = []
    if pending:
        merged.append("\n".join(pending))
    return merged


def _block_keyword(block: str) -> str | None:
    """The declaration keyword a block opens with, skipping attributes and
    modifiers."""
    code = strip_comments(block).lstrip()
    while True:
        if code.startswith("@["):
            depth = 0
            for i, ch in enumerate(code):
                if ch == "[":
                    depth += 1
                elif ch == "]":
                    depth -= 1
                    if depth == 0:
                        code = code[i + 1 :].lstrip()
                        break
            else:
                return None  # unbalanced attribute; not a declaration block
            continue
        for mod in _MODIFIERS:
            if code.startswith(mod + " "):
                code = code[len(mod) + 1 :].lstrip()
                break
        else:
            break
    for kw in _DECL_KEYWORDS:
        if code.startswith(kw) and _token_at(code, 0, kw):
            return kw
    return None


def prepare_context(file_content: str, mode: ContextMode) -> str:
    """Rewrite a project-file prefix for use as a generation/checking context."""
    if mode is ContextMode.NONE:
        return ""
    if mode is ContextMode.FULL_FILE:
        return file_content
    out: list[str] = []
    for block in _split_blocks(file_content):
        kw = _block_keyword(block)
        if kw is None:
            out.append(block)
            continue
        if mode is ContextMode.NO_THEOREMS_PROOFS:
            continue
        # NO_PROOFS: keep the statement, swap the proof body for sorry.
        try:
            stripped = strip_proof(block)
        except NoDeclarationFound:
            logger.warning("context block not parseable, passed through: %r", block[:60])
            out.append(block)
            continue
        if stripped != block.rstrip():
            out.append(stripped + " := sorry")
        else:
            out.append(block)
    return "\n".join(out)
