"""Candidate generation against a configurable HTTP text-generation endpoint.

This is the only module that touches the network, and only when invoked.
Auth tokens are read from an environment variable named in the config and are
never written to any output file.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from importlib import resources

import requests

from .core import Candidate, CandidatePool, ContextMode, DecodeMode, GenerationConfig
from .datasets import pool_to_dict, write_jsonl
from .normalize import prepare_context

logger = logging.getLogger(__name__)

QUERY_TEMPLATE = (
    "Natural language version:\n\n{informal}\n\n"
    "Translate the natural language version to a Lean 4 version:\n"
)


class GenerationError(Exception):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    model_id: str
    temperature: float = 0.7
    num_samples: int = 50
    auth_token_env: str | None = None  # name of the env var holding the token
    max_retries: int = 3
    backoff_base: float = 0.5
    request_timeout: float = 120.0


def twelve_shot_prompt() -> str:
    """The shipped few-shot prompt asset, verbatim."""
    return resources.files("beqharness").joinpath("assets/twelve_shot_prompt.txt").read_text(
        encoding="utf-8"
    )


def build_prompt(informal: str, context: str, context_mode: ContextMode) -> str:
    """Few-shot prompt for bare problems; prepared file context otherwise."""
    query = QUERY_TEMPLATE.format(informal=informal)
    if context_mode is ContextMode.NONE or not context:
        return twelve_shot_prompt() + "\n" + query
    return prepare_context(context, context_mode) + "\n\n" + query


def _headers(cfg: EndpointConfig) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if cfg.auth_token_env:
        token = os.environ.get(cfg.auth_token_env)
        if not token:
            raise GenerationError(
                f"auth token env var {cfg.auth_token_env!r} is named in the config but not set"
            )
        headers["Authorization"] = f"Bearer {token}"
    return headers


def _post_completions(cfg: EndpointConfig, prompt: str) -> list[str]:
    """POST one prompt; returns completion texts.

    Request: {"model", "prompt", "temperature", "n"}; response either
    {"choices": [{"text": ...}, ...]} or {"completions": [...]}.
    Retries with exponential backoff on 5xx and connection errors.
    """
    payload = {
        "model": cfg.model_id,
        "prompt": prompt,
        "temperature": cfg.temperature,
        "n": cfg.num_samples,
    }
    last_error = "no attempt made"
    for attempt in range(cfg.max_retries + 1):
        if attempt:
            time.sleep(cfg.backoff_base * 2 ** (attempt - 1))
        try:
            resp = requests.post(
                cfg.url, json=payload, headers=_headers(cfg), timeout=cfg.request_timeout
            )
        except requests.RequestException as exc:
            last_error = f"connection error: {exc}"
            logger.warning("generation request failed (attempt %d): %s", attempt + 1, last_error)
            continue
        if 400 <= resp.status_code < 500:
            raise GenerationError(f"endpoint rejected request: HTTP {resp.status_code}: {resp.text[:300]}")
        if resp.status_code >= 500:
            last_error = f"HTTP {resp.status_code}"
            logger.warning("generation request failed (attempt %d): %s", attempt + 1, last_error)
            continue
        try:
            body = resp.json()
        except json.JSONDecodeError as exc:
            raise GenerationError(f"endpoint returned non-JSON body: {exc}") from exc
        if isinstance(body, dict) and "choices" in body:
            return [c.get("text", "") for c in body["choices"]]
        if isinstance(body, dict) and "completions" in body:
            return [str(c) for c in body["completions"]]
        raise GenerationError(f"unrecognized response shape: {str(body)[:300]}")
    raise GenerationError(f"endpoint unreachable after {cfg.max_retries + 1} attempts ({last_error})")


def generate_candidates(problems: list[dict], cfg: EndpointConfig, out_path) -> tuple[int, int]:
    """Generate a pool per problem and write the pool file.

    Problems: dicts with problem_id, informal, optional context/context_mode.
    Returns (completed, failed). On endpoint failure the file still receives
    every pool completed so far (partial output, nonzero exit upstream).
    """
    if not cfg.url:
        raise GenerationError(
            "no endpoint configured: pass --endpoint or set `endpoint` in the config file"
        )
    pools: list[CandidatePool] = []
    failed = 0
    for problem in problems:
        mode = ContextMode(problem.get("context_mode", "none"))
        prompt = build_prompt(problem["informal"], problem.get("context", ""), mode)
        try:
            texts = _post_completions(cfg, prompt)
        except GenerationError as exc:
            logger.error("problem %s failed: %s", problem["problem_id"], exc)
            failed += 1
            continue
        if len(texts) < cfg.num_samples:
            logger.warning(
                "problem %s: endpoint returned %d of %d requested completions",
                problem["problem_id"],
                len(texts),
                cfg.num_samples,
            )
        n = len(texts)
        decode = (
            DecodeMode.GREEDY
            if cfg.temperature == 0 and n == 1
            else DecodeMode.TEMPERATURE_SAMPLING
        )
        pools.append(
            CandidatePool(
                problem_id=problem["problem_id"],
                informal=problem["informal"],
                context_mode=mode,
                candidates=tuple(Candidate(raw_text=t) for t in texts),
                gen_config=GenerationConfig(
                    temperature=cfg.temperature,
                    num_samples=max(n, 1),
                    model_id=cfg.model_id,
                    decode_mode=decode,
                ),
                context=problem.get("context", "") or "",
            )
        )
    write_jsonl(out_path, (pool_to_dict(p) for p in pools))
    return len(pools), failed
