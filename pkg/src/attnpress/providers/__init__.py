"""Attention providers and text generators, plus config-driven construction."""

from __future__ import annotations

from typing import Mapping

from ..errors import GeneratorError, ProviderError
from .base import (
    AttentionProvider,
    AttentionRequest,
    GenerationRequest,
    GenerationResult,
    KeywordRule,
    TextGenerator,
    TokenCounter,
    WhitespaceCounter,
    count_tokens,
    fetch_attention,
    generate,
    render_prompt,
)
from .remote import RemoteAttentionClient, RemoteGenerator
from .replay import RecordingSession, ReplaySession, write_fixture
from .scripted import (
    AbstractPrefixTitler,
    ExtractiveSummarizer,
    FixedResponder,
    ScriptedGenerator,
    TitleMatchSelector,
    UniformRandomSelector,
)
from .toy import ToyAttentionProvider

__all__ = [
    "AttentionProvider", "AttentionRequest", "GenerationRequest", "GenerationResult",
    "KeywordRule", "TextGenerator", "TokenCounter", "WhitespaceCounter",
    "count_tokens", "fetch_attention", "generate", "render_prompt",
    "RemoteAttentionClient", "RemoteGenerator",
    "RecordingSession", "ReplaySession", "write_fixture",
    "AbstractPrefixTitler", "ExtractiveSummarizer", "FixedResponder",
    "ScriptedGenerator", "TitleMatchSelector", "UniformRandomSelector",
    "ToyAttentionProvider",
    "build_provider", "build_generator",
]


def _rules_from_config(raw) -> tuple[KeywordRule, ...]:
    rules = []
    for item in raw or ():
        layers = item.get("layers")
        rules.append(KeywordRule(
            keyword=item["keyword"],
            weight=float(item["weight"]),
            layers=frozenset(layers) if layers is not None else None,
        ))
    return tuple(rules)


def build_provider(cfg: Mapping) -> AttentionProvider:
    """Construct an attention provider from a config mapping.

    ``{"kind": "toy", "rules": [...], "num_heads": 8, "seed": 0}`` or
    ``{"kind": "remote", "endpoint": "...", "auth_env": "..."}``.
    """
    kind = cfg.get("kind")
    if kind == "toy":
        return ToyAttentionProvider(
            rules=_rules_from_config(cfg.get("rules")),
            num_heads=int(cfg.get("num_heads", 8)),
            seed=int(cfg.get("seed", 0)),
        )
    if kind == "remote":
        return RemoteAttentionClient(
            cfg["endpoint"],
            auth_env=cfg.get("auth_env"),
            timeout=float(cfg.get("timeout", 60.0)),
        )
    raise ProviderError(f"unknown provider kind {kind!r}")


def build_generator(cfg: Mapping) -> TextGenerator:
    """Construct a generator from a config mapping; scripted kinds are
    deterministic doubles, "remote" talks to a chat-completions endpoint."""
    kind = cfg.get("kind")
    if kind == "extractive":
        return ExtractiveSummarizer(identify_k=int(cfg.get("identify_k", 2)))
    if kind == "title-match":
        return TitleMatchSelector()
    if kind == "uniform-random":
        return UniformRandomSelector(seed=int(cfg.get("seed", 0)))
    if kind == "fixed":
        return FixedResponder(text=cfg.get("text", ""))
    if kind == "abstract-prefix":
        return AbstractPrefixTitler(prefix_tokens=int(cfg.get("prefix_tokens", 3)))
    if kind == "remote":
        return RemoteGenerator(
            cfg["endpoint"],
            model=cfg.get("model", ""),
            auth_env=cfg.get("auth_env"),
            timeout=float(cfg.get("timeout", 120.0)),
        )
    raise GeneratorError(f"unknown generator kind {kind!r}")
