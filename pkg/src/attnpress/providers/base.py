"""Provider contracts: attention sources, text generators, token counters.

An attention provider answers "how much did the final prompt token attend
to every input token at layer d, per head". A generator turns a
(system, user) message pair into text under a token cap. Both have
deterministic in-process implementations for tests and remote clients for
real checkpoints; everything downstream sees only these interfaces.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol

from ..attention import AttentionSnapshot
from ..errors import GeneratorError, ProviderError

PROMPT_SEPARATOR = "\n\n"


def render_prompt(document: str, task: str) -> str:
    """The canonical (history, task) prompt every attention provider scores.

    Tokens of the task suffix start at offsets >= len(document), which is
    how they end up unassigned during sentence mapping.
    """
    return document + PROMPT_SEPARATOR + task


@dataclass(frozen=True)
class AttentionRequest:
    document: str
    task: str
    layer: int

    def __post_init__(self):
        if not self.document:
            raise ProviderError("document is empty")
        if self.layer < 0:
            raise ProviderError(f"layer must be non-negative, got {self.layer}")


@dataclass(frozen=True)
class GenerationRequest:
    """One generator call: optional system message, user message, budget."""

    user: str
    max_tokens: int
    system: str | None = None
    temperature: float = 0.0
    model: str = ""

    def __post_init__(self):
        if self.max_tokens < 1:
            raise GeneratorError(f"max_tokens must be >= 1, got {self.max_tokens}")


@dataclass(frozen=True)
class GenerationResult:
    text: str
    prompt_tokens: int
    completion_tokens: int
    finish_reason: str = "stop"


@dataclass(frozen=True)
class KeywordRule:
    """Boost rule for the toy provider: sentences containing ``keyword`` gain
    ``weight`` on the attention logits, optionally only at certain layers."""

    keyword: str
    weight: float
    layers: frozenset[int] | None = None

    def __post_init__(self):
        if self.weight < 0:
            raise ProviderError(f"rule weight must be non-negative, got {self.weight}")
        if self.layers is not None:
            object.__setattr__(self, "layers", frozenset(self.layers))

    def applies_to(self, layer: int) -> bool:
        return self.layers is None or layer in self.layers


class AttentionProvider(Protocol):
    def fetch(self, req: AttentionRequest) -> AttentionSnapshot: ...


class TextGenerator(Protocol):
    def generate(self, req: GenerationRequest) -> GenerationResult: ...


def fetch_attention(provider: AttentionProvider, req: AttentionRequest) -> AttentionSnapshot:
    """Ask ``provider`` for a snapshot; construction re-validates invariants."""
    return provider.fetch(req)


def generate(generator: TextGenerator, req: GenerationRequest) -> GenerationResult:
    return generator.generate(req)


_TOKEN_RE = re.compile(r"\S+")


class WhitespaceCounter:
    """Token counter treating maximal non-whitespace runs as tokens.

    ``head``/``tail`` slice the original string at token boundaries, so
    internal spacing of the kept portion is preserved exactly.
    """

    def count(self, text: str) -> int:
        return len(_TOKEN_RE.findall(text))

    def head(self, text: str, m: int) -> str:
        if m <= 0:
            return ""
        spans = list(_TOKEN_RE.finditer(text))
        if len(spans) <= m:
            return text
        return text[spans[0].start():spans[m - 1].end()]

    def tail(self, text: str, m: int) -> str:
        if m <= 0:
            return ""
        spans = list(_TOKEN_RE.finditer(text))
        if len(spans) <= m:
            return text
        return text[spans[-m].start():spans[-1].end()]


class TokenCounter(Protocol):
    def count(self, text: str) -> int: ...
    def head(self, text: str, m: int) -> str: ...
    def tail(self, text: str, m: int) -> str: ...


def count_tokens(counter: TokenCounter, text: str) -> int:
    return counter.count(text)
