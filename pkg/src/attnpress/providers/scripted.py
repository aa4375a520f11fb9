"""Scripted generators: deterministic stand-ins for chat-completion models.

Each one implements a fixed textual behavior (extract marked spans, match a
candidate title, answer uniformly at random, ...) so pipeline and harness
tests run offline with predictable outputs. All of them respect the token
budget via the shared counter and keep a call log for call-count
assertions.
"""

from __future__ import annotations

import random
import re

from ..context import split_free_text
from ..marking import marked_spans, strip_markers
from .base import GenerationRequest, GenerationResult, WhitespaceCounter

# Phrase from the identification prompt; its presence tells the extractive
# double to answer with sentences rather than a summary.
_IDENTIFY_CUE = "identify and extract the most important sentences"

_CANDIDATE_LINE = re.compile(r"^\s*([1-5])\.\s+(.*\S)\s*$", re.MULTILINE)


class ScriptedGenerator:
    """Base: truncation to max_tokens, usage accounting, call logging."""

    def __init__(self, counter=None):
        self.counter = counter or WhitespaceCounter()
        self.calls: list[GenerationRequest] = []

    def generate(self, req: GenerationRequest) -> GenerationResult:
        self.calls.append(req)
        text = self._respond(req)
        truncated = self.counter.head(text, req.max_tokens)
        prompt_tokens = self.counter.count(req.system or "") + self.counter.count(req.user)
        return GenerationResult(
            text=truncated,
            prompt_tokens=prompt_tokens,
            completion_tokens=self.counter.count(truncated),
            finish_reason="stop" if truncated == text else "length",
        )

    def _respond(self, req: GenerationRequest) -> str:
        raise NotImplementedError

    @property
    def call_count(self) -> int:
        return len(self.calls)


class ExtractiveSummarizer(ScriptedGenerator):
    """Summarizes by extraction.

    Marked input -> the marked spans concatenated in order. Identification
    prompt -> the first ``identify_k`` sentences of the embedded context,
    one per line. Anything else -> the user message itself (a head-truncated
    "summary").
    """

    def __init__(self, counter=None, identify_k: int = 2):
        super().__init__(counter)
        self.identify_k = identify_k

    def _respond(self, req: GenerationRequest) -> str:
        full = (req.system or "") + "\n" + req.user
        if _IDENTIFY_CUE in full:
            return self._identify(full)
        spans = marked_spans(req.user)
        if spans:
            return " ".join(spans)
        return strip_markers(req.user)

    def _identify(self, prompt: str) -> str:
        start = prompt.find("Context: ")
        end = prompt.find("\n\nTask Description:")
        if start < 0 or end < 0 or end <= start:
            return ""
        context = prompt[start + len("Context: "):end]
        segments = [context[s:e] for s, e in split_free_text(context)]
        return "\n".join(segments[: self.identify_k])


class TitleMatchSelector(ScriptedGenerator):
    """Answers the candidate number whose title occurs in the profile text."""

    def _respond(self, req: GenerationRequest) -> str:
        prompt = req.user
        profile_start = prompt.find("Profile: ")
        profile_end = prompt.find("\n\nCandidates:")
        if profile_start < 0 or profile_end < 0:
            return "I cannot tell."
        profile = prompt[profile_start + len("Profile: "):profile_end]
        for number, title in _CANDIDATE_LINE.findall(prompt[profile_end:]):
            if title in profile:
                return number
        return "I cannot tell."


class UniformRandomSelector(ScriptedGenerator):
    """Answers 1–5 uniformly at random; one seeded stream across calls."""

    def __init__(self, seed: int, counter=None):
        super().__init__(counter)
        self._rng = random.Random(seed)

    def _respond(self, req: GenerationRequest) -> str:
        return str(self._rng.randint(1, 5))


class FixedResponder(ScriptedGenerator):
    """Always returns the same text (still subject to the token budget)."""

    def __init__(self, text: str, counter=None):
        super().__init__(counter)
        self.text = text

    def _respond(self, req: GenerationRequest) -> str:
        return self.text


class AbstractPrefixTitler(ScriptedGenerator):
    """Titles a paper with the first ``prefix_tokens`` words of its abstract."""

    def __init__(self, prefix_tokens: int = 3, counter=None):
        super().__init__(counter)
        self.prefix_tokens = prefix_tokens

    def _respond(self, req: GenerationRequest) -> str:
        prompt = req.user
        start = prompt.find("Abstract: ")
        if start < 0:
            return ""
        abstract = prompt[start + len("Abstract: "):]
        cut = abstract.find("\n\n")
        if cut >= 0:
            abstract = abstract[:cut]
        return self.counter.head(abstract, self.prefix_tokens)
