"""Threshold selection of important sentences and marker insertion.

A sentence is selected when its score reaches ``alpha`` times the maximum
sentence score; selected sentences are wrapped, individually, in
``<START_IMPORTANT>`` / ``<END_IMPORTANT>`` tags. Stripping the tags
recovers the source document byte-for-byte, which is why documents
containing the tag literals are rejected at ingestion.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass

from .attention import SentenceScores
from .context import UserContext
from .errors import MarkingError

START_MARKER = "<START_IMPORTANT>"
END_MARKER = "<END_IMPORTANT>"
MARKER_OVERHEAD = len(START_MARKER) + len(END_MARKER)  # 32 chars per wrapped sentence

_MARKER_RE = re.compile(re.escape(START_MARKER) + "|" + re.escape(END_MARKER))


@dataclass(frozen=True)
class MarkSelection:
    """A set of sentence indices chosen for marking.

    ``alpha``/``max_score`` document how a threshold selection was made;
    both are None for selections that did not come from scores (the random
    baseline, mark-all).
    """

    selected: frozenset[int]
    alpha: float | None = None
    max_score: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "selected", frozenset(self.selected))
        if not self.selected:
            raise MarkingError("empty selection")
        if any(i < 0 for i in self.selected):
            raise MarkingError("negative sentence index in selection")

    def indices(self) -> tuple[int, ...]:
        return tuple(sorted(self.selected))


@dataclass(frozen=True)
class MarkedContext:
    """The marked history text plus where each wrapped region sits.

    ``marker_spans`` holds half-open spans in ``text`` covering whole
    ``<START_IMPORTANT>...<END_IMPORTANT>`` regions, in document order.
    """

    text: str
    marker_spans: tuple[tuple[int, int], ...]
    source: UserContext


def select_important(sent: SentenceScores, alpha: float) -> MarkSelection:
    """Keep every sentence scoring at least ``alpha`` times the max score.

    With alpha = 1.0 this is exactly the argmax tie set; the argmax is a
    member for every alpha. Only scored sentences (those with assigned
    tokens) are eligible.
    """
    if not 0.0 < alpha <= 1.0:
        raise MarkingError(f"alpha must be in (0, 1], got {alpha}")
    if not sent.scores:
        raise MarkingError("no scored sentences")
    cutoff = alpha * sent.max_score()
    selected = frozenset(i for i, score in sent.scores.items() if score >= cutoff)
    return MarkSelection(selected, alpha=alpha, max_score=sent.max_score())


def mark_context(sel: MarkSelection, ctx: UserContext) -> MarkedContext:
    """Wrap each selected sentence in markers, leaving everything else intact."""
    n = len(ctx.sentences)
    for idx in sel.selected:
        if idx >= n:
            raise MarkingError(f"sentence index {idx} out of range (context has {n})")
    pieces = []
    spans = []
    cursor = 0      # position in ctx.document
    out_len = 0     # position in the marked text
    for sent in ctx.sentences:
        if sent.index not in sel.selected:
            continue
        gap = ctx.document[cursor:sent.start]
        pieces.append(gap)
        out_len += len(gap)
        wrapped = START_MARKER + sent.text + END_MARKER
        pieces.append(wrapped)
        spans.append((out_len, out_len + len(wrapped)))
        out_len += len(wrapped)
        cursor = sent.end
    pieces.append(ctx.document[cursor:])
    return MarkedContext("".join(pieces), tuple(spans), ctx)


def strip_markers(marked) -> str:
    """Remove all marker literals; everything else stays byte-identical.

    Accepts a MarkedContext or a raw string. Markers must alternate
    open/close with no nesting, otherwise the text is malformed.
    """
    text = marked.text if isinstance(marked, MarkedContext) else marked
    depth = 0
    for m in _MARKER_RE.finditer(text):
        if m.group(0) == START_MARKER:
            depth += 1
            if depth > 1:
                raise MarkingError(f"nested marker at offset {m.start()}")
        else:
            depth -= 1
            if depth < 0:
                raise MarkingError(f"unmatched {END_MARKER} at offset {m.start()}")
    if depth != 0:
        raise MarkingError(f"{depth} unclosed {START_MARKER} marker(s)")
    return _MARKER_RE.sub("", text)


def marked_spans(text: str) -> list[str]:
    """The texts between marker pairs, in order of appearance."""
    out = []
    pos = 0
    while True:
        open_at = text.find(START_MARKER, pos)
        if open_at < 0:
            return out
        close_at = text.find(END_MARKER, open_at)
        if close_at < 0:
            raise MarkingError(f"unclosed {START_MARKER} at offset {open_at}")
        out.append(text[open_at + len(START_MARKER):close_at])
        pos = close_at + len(END_MARKER)


def random_selection(ctx: UserContext, k: int, seed: int) -> MarkSelection:
    """Uniform sample of ``k`` distinct sentences; same seed, same sample."""
    n = len(ctx.sentences)
    if not 1 <= k <= n:
        raise MarkingError(f"k must be in [1, {n}], got {k}")
    rng = random.Random(seed)
    return MarkSelection(frozenset(rng.sample(range(n), k)))
