"""User histories as typed sentences with exact character spans.

A user context is a single rendered document plus an ordered list of
sentences, each carrying a half-open character span into that document and
exactly one signal-type label (title, rating, abstract, ...). Sentences are
the unit everything downstream scores, selects, and marks, so span
bookkeeping here is exact: sentence text always equals the document
substring at its span, and consecutive sentences are separated by a single
space.

Two dataset shapes are ingested: a movie-selection shape (per-user basic
info plus rated interactions, evaluated by picking the truly interacted
movie out of five candidates) and a title-generation shape (per-user prior papers,
evaluated by generating a title for a query abstract).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from statistics import mean
from typing import Iterable, Mapping, Sequence

from .errors import ContextError, DatasetError

SENTENCE_SEPARATOR = " "

# Default field -> signal-label manifests. Datasets may override these with
# their own manifest file, so new field inventories need no code changes.
SELECTION_SIGNALS: Mapping[str, str] = {
    "basic_info": "basic_info",
    "title": "title",
    "year": "year",
    "genres": "genre",
    "summary": "summary",
    "rating": "rating",
    "rating_time": "rating_time",
}
GENERATION_SIGNALS: Mapping[str, str] = {
    "title": "title",
    "abstract": "abstract",
    "date": "date",
}

SELECTION_TASK = (
    "Based on the user's movie watching history, select the movie the user "
    "actually watched from the given candidates."
)
GENERATION_TASK = (
    "Based on the user's writing history, generate a personalized paper "
    "title for the given abstract."
)

_MARKER_LITERALS = ("<START_IMPORTANT>", "<END_IMPORTANT>")

# "rating time" must precede "rating" so the longer field wins.
_SELECTION_PREFIX = re.compile(
    r"User basic info:|Movie \d+ (?:title|year|genres|summary|rating time|rating):"
)
_GENERATION_PREFIX = re.compile(r"Paper \d+ (?:title|abstract|date):")

_SELECTION_FIELD_BY_SUFFIX = {
    "title": "title",
    "year": "year",
    "genres": "genres",
    "summary": "summary",
    "rating time": "rating_time",
    "rating": "rating",
}


@dataclass(frozen=True)
class Sentence:
    """One typed sentence of a user history.

    ``start``/``end`` are half-open offsets into the owning document;
    ``index`` is the ordinal position within the history.
    """

    index: int
    text: str
    start: int
    end: int
    signal_type: str

    @property
    def char_span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class UserContext:
    """A user's rendered history document plus its sentence structure."""

    user_id: str
    document: str
    sentences: tuple[Sentence, ...]
    task: str

    def __post_init__(self):
        if not self.sentences:
            raise ContextError(f"user {self.user_id}: no history sentences")
        for literal in _MARKER_LITERALS:
            if literal in self.document:
                raise ContextError(
                    f"user {self.user_id}: document contains marker literal {literal}"
                )
        prev_end = None
        for pos, sent in enumerate(self.sentences):
            if sent.index != pos:
                raise ContextError(
                    f"user {self.user_id}: sentence index {sent.index} at position {pos}"
                )
            if not (0 <= sent.start < sent.end <= len(self.document)):
                raise ContextError(
                    f"user {self.user_id}: sentence {pos} span {sent.char_span} "
                    f"outside document of length {len(self.document)}"
                )
            if prev_end is not None and sent.start < prev_end:
                raise ContextError(
                    f"user {self.user_id}: sentence {pos} overlaps its predecessor"
                )
            if self.document[sent.start:sent.end] != sent.text:
                raise ContextError(
                    f"user {self.user_id}: sentence {pos} text does not match its span"
                )
            gap = self.document[(prev_end or 0):sent.start]
            if gap.strip():
                raise ContextError(
                    f"user {self.user_id}: non-separator text before sentence {pos}"
                )
            prev_end = sent.end
        if self.document[prev_end:].strip():
            raise ContextError(
                f"user {self.user_id}: non-separator text after the last sentence"
            )

    def signal_labels(self) -> tuple[str, ...]:
        """Distinct signal labels present, in first-appearance order."""
        seen: dict[str, None] = {}
        for sent in self.sentences:
            seen.setdefault(sent.signal_type, None)
        return tuple(seen)


@dataclass(frozen=True)
class TaskInstance:
    """The downstream task attached to one user.

    ``kind`` is "selection" (pick the gold candidate) or "generation"
    (produce a title for ``query`` judged against ``gold``).
    """

    kind: str
    candidates: tuple[str, ...] = ()
    gold_index: int = -1
    query: str = ""
    gold: str = ""

    def __post_init__(self):
        if self.kind == "selection":
            if len(self.candidates) != 5:
                raise ContextError(
                    f"selection task needs exactly 5 candidates, got {len(self.candidates)}"
                )
            if not 0 <= self.gold_index < 5:
                raise ContextError(f"gold index {self.gold_index} out of bounds")
        elif self.kind == "generation":
            if not self.gold.strip():
                raise ContextError("generation task needs a non-empty gold reference")
        else:
            raise ContextError(f"unknown task kind {self.kind!r}")


@dataclass(frozen=True)
class TokenAssignment:
    """Token index -> sentence index map; ``None`` marks unassigned tokens."""

    sentence_for_token: tuple[int | None, ...]

    @property
    def num_tokens(self) -> int:
        return len(self.sentence_for_token)

    def token_counts(self) -> dict[int, int]:
        """Number of assigned tokens per sentence (sentences with zero omitted)."""
        counts: dict[int, int] = {}
        for sent_idx in self.sentence_for_token:
            if sent_idx is not None:
                counts[sent_idx] = counts.get(sent_idx, 0) + 1
        return counts


def compose_context(user_id: str, parts: Sequence[tuple[str, str]], task: str) -> UserContext:
    """Assemble a context from (text, signal_type) pairs, one sentence each.

    Sentences are laid out in order with single-space separators; spans are
    computed here so callers never touch offsets by hand.
    """
    sentences = []
    cursor = 0
    chunks = []
    for pos, (text, label) in enumerate(parts):
        if pos:
            chunks.append(SENTENCE_SEPARATOR)
            cursor += len(SENTENCE_SEPARATOR)
        sentences.append(Sentence(pos, text, cursor, cursor + len(text), label))
        chunks.append(text)
        cursor += len(text)
    return UserContext(user_id, "".join(chunks), tuple(sentences), task)


def _label(field_name: str, manifest: Mapping[str, str]) -> str:
    try:
        return manifest[field_name]
    except KeyError:
        raise DatasetError(f"field {field_name!r} missing from signal manifest") from None


def _render_basic_info(info: Mapping, interactions: Sequence[Mapping]) -> str:
    ratings = [float(it["rating"]) for it in interactions]
    return (
        f"User basic info: Gender is {info['gender']}, Age is {info['age']}, "
        f"Occupation is {info['occupation']}, Total Movies watched is {len(interactions)}, "
        f"Average Rating is {mean(ratings):.2f} out of 5.0."
    )


def _render_movie(pos: int, it: Mapping) -> list[tuple[str, str]]:
    genres = it["genres"]
    if not isinstance(genres, str):
        genres = ", ".join(genres)
    return [
        (f"Movie {pos} title: The movie title is {it['title']}.", "title"),
        (f"Movie {pos} year: Released in {it['year']}.", "year"),
        (f"Movie {pos} genres: Genres are {genres}.", "genres"),
        (f"Movie {pos} summary: {it['summary']}", "summary"),
        (f"Movie {pos} rating: User gave it {it['rating']} stars.", "rating"),
        (f"Movie {pos} rating time: Rated on {it['rating_time']}.", "rating_time"),
    ]


def _render_paper(pos: int, paper: Mapping) -> list[tuple[str, str]]:
    title = str(paper["title"]).strip()
    if not title.endswith((".", "!", "?")):
        title += "."
    return [
        (f"Paper {pos} title: {title}", "title"),
        (f"Paper {pos} abstract: {paper['abstract']}", "abstract"),
        (f"Paper {pos} date: Published in {paper['date']}.", "date"),
    ]


def _load_manifest(manifest, default: Mapping[str, str]) -> Mapping[str, str]:
    if manifest is None:
        return default
    if isinstance(manifest, Mapping):
        return manifest
    with open(manifest, encoding="utf-8") as fh:
        loaded = json.load(fh)
    if not isinstance(loaded, dict):
        raise DatasetError(f"signal manifest {manifest} is not an object")
    return loaded


def selection_context(record: Mapping, manifest=None) -> UserContext:
    """Render one selection-dataset record into a UserContext."""
    signals = _load_manifest(manifest, SELECTION_SIGNALS)
    interactions = record.get("interactions") or []
    if not interactions:
        raise DatasetError("no history sentences")
    parts = [(_render_basic_info(record["basic_info"], interactions),
              _label("basic_info", signals))]
    for pos, it in enumerate(interactions, start=1):
        parts.extend(
            (text, _label(fname, signals)) for text, fname in _render_movie(pos, it)
        )
    return compose_context(str(record["user_id"]), parts, SELECTION_TASK)


def generation_context(record: Mapping, manifest=None) -> UserContext:
    """Render one generation-dataset record into a UserContext."""
    signals = _load_manifest(manifest, GENERATION_SIGNALS)
    papers = record.get("papers") or []
    if not papers:
        raise DatasetError("no history sentences")
    parts = []
    for pos, paper in enumerate(papers, start=1):
        parts.extend(
            (text, _label(fname, signals)) for text, fname in _render_paper(pos, paper)
        )
    return compose_context(str(record["user_id"]), parts, GENERATION_TASK)


def _iter_records(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"invalid JSON: {exc}", line=lineno) from exc


def ingest_selection_dataset(path, manifest=None) -> list[tuple[UserContext, TaskInstance]]:
    """Load a line-delimited selection dataset.

    Each record becomes a context (one basic-info sentence plus six sentences
    per interaction, in template order) and a five-candidate task. Malformed
    records raise DatasetError with the offending line number.
    """
    out = []
    for lineno, record in _iter_records(path):
        try:
            ctx = selection_context(record, manifest)
            task = TaskInstance(
                kind="selection",
                candidates=tuple(record["candidates"]),
                gold_index=int(record["gold_index"]),
            )
        except (KeyError, TypeError, ValueError, ContextError) as exc:
            raise DatasetError(str(exc) or repr(exc), line=lineno) from exc
        except DatasetError as exc:
            if exc.line is None:
                raise DatasetError(str(exc), line=lineno) from exc
            raise
        out.append((ctx, task))
    return out


def ingest_generation_dataset(path, manifest=None) -> list[tuple[UserContext, TaskInstance]]:
    """Load a line-delimited generation dataset (prior papers + query abstract)."""
    out = []
    for lineno, record in _iter_records(path):
        try:
            ctx = generation_context(record, manifest)
            task = TaskInstance(
                kind="generation",
                query=str(record["query_abstract"]),
                gold=str(record["gold_title"]),
            )
        except (KeyError, TypeError, ValueError, ContextError) as exc:
            raise DatasetError(str(exc) or repr(exc), line=lineno) from exc
        except DatasetError as exc:
            if exc.line is None:
                raise DatasetError(str(exc), line=lineno) from exc
            raise
        out.append((ctx, task))
    return out


def _parse_prefixed(document: str, prefix_re: re.Pattern, field_of,
                    manifest: Mapping[str, str]) -> list[Sentence]:
    starts = [m.start() for m in prefix_re.finditer(document)]
    if not starts:
        raise DatasetError("no templated sentences found in document")
    if document[: starts[0]].strip():
        raise DatasetError("document has text before the first templated sentence")
    sentences = []
    for pos, start in enumerate(starts):
        end = starts[pos + 1] if pos + 1 < len(starts) else len(document)
        text = document[start:end]
        trimmed = text.rstrip()
        end = start + len(trimmed)
        match = prefix_re.match(document, start)
        label = _label(field_of(match.group(0)), manifest)
        sentences.append(Sentence(pos, trimmed, start, end, label))
    return sentences


def _selection_field(prefix: str) -> str:
    if prefix.startswith("User basic info"):
        return "basic_info"
    suffix = prefix.split(" ", 2)[2].rstrip(":")
    return _SELECTION_FIELD_BY_SUFFIX[suffix]


def _generation_field(prefix: str) -> str:
    return prefix.split(" ", 2)[2].rstrip(":")


def parse_selection_document(document: str, user_id: str = "parsed",
                             task: str = SELECTION_TASK, manifest=None) -> UserContext:
    """Re-parse a rendered selection document back into typed sentences.

    Inverse of the rendering in :func:`selection_context`: splits at the
    templated field prefixes, so free text inside summaries survives intact.
    """
    signals = _load_manifest(manifest, SELECTION_SIGNALS)
    sentences = _parse_prefixed(document, _SELECTION_PREFIX, _selection_field, signals)
    return UserContext(user_id, document, tuple(sentences), task)


def parse_generation_document(document: str, user_id: str = "parsed",
                              task: str = GENERATION_TASK, manifest=None) -> UserContext:
    """Re-parse a rendered generation document back into typed sentences."""
    signals = _load_manifest(manifest, GENERATION_SIGNALS)
    sentences = _parse_prefixed(document, _GENERATION_PREFIX, _generation_field, signals)
    return UserContext(user_id, document, tuple(sentences), task)


def split_free_text(text: str) -> list[tuple[int, int]]:
    """Fallback segmentation for untemplated text.

    Splits after terminal punctuation followed by whitespace; the final
    segment runs to the end of the text regardless of punctuation. Returned
    spans cover every non-whitespace character.
    """
    spans = []
    start = None
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if start is None:
            if not ch.isspace():
                start = i
        elif ch in ".!?" and (i + 1 == n or text[i + 1].isspace()):
            spans.append((start, i + 1))
            start = None
        i += 1
    if start is not None:
        end = n
        while text[end - 1].isspace():
            end -= 1
        spans.append((start, end))
    return spans


def filter_signals(ctx: UserContext, keep: Iterable[str]) -> UserContext:
    """Keep only sentences whose signal type is in ``keep``, re-rendered.

    The surviving sentences are re-spanned over a fresh document (same
    single-space layout) and re-numbered, preserving their order.
    """
    keep = set(keep)
    if not keep:
        raise ContextError("keep set is empty")
    parts = [(s.text, s.signal_type) for s in ctx.sentences if s.signal_type in keep]
    if not parts:
        raise ContextError(
            f"user {ctx.user_id}: empty filtered context (keep={sorted(keep)})"
        )
    return compose_context(ctx.user_id, parts, ctx.task)


def assign_tokens(token_offsets: Sequence[Sequence[int]], ctx: UserContext) -> TokenAssignment:
    """Map each token span to the sentence it overlaps most.

    Ties go to the earlier sentence; zero-overlap tokens (task and template
    tokens sit past the document's end) stay unassigned.
    """
    prev_start = -1
    spans = []
    for offs in token_offsets:
        start, end = int(offs[0]), int(offs[1])
        if start < 0 or end < start:
            raise ContextError(f"malformed token offset ({start}, {end})")
        if start < prev_start:
            raise ContextError("token offsets are not non-decreasing")
        prev_start = start
        spans.append((start, end))

    assigned: list[int | None] = []
    for start, end in spans:
        best_idx = None
        best_overlap = 0
        for sent in ctx.sentences:
            if sent.start >= end:
                break
            overlap = min(end, sent.end) - max(start, sent.start)
            if overlap > best_overlap:
                best_overlap = overlap
                best_idx = sent.index
        assigned.append(best_idx)
    return TokenAssignment(tuple(assigned))
