"""Aggregation of last-token attention: heads -> tokens -> sentences -> signal types.

The raw material is one attention snapshot: the final prompt token's
attention row at a chosen layer, one vector per head. Aggregation proceeds
in three plain averages — elementwise over heads, then over each sentence's
assigned tokens, then over each signal type's sentences. No renormalization
happens anywhere: sentence scores are means of raw softmax weights, so mass
over unassigned (task/template) tokens is simply excluded, not
redistributed.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .context import TokenAssignment, UserContext
from .errors import SnapshotError

ROW_SUM_TOLERANCE = 1e-4


@dataclass(frozen=True, eq=False)
class AttentionSnapshot:
    """Per-head last-token attention over N prompt tokens at one layer.

    ``heads`` is a (J, N) float array; every row is a softmax distribution.
    ``token_offsets`` gives each token's half-open character span in the
    prompt; tokens past the end of the context document belong to the task
    suffix. ``task_token_count``, when reported by a provider, is the number
    of such suffix tokens.
    """

    layer: int
    heads: np.ndarray
    token_offsets: tuple[tuple[int, int], ...]
    task_token_count: int | None = None

    def __post_init__(self):
        if self.layer < 0:
            raise SnapshotError(f"layer must be non-negative, got {self.layer}")
        heads = np.asarray(self.heads, dtype=float)
        if heads.ndim != 2:
            raise SnapshotError(
                f"heads must be a rectangular J x N array, got shape {heads.shape}"
            )
        if heads.shape[0] < 1 or heads.shape[1] < 1:
            raise SnapshotError(f"empty snapshot (shape {heads.shape})")
        if not np.isfinite(heads).all():
            raise SnapshotError("non-finite attention value")
        if (heads < 0).any():
            raise SnapshotError("negative attention value")
        sums = heads.sum(axis=1)
        bad = np.abs(sums - 1.0) > ROW_SUM_TOLERANCE
        if bad.any():
            j = int(np.argmax(bad))
            raise SnapshotError(
                f"head {j} is not softmax-normalized (sum {sums[j]:.6f})"
            )
        offsets = tuple((int(s), int(e)) for s, e in self.token_offsets)
        if len(offsets) != heads.shape[1]:
            raise SnapshotError(
                f"{len(offsets)} token offsets for {heads.shape[1]} tokens"
            )
        heads.flags.writeable = False
        object.__setattr__(self, "heads", heads)
        object.__setattr__(self, "token_offsets", offsets)

    @property
    def num_heads(self) -> int:
        return self.heads.shape[0]

    @property
    def num_tokens(self) -> int:
        return self.heads.shape[1]


@dataclass(frozen=True, eq=False)
class TokenScores:
    """Head-averaged attention per token."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise SnapshotError(f"token scores must be a vector, got shape {values.shape}")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SentenceScores:
    """Mean token score per sentence, for sentences with at least one token.

    ``token_counts`` records how many tokens back each score; sentences with
    no assigned token are absent from both maps (reported by their absence,
    never scored).
    """

    scores: Mapping[int, float]
    token_counts: Mapping[int, int]

    def __post_init__(self):
        object.__setattr__(self, "scores", MappingProxyType(dict(self.scores)))
        object.__setattr__(self, "token_counts", MappingProxyType(dict(self.token_counts)))

    def max_score(self) -> float:
        return max(self.scores.values())


@dataclass(frozen=True)
class SignalScores:
    """Mean sentence score per signal label, with member sentence counts."""

    scores: Mapping[str, float]
    sentence_counts: Mapping[str, int]

    def __post_init__(self):
        object.__setattr__(self, "scores", MappingProxyType(dict(self.scores)))
        object.__setattr__(
            self, "sentence_counts", MappingProxyType(dict(self.sentence_counts))
        )


def average_heads(snapshot: AttentionSnapshot) -> TokenScores:
    """Elementwise mean of the head vectors: values[m] = (1/J) sum_j heads[j][m]."""
    return TokenScores(snapshot.heads.mean(axis=0))


def sentence_scores(tokens: TokenScores, assignment: TokenAssignment) -> SentenceScores:
    """Average the token scores over each sentence's assigned tokens."""
    if assignment.num_tokens != len(tokens):
        raise SnapshotError(
            f"assignment covers {assignment.num_tokens} tokens, scores cover {len(tokens)}"
        )
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for token_idx, sent_idx in enumerate(assignment.sentence_for_token):
        if sent_idx is None:
            continue
        sums[sent_idx] = sums.get(sent_idx, 0.0) + float(tokens.values[token_idx])
        counts[sent_idx] = counts.get(sent_idx, 0) + 1
    scores = {i: sums[i] / counts[i] for i in sorted(sums)}
    return SentenceScores(scores, {i: counts[i] for i in sorted(counts)})


def signal_scores(sent: SentenceScores, ctx: UserContext) -> SignalScores:
    """Average sentence scores within each signal type present in ``ctx``."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for idx, score in sent.scores.items():
        label = ctx.sentences[idx].signal_type
        sums[label] = sums.get(label, 0.0) + score
        counts[label] = counts.get(label, 0) + 1
    ordered = [s.signal_type for s in ctx.sentences]
    seen: dict[str, None] = {}
    for label in ordered:
        if label in sums:
            seen.setdefault(label, None)
    return SignalScores(
        {label: sums[label] / counts[label] for label in seen},
        {label: counts[label] for label in seen},
    )
