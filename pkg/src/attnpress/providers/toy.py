"""Deterministic keyword-driven attention provider for offline runs.

Stands in for a real marking model: whitespace tokens of the rendered
(history, task) prompt get logit 1 plus the weights of every rule whose
keyword occurs in the surrounding sentence-like segment, then each head is
a softmax of those logits with a tiny seeded per-head jitter. Planting a
rule on a sentence therefore guarantees its tokens dominate head-averaged
scores, which is what the end-to-end tests rely on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from ..attention import AttentionSnapshot
from ..context import split_free_text
from .base import AttentionRequest, KeywordRule, render_prompt

_TOKEN_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class ToyAttentionProvider:
    rules: tuple[KeywordRule, ...] = ()
    num_heads: int = 8
    seed: int = 0
    jitter: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))

    def fetch(self, req: AttentionRequest) -> AttentionSnapshot:
        prompt = render_prompt(req.document, req.task)
        token_spans = [(m.start(), m.end()) for m in _TOKEN_RE.finditer(prompt)]
        segments = split_free_text(prompt)

        seg_weight = []
        for seg_start, seg_end in segments:
            seg_text = prompt[seg_start:seg_end]
            weight = 1.0
            for rule in self.rules:
                if rule.applies_to(req.layer) and rule.keyword in seg_text:
                    weight += rule.weight
            seg_weight.append((seg_start, seg_end, weight))

        logits = np.ones(len(token_spans))
        for idx, (tok_start, tok_end) in enumerate(token_spans):
            for seg_start, seg_end, weight in seg_weight:
                if tok_start >= seg_start and tok_end <= seg_end:
                    logits[idx] = weight
                    break

        heads = np.empty((self.num_heads, len(token_spans)))
        for j in range(self.num_heads):
            rng = np.random.default_rng([self.seed, req.layer, j])
            jittered = logits + rng.uniform(0.0, self.jitter, len(token_spans))
            shifted = np.exp(jittered - jittered.max())
            heads[j] = shifted / shifted.sum()

        doc_len = len(req.document)
        task_tokens = sum(1 for start, _ in token_spans if start >= doc_len)
        return AttentionSnapshot(
            layer=req.layer,
            heads=heads,
            token_offsets=tuple(token_spans),
            task_token_count=task_tokens,
        )
