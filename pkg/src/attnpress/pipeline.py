"""Compression methods and the offline profile cache.

One entry point, :func:`compress`, runs any of the eight methods:

* ``attn-gs`` — attention scores select sentences, markers wrap them, the
  generator summarizes the marked history under the token limit.
* ``truncate`` — keep the most recent (trailing) tokens; no generator.
* ``direct`` / ``cot`` / ``self-reflect`` — unmarked summarization with the
  corresponding prompt (self-reflect makes exactly two generator calls).
* ``random-mark`` / ``mark-all`` — alternative selections, same marked-
  context summarization prompt as attn-gs. random-mark matches attn-gs's
  selection size per user, so the comparison is cardinality-controlled.
* ``prompt-gs`` — the generator itself names important sentences; exact
  matches (after whitespace collapse) get marked, then summarized.

Profiles land in a write-once cache keyed by (user, method, config
fingerprint), one JSONL file per fingerprint, so batch runs are resumable
and downstream evaluation never recomputes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from .context import UserContext, assign_tokens
from .attention import average_heads, sentence_scores
from .errors import (
    ContextError,
    GeneratorError,
    MarkingError,
    PipelineError,
    ProviderError,
    SnapshotError,
    TemplateError,
)
from .marking import (
    END_MARKER,
    START_MARKER,
    MarkSelection,
    mark_context,
    random_selection,
    select_important,
)
from .providers import (
    AttentionRequest,
    GenerationRequest,
    WhitespaceCounter,
    fetch_attention,
    generate,
)
from .templates import render_template

logger = logging.getLogger(__name__)

METHODS = (
    "attn-gs", "truncate", "direct", "cot",
    "self-reflect", "random-mark", "mark-all", "prompt-gs",
)

# Budget for the prompt-gs identification call; the identified sentences are
# intermediate, only the final summary is bound by max_tokens.
IDENTIFY_BUDGET = 512

_PIPELINE_FAILURES = (
    ProviderError, GeneratorError, MarkingError,
    SnapshotError, ContextError, TemplateError,
)


@dataclass(frozen=True)
class CompressionConfig:
    method: str
    max_tokens: int
    dataset_kind: str = "selection"
    alpha: float = 0.2
    layer: int | None = None
    seed: int = 0
    temperature: float = 0.0
    template_id: str | None = None
    provider: object = None
    generator: object = None
    counter: object = field(default_factory=WhitespaceCounter)
    models: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise PipelineError(f"unknown method {self.method!r}")
        if self.max_tokens < 1:
            raise PipelineError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if not 0.0 < self.alpha <= 1.0:
            raise PipelineError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.dataset_kind not in ("selection", "generation"):
            raise PipelineError(f"unknown dataset kind {self.dataset_kind!r}")
        if self.method in ("attn-gs", "random-mark") and self.layer is None:
            raise PipelineError(f"{self.method} requires a layer")

    def summary_template_id(self) -> str | None:
        """The method's principal prompt-template id (None for truncate)."""
        if self.template_id is not None:
            return self.template_id
        kind = self.dataset_kind
        return {
            "attn-gs": f"{kind}/attn_gs_summary",
            "random-mark": f"{kind}/attn_gs_summary",
            "mark-all": f"{kind}/attn_gs_summary",
            "prompt-gs": f"{kind}/attn_gs_summary",
            "direct": f"{kind}/direct_summary",
            "cot": f"{kind}/cot_summary",
            "self-reflect": f"{kind}/reflect_initial",
            "truncate": None,
        }[self.method]

    def identity(self) -> dict:
        """Config snapshot stored in every profile and hashed into cache keys."""
        return {
            "method": self.method,
            "alpha": self.alpha,
            "layer": self.layer,
            "max_tokens": self.max_tokens,
            "seed": self.seed,
            "temperature": self.temperature,
            "dataset_kind": self.dataset_kind,
            "template_id": self.summary_template_id(),
            "models": dict(sorted(dict(self.models).items())),
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.identity(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class CompressedProfile:
    user_id: str
    text: str
    token_count: int
    method: str
    config: Mapping
    audit: tuple[int, ...] | None = None
    flags: tuple[str, ...] = ()
    created_at: str = ""

    def to_record(self) -> dict:
        return {
            "user_id": self.user_id,
            "method": self.method,
            "config": dict(self.config),
            "text": self.text,
            "token_count": self.token_count,
            "audit": list(self.audit) if self.audit is not None else None,
            "flags": list(self.flags),
            "created_at": self.created_at,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "CompressedProfile":
        audit = record.get("audit")
        return cls(
            user_id=record["user_id"],
            text=record["text"],
            token_count=int(record["token_count"]),
            method=record["method"],
            config=dict(record.get("config") or {}),
            audit=tuple(audit) if audit is not None else None,
            flags=tuple(record.get("flags") or ()),
            created_at=record.get("created_at", ""),
        )


def _timestamp() -> str:
    """Reproducible when SOURCE_DATE_EPOCH is set, wall clock otherwise."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        moment = datetime.now(tz=timezone.utc)
    return moment.isoformat(timespec="seconds")


def enforce_token_limit(text: str, m: int, counter) -> tuple[str, bool]:
    """Hard-truncate at the m-th token boundary; returns (text, overflowed)."""
    if m < 1:
        raise PipelineError(f"token limit must be >= 1, got {m}")
    if counter.count(text) <= m:
        return text, False
    return counter.head(text, m), True


def _user_seed(seed: int, user_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{user_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def attention_selection(ctx: UserContext, cfg: CompressionConfig) -> MarkSelection:
    """The attention path: fetch -> head average -> sentence means -> threshold."""
    snap = fetch_attention(cfg.provider, AttentionRequest(ctx.document, ctx.task, cfg.layer))
    tokens = average_heads(snap)
    assignment = assign_tokens(snap.token_offsets, ctx)
    return select_important(sentence_scores(tokens, assignment), cfg.alpha)


def _summarize(cfg: CompressionConfig, system: str, user: str) -> str:
    result = generate(cfg.generator, GenerationRequest(
        user=user,
        max_tokens=cfg.max_tokens,
        system=system,
        temperature=cfg.temperature,
    ))
    return result.text


def _marked_summary(ctx: UserContext, cfg: CompressionConfig, sel: MarkSelection) -> str:
    marked = mark_context(sel, ctx)
    system = render_template(cfg.summary_template_id(), max_tokens=cfg.max_tokens)
    return _summarize(cfg, system, marked.text)


def _compress_attn_gs(ctx, cfg):
    sel = attention_selection(ctx, cfg)
    return _finish(ctx, cfg, _marked_summary(ctx, cfg, sel), audit=sel.indices())


def _compress_truncate(ctx, cfg):
    return _finish(ctx, cfg, cfg.counter.tail(ctx.document, cfg.max_tokens))


def _compress_single_prompt(ctx, cfg):
    system = render_template(cfg.summary_template_id(), max_tokens=cfg.max_tokens)
    return _finish(ctx, cfg, _summarize(cfg, system, ctx.document))


def _compress_self_reflect(ctx, cfg):
    kind = cfg.dataset_kind
    initial_system = render_template(f"{kind}/reflect_initial", max_tokens=cfg.max_tokens)
    initial = _summarize(cfg, initial_system, ctx.document)
    refine_system = render_template(
        f"{kind}/reflect_refine", initial_summary=initial, max_tokens=cfg.max_tokens,
    )
    return _finish(ctx, cfg, _summarize(cfg, refine_system, ctx.document))


def _compress_random_mark(ctx, cfg):
    k = len(attention_selection(ctx, cfg).selected)
    sel = random_selection(ctx, k, seed=_user_seed(cfg.seed, ctx.user_id))
    return _finish(ctx, cfg, _marked_summary(ctx, cfg, sel), audit=sel.indices())


def _compress_mark_all(ctx, cfg):
    sel = MarkSelection(frozenset(range(len(ctx.sentences))))
    return _finish(ctx, cfg, _marked_summary(ctx, cfg, sel), audit=sel.indices())


def _compress_prompt_gs(ctx, cfg):
    prompt = render_template(
        "shared/prompt_gs_identify", context=ctx.document, task_description=ctx.task,
    )
    result = generate(cfg.generator, GenerationRequest(
        user=prompt, max_tokens=IDENTIFY_BUDGET, temperature=cfg.temperature,
    ))
    by_normalized = {}
    for sent in ctx.sentences:
        by_normalized.setdefault(" ".join(sent.text.split()), sent.index)
    matched = set()
    for line in result.text.splitlines():
        normalized = " ".join(line.split())
        if not normalized:
            continue
        if normalized in by_normalized:
            matched.add(by_normalized[normalized])
        else:
            logger.warning("prompt-gs: dropping unmatched line for user %s: %.60s",
                           ctx.user_id, normalized)
    if not matched:
        logger.warning("prompt-gs: no matchable sentences for user %s; "
                       "falling back to direct summary", ctx.user_id)
        direct_system = render_template(
            f"{cfg.dataset_kind}/direct_summary", max_tokens=cfg.max_tokens,
        )
        text = _summarize(cfg, direct_system, ctx.document)
        return _finish(ctx, cfg, text, flags=("prompt-gs-fallback",))
    sel = MarkSelection(frozenset(matched))
    return _finish(ctx, cfg, _marked_summary(ctx, cfg, sel), audit=sel.indices())


_DISPATCH = {
    "attn-gs": _compress_attn_gs,
    "truncate": _compress_truncate,
    "direct": _compress_single_prompt,
    "cot": _compress_single_prompt,
    "self-reflect": _compress_self_reflect,
    "random-mark": _compress_random_mark,
    "mark-all": _compress_mark_all,
    "prompt-gs": _compress_prompt_gs,
}


def _finish(ctx, cfg, text, audit=None, flags=()) -> CompressedProfile:
    # Marker literals never leak into a profile, whatever the generator did.
    cleaned = text.replace(START_MARKER, "").replace(END_MARKER, "")
    final, overflow = enforce_token_limit(cleaned, cfg.max_tokens, cfg.counter)
    all_flags = tuple(flags) + (("overflow",) if overflow else ())
    return CompressedProfile(
        user_id=ctx.user_id,
        text=final,
        token_count=cfg.counter.count(final),
        method=cfg.method,
        config=cfg.identity(),
        audit=tuple(audit) if audit is not None else None,
        flags=all_flags,
        created_at=_timestamp(),
    )


def compress(ctx: UserContext, cfg: CompressionConfig) -> CompressedProfile:
    """Produce one user's compressed profile with the configured method."""
    if cfg.method in ("attn-gs", "random-mark") and cfg.provider is None:
        raise PipelineError(f"{cfg.method} requires an attention provider",
                            user_id=ctx.user_id)
    if cfg.method != "truncate" and cfg.generator is None:
        raise PipelineError(f"{cfg.method} requires a generator", user_id=ctx.user_id)
    try:
        return _DISPATCH[cfg.method](ctx, cfg)
    except _PIPELINE_FAILURES as exc:
        raise PipelineError(str(exc), user_id=ctx.user_id) from exc


class ProfileCache:
    """Write-once JSONL cache of profiles under ``root/<dataset>/<hash>.jsonl``.

    First write per (user, method) wins; corrupt lines are quarantined to a
    sibling ``.quarantine`` file and logged rather than aborting the load.
    Safe for concurrent puts from pipeline workers.
    """

    def __init__(self, root):
        self.root = Path(root)
        self._lock = threading.Lock()
        self._indexes: dict[Path, dict[tuple[str, str], CompressedProfile]] = {}

    def _file(self, dataset: str, fingerprint: str) -> Path:
        return self.root / dataset / f"{fingerprint}.jsonl"

    def _index(self, path: Path) -> dict[tuple[str, str], CompressedProfile]:
        if path in self._indexes:
            return self._indexes[path]
        index: dict[tuple[str, str], CompressedProfile] = {}
        if path.exists():
            quarantined = []
            with open(path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        profile = CompressedProfile.from_record(json.loads(line))
                    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                        logger.warning("quarantining corrupt cache record %s:%d",
                                       path, lineno)
                        quarantined.append(line)
                        continue
                    index.setdefault((profile.user_id, profile.method), profile)
            if quarantined:
                with open(path.with_suffix(".quarantine"), "a", encoding="utf-8") as fh:
                    fh.writelines(quarantined)
        self._indexes[path] = index
        return index

    def get(self, dataset: str, fingerprint: str, user_id: str,
            method: str) -> CompressedProfile | None:
        with self._lock:
            return self._index(self._file(dataset, fingerprint)).get((user_id, method))

    def put(self, dataset: str, fingerprint: str,
            profile: CompressedProfile) -> CompressedProfile:
        """Store a profile; if the key already exists, the stored one wins."""
        path = self._file(dataset, fingerprint)
        key = (profile.user_id, profile.method)
        with self._lock:
            index = self._index(path)
            existing = index.get(key)
            if existing is not None:
                return existing
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(profile.to_record(), sort_keys=True) + "\n")
            index[key] = profile
            return profile

    def invalidate(self, dataset: str, fingerprint: str) -> None:
        """Drop a whole config's records (the --force path)."""
        path = self._file(dataset, fingerprint)
        with self._lock:
            self._indexes.pop(path, None)
            if path.exists():
                path.unlink()


def compress_many(contexts: Sequence[UserContext], cfg: CompressionConfig, *,
                  cache: ProfileCache | None = None, dataset: str = "default",
                  jobs: int = 4) -> list[CompressedProfile]:
    """Compress a batch, concurrently, reusing cached profiles.

    Cache writes happen after all workers finish, in input order, so the
    cache file content is deterministic for a given input order.
    """
    fingerprint = cfg.fingerprint()
    results: list[CompressedProfile | None] = [None] * len(contexts)
    todo = []
    for pos, ctx in enumerate(contexts):
        hit = None
        if cache is not None:
            hit = cache.get(dataset, fingerprint, ctx.user_id, cfg.method)
        if hit is not None:
            results[pos] = hit
        else:
            todo.append(pos)
    if todo:
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            futures = [(pos, pool.submit(compress, contexts[pos], cfg)) for pos in todo]
            for pos, future in futures:
                results[pos] = future.result()
    if cache is not None:
        for pos in todo:
            results[pos] = cache.put(dataset, fingerprint, results[pos])
    return results
