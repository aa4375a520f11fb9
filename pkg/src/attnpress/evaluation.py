"""Scoring of compressed profiles: selection accuracy, title ROUGE-L, grids.

The two task evaluators share one fixed inference prompt per task shape, so
every compression method is judged under identical conditions. Report
tables guard against silent row overwrites and export to CSV with fixed
float formatting, which is what makes repeated runs byte-comparable.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from statistics import mean
from typing import Sequence

from .attention import average_heads, sentence_scores, signal_scores
from .context import TaskInstance, UserContext, assign_tokens
from .errors import PipelineError
from .pipeline import CompressedProfile, CompressionConfig, ProfileCache, compress_many
from .providers import AttentionRequest, GenerationRequest, fetch_attention, generate
from .templates import render_template


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class SelectionOutcome:
    correct: bool
    parse_failure: bool
    answer: int | None = None


_ANSWER_RE = re.compile(r"\b([1-5])\b")
_ROUGE_TOKEN_RE = re.compile(r"[^\W_]+")


def _rouge_tokens(text: str) -> list[str]:
    return _ROUGE_TOKEN_RE.findall(text.lower())


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[-1]))
        prev = cur
    return prev[-1]


def rouge_l(reference: str, hypothesis: str) -> RougeScore:
    """ROUGE-L F1 over lowercase alphanumeric tokens.

    precision = LCS/|hypothesis|, recall = LCS/|reference|; an empty side
    contributes 0 rather than dividing by zero.
    """
    ref = _rouge_tokens(reference)
    hyp = _rouge_tokens(hypothesis)
    lcs = _lcs_length(ref, hyp)
    precision = lcs / len(hyp) if hyp else 0.0
    recall = lcs / len(ref) if ref else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return RougeScore(precision, recall, f1)


def _profile_text(profile) -> str:
    if isinstance(profile, CompressedProfile):
        return profile.text
    return str(profile)


def eval_selection(profile, task: TaskInstance, generator,
                   answer_tokens: int = 16) -> SelectionOutcome:
    """Ask the generator to pick among the five candidates given the profile.

    The answer is the first standalone digit 1–5 in the output; anything
    else counts as incorrect with the parse-failure flag set.
    """
    if task.kind != "selection":
        raise PipelineError(f"selection evaluation on a {task.kind} task")
    prompt = render_template(
        "selection/inference",
        profile=_profile_text(profile),
        candidate_1=task.candidates[0],
        candidate_2=task.candidates[1],
        candidate_3=task.candidates[2],
        candidate_4=task.candidates[3],
        candidate_5=task.candidates[4],
    )
    result = generate(generator, GenerationRequest(user=prompt, max_tokens=answer_tokens))
    match = _ANSWER_RE.search(result.text)
    if match is None:
        return SelectionOutcome(correct=False, parse_failure=True)
    answer = int(match.group(1))
    return SelectionOutcome(
        correct=(answer - 1 == task.gold_index), parse_failure=False, answer=answer,
    )


def eval_generation(profile, task: TaskInstance, generator,
                    title_tokens: int = 32) -> RougeScore:
    """Generate a title from (profile, query abstract) and score it against gold."""
    if task.kind != "generation":
        raise PipelineError(f"generation evaluation on a {task.kind} task")
    prompt = render_template(
        "generation/inference", profile=_profile_text(profile), abstract=task.query,
    )
    result = generate(generator, GenerationRequest(user=prompt, max_tokens=title_tokens))
    return rouge_l(task.gold, result.text)


class ReportTable:
    """Keyed rows with a fixed column set; duplicate keys are an error."""

    def __init__(self, columns: Sequence[str]):
        self.columns = tuple(columns)
        self._rows: dict[tuple, dict] = {}

    def add_row(self, key, **values):
        key = tuple(key)
        if key in self._rows:
            raise ValueError(f"duplicate report row {key}")
        unknown = set(values) - set(self.columns)
        if unknown:
            raise ValueError(f"unknown report columns {sorted(unknown)}")
        self._rows[key] = {col: values.get(col) for col in self.columns}

    def rows(self) -> list[dict]:
        return [dict(row) for row in self._rows.values()]

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, key) -> bool:
        return tuple(key) in self._rows

    def get(self, key) -> dict | None:
        row = self._rows.get(tuple(key))
        return dict(row) if row is not None else None

    @staticmethod
    def _cell(value) -> str:
        if value is None:
            return ""
        if isinstance(value, float):
            return f"{value:.6f}"
        return str(value)

    def to_csv(self, path=None) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self._rows.values():
            writer.writerow([self._cell(row[col]) for col in self.columns])
        text = buffer.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def _score_profiles(profiles, tasks, eval_generator):
    """Mean task metric over (profile, task) pairs plus parse-failure count."""
    kind = tasks[0].kind
    if kind == "selection":
        outcomes = [eval_selection(p, t, eval_generator) for p, t in zip(profiles, tasks)]
        metric = sum(o.correct for o in outcomes) / len(outcomes)
        failures = sum(o.parse_failure for o in outcomes)
        return metric, failures
    scores = [eval_generation(p, t, eval_generator).f1 for p, t in zip(profiles, tasks)]
    return mean(scores), 0


GRID_COLUMNS = ("method", "token_limit", "metric", "n", "parse_failures")


def run_grid(items, methods: Sequence[str], token_limits: Sequence[int],
             make_config, eval_generator, *, cache: ProfileCache | None = None,
             dataset: str = "default", jobs: int = 4,
             compute: bool = True) -> ReportTable:
    """One row per (method, token limit) plus full-context and no-context rows.

    ``make_config(method, limit)`` supplies the compression config. With
    ``compute=False`` only cached profiles are used and any (method, limit)
    with missing users becomes an absent row (empty metric) — the run never
    aborts half way.
    """
    contexts = [ctx for ctx, _ in items]
    tasks = [task for _, task in items]
    table = ReportTable(GRID_COLUMNS)
    for method in methods:
        for limit in token_limits:
            cfg: CompressionConfig = make_config(method, limit)
            profiles = None
            if compute:
                try:
                    profiles = compress_many(
                        contexts, cfg, cache=cache, dataset=dataset, jobs=jobs,
                    )
                except PipelineError:
                    profiles = None
            elif cache is not None:
                fingerprint = cfg.fingerprint()
                found = [
                    cache.get(dataset, fingerprint, ctx.user_id, method)
                    for ctx in contexts
                ]
                if all(p is not None for p in found):
                    profiles = found
            if profiles is None:
                table.add_row((method, limit), method=method, token_limit=limit,
                              metric=None, n=0, parse_failures=None)
                continue
            metric, failures = _score_profiles(profiles, tasks, eval_generator)
            table.add_row((method, limit), method=method, token_limit=limit,
                          metric=metric, n=len(profiles), parse_failures=failures)
    for label, text_of in (("full-context", lambda c: c.document),
                           ("no-context", lambda c: "")):
        metric, failures = _score_profiles(
            [text_of(ctx) for ctx in contexts], tasks, eval_generator,
        )
        table.add_row((label, ""), method=label, token_limit="",
                      metric=metric, n=len(contexts), parse_failures=failures)
    return table


ABLATION_COLUMNS = ("param", "value", "metric", "mean_selected", "n")


def ablate(param: str, values: Sequence, make_config, items, eval_generator, *,
           cache: ProfileCache | None = None, dataset: str = "default",
           jobs: int = 4) -> ReportTable:
    """Sweep one parameter, holding the rest fixed; one row per value.

    Rows carry the task metric and the mean selection-set size, so
    threshold sweeps expose how marking cardinality shrinks as alpha grows.
    """
    if not values:
        raise PipelineError("ablation needs at least one value")
    contexts = [ctx for ctx, _ in items]
    tasks = [task for _, task in items]
    table = ReportTable(ABLATION_COLUMNS)
    for value in values:
        cfg: CompressionConfig = make_config(value)
        try:
            profiles = compress_many(contexts, cfg, cache=cache, dataset=dataset, jobs=jobs)
        except PipelineError:
            table.add_row((param, str(value)), param=param, value=value,
                          metric=None, mean_selected=None, n=0)
            continue
        metric, _ = _score_profiles(profiles, tasks, eval_generator)
        sizes = [len(p.audit) for p in profiles if p.audit is not None]
        table.add_row(
            (param, str(value)), param=param, value=value, metric=metric,
            mean_selected=mean(sizes) if sizes else None, n=len(profiles),
        )
    return table


SIGNAL_COLUMNS = ("layer", "signal_label", "mean_score", "sentence_count")


def signal_report(contexts: Sequence[UserContext], layers: Sequence[int],
                  provider) -> ReportTable:
    """Per-layer, per-signal-type mean attention, averaged across users."""
    table = ReportTable(SIGNAL_COLUMNS)
    for layer in layers:
        sums: dict[str, float] = {}
        user_counts: dict[str, int] = {}
        sentence_counts: dict[str, int] = {}
        for ctx in contexts:
            snap = fetch_attention(provider, AttentionRequest(ctx.document, ctx.task, layer))
            assignment = assign_tokens(snap.token_offsets, ctx)
            sent = sentence_scores(average_heads(snap), assignment)
            sig = signal_scores(sent, ctx)
            for label, score in sig.scores.items():
                sums[label] = sums.get(label, 0.0) + score
                user_counts[label] = user_counts.get(label, 0) + 1
                sentence_counts[label] = (
                    sentence_counts.get(label, 0) + sig.sentence_counts[label]
                )
        for label in sorted(sums):
            table.add_row(
                (layer, label), layer=layer, signal_label=label,
                mean_score=sums[label] / user_counts[label],
                sentence_count=sentence_counts[label],
            )
    return table


EFFICIENCY_COLUMNS = ("method", "tokens", "percentage")


def token_efficiency(grid: ReportTable, target: float, methods: Sequence[str],
                     full_context_tokens: int) -> ReportTable:
    """Smallest evaluated limit at which each method reaches ``target``.

    ``percentage`` is that limit as a percentage of the full-context token
    count; methods that never reach the target get "not reached".
    """
    by_method: dict[str, list[tuple[int, float]]] = {}
    for row in grid.rows():
        limit = row["token_limit"]
        if limit == "" or row["metric"] is None:
            continue
        by_method.setdefault(row["method"], []).append((int(limit), row["metric"]))
    table = ReportTable(EFFICIENCY_COLUMNS)
    for method in methods:
        reached = None
        for limit, metric in sorted(by_method.get(method, [])):
            if metric >= target:
                reached = limit
                break
        if reached is None:
            table.add_row((method,), method=method, tokens="not reached", percentage=None)
        else:
            table.add_row(
                (method,), method=method, tokens=reached,
                percentage=100.0 * reached / full_context_tokens,
            )
    return table
