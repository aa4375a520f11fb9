"""ROUGE-L scoring, task evaluators, report tables, and the grids."""

import itertools

import pytest
from hypothesis import given, strategies as st

from attnpress import (
    CompressionConfig,
    PipelineError,
    ProfileCache,
    ReportTable,
    TaskInstance,
    ablate,
    compress,
    eval_generation,
    eval_selection,
    ingest_selection_dataset,
    rouge_l,
    run_grid,
    signal_report,
    token_efficiency,
)
from attnpress.evaluation import _lcs_length, _rouge_tokens
from attnpress.providers import (
    AbstractPrefixTitler,
    ExtractiveSummarizer,
    FixedResponder,
    KeywordRule,
    TitleMatchSelector,
    ToyAttentionProvider,
)

import synth


# --- ROUGE-L ----------------------------------------------------------------

def oracle_lcs(a, b):
    """Longest common subsequence by exhaustive enumeration (small inputs only)."""
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    best = 0
    for mask_size in range(len(short), best, -1):
        for combo in itertools.combinations(short, mask_size):
            it = iter(long_)
            if all(tok in it for tok in combo):
                return mask_size
    return best


def test_rouge_hand_cases():
    assert rouge_l("the cat sat", "the cat sat").f1 == pytest.approx(1.0)
    assert rouge_l("aaa bbb", "ccc ddd").f1 == 0.0
    score = rouge_l("the cat sat", "the cat")
    assert score.precision == pytest.approx(1.0)
    assert score.recall == pytest.approx(2 / 3)
    assert score.f1 == pytest.approx(0.8, abs=1e-12)


def test_rouge_tokenization_is_caseless_and_punctuation_free():
    assert rouge_l("The CAT, sat!", "the cat sat").f1 == pytest.approx(1.0)
    assert _rouge_tokens("snake_case word-pair 3.5") == [
        "snake", "case", "word", "pair", "3", "5"
    ]


def test_rouge_empty_sides():
    assert rouge_l("", "something") == rouge_l("something", "")
    assert rouge_l("", "something").f1 == 0.0
    assert rouge_l("", "").f1 == 0.0
    assert rouge_l("!!!", "???").f1 == 0.0  # tokenless after cleanup


def test_lcs_matches_enumeration_oracle():
    import random

    rng = random.Random(42)
    vocab = ["a", "b", "c", "d"]
    for _ in range(200):
        ref = [rng.choice(vocab) for _ in range(rng.randrange(0, 11))]
        hyp = [rng.choice(vocab) for _ in range(rng.randrange(0, 11))]
        assert _lcs_length(ref, hyp) == oracle_lcs(ref, hyp)


def test_rouge_scores_derive_from_the_lcs():
    ref, hyp = "a b c d e", "b x d y"
    lcs = oracle_lcs(_rouge_tokens(ref), _rouge_tokens(hyp))
    score = rouge_l(ref, hyp)
    assert score.precision == lcs / 4
    assert score.recall == lcs / 5
    assert score.f1 == 2 * score.precision * score.recall / (
        score.precision + score.recall
    )


@given(st.text(alphabet="ab cd", max_size=30), st.text(alphabet="ab cd", max_size=30))
def test_rouge_f1_is_symmetric(ref, hyp):
    assert rouge_l(ref, hyp).f1 == pytest.approx(rouge_l(hyp, ref).f1, abs=1e-12)


# --- task evaluators --------------------------------------------------------

def selection_items(num_users=6):
    import tempfile
    from pathlib import Path

    records = synth.selection_records(num_users)
    with tempfile.TemporaryDirectory() as tmp:
        path = synth.write_jsonl(Path(tmp) / "sel.jsonl", records)
        items = ingest_selection_dataset(path)
    return records, items


def test_eval_selection_scores_title_matches():
    records, items = selection_items(3)
    _, task = items[0]
    gold = records[0]["interactions"][0]["title"]
    hit = eval_selection(f"I watched {gold} recently.", task, TitleMatchSelector())
    assert hit.correct and not hit.parse_failure
    assert hit.answer == task.gold_index + 1

    miss = eval_selection("Nothing useful at all.", task, TitleMatchSelector())
    assert not miss.correct and miss.parse_failure and miss.answer is None


def test_eval_selection_parses_the_first_digit():
    _, items = selection_items(1)
    _, task = items[0]
    outcome = eval_selection("p", task, FixedResponder("The answer is 3."))
    assert outcome.answer == 3
    assert outcome.correct == (task.gold_index == 2)
    assert not outcome.parse_failure
    weird = eval_selection("p", task, FixedResponder("6 or maybe 0"))
    assert weird.parse_failure  # only 1-5 count as answers


def test_eval_selection_rejects_wrong_task_kind():
    task = TaskInstance(kind="generation", query="q", gold="g")
    with pytest.raises(PipelineError, match="selection evaluation"):
        eval_selection("p", task, FixedResponder("1"))


def test_eval_generation_scores_titles():
    record = synth.generation_record(0)
    task = TaskInstance(kind="generation", query=record["query_abstract"],
                        gold=record["gold_title"])
    perfect = eval_generation("profile", task, AbstractPrefixTitler(prefix_tokens=5))
    assert perfect.f1 == pytest.approx(1.0)
    nothing = eval_generation("profile", task, FixedResponder("zzz qqq"))
    assert nothing.f1 == 0.0
    with pytest.raises(PipelineError, match="generation evaluation"):
        eval_generation("p", TaskInstance(kind="selection",
                                          candidates=tuple("abcde"), gold_index=0),
                        FixedResponder("1"))


def test_evaluators_accept_profiles_or_strings():
    records, items = selection_items(1)
    _, task = items[0]
    gold = records[0]["interactions"][0]["title"]
    cfg = CompressionConfig(method="direct", max_tokens=50,
                            generator=FixedResponder(f"Fan of {gold}."))
    profile = compress(items[0][0], cfg)
    assert eval_selection(profile, task, TitleMatchSelector()).correct
    assert eval_selection(profile.text, task, TitleMatchSelector()).correct


# --- report tables ----------------------------------------------------------

def test_report_table_basics():
    table = ReportTable(("name", "value"))
    table.add_row(("a",), name="a", value=0.5)
    assert ("a",) in table and len(table) == 1
    assert table.get(("a",)) == {"name": "a", "value": 0.5}
    assert table.get(("zzz",)) is None
    with pytest.raises(ValueError, match="duplicate"):
        table.add_row(("a",), name="a", value=0.7)
    with pytest.raises(ValueError, match="unknown report columns"):
        table.add_row(("b",), name="b", nonsense=1)


def test_report_table_csv_formatting(tmp_path):
    table = ReportTable(("method", "metric", "n"))
    table.add_row(("x",), method="x", metric=0.5, n=3)
    table.add_row(("y",), method="y", metric=None, n=0)
    expected = "method,metric,n\nx,0.500000,3\ny,,0\n"
    assert table.to_csv() == expected
    out = tmp_path / "report.csv"
    table.to_csv(out)
    assert out.read_text(encoding="utf-8") == expected


# --- grids ------------------------------------------------------------------

def grid_fixture(tmp_path, num_users=6):
    records = synth.selection_records(num_users)
    path = synth.write_jsonl(tmp_path / "sel.jsonl", records)
    items = ingest_selection_dataset(path)
    provider = ToyAttentionProvider(rules=synth.gold_rules(records))
    generator = ExtractiveSummarizer()

    def make_config(method, limit, **overrides):
        args = dict(method=method, max_tokens=limit, alpha=0.2, layer=6,
                    provider=provider, generator=generator)
        args.update(overrides)
        return CompressionConfig(**args)

    return items, make_config


def test_run_grid_shape_and_reference_rows(tmp_path):
    items, make_config = grid_fixture(tmp_path, num_users=5)
    table = run_grid(items, ("attn-gs", "truncate"), (50, 100), make_config,
                     TitleMatchSelector())
    assert len(table) == 2 * 2 + 2
    full = table.get(("full-context", ""))
    assert full["metric"] == pytest.approx(1.0)
    assert full["n"] == 5 and full["parse_failures"] == 0
    empty = table.get(("no-context", ""))
    assert empty["metric"] == 0.0
    assert empty["parse_failures"] == 5  # nothing to match, nothing to parse

    attn = table.get(("attn-gs", 50))
    assert attn["metric"] == pytest.approx(1.0)
    trunc = table.get(("truncate", 50))
    assert trunc["metric"] == pytest.approx(1 / 5)  # only the echo user survives


def test_run_grid_rejects_duplicate_cells(tmp_path):
    items, make_config = grid_fixture(tmp_path, num_users=2)
    with pytest.raises(ValueError, match="duplicate"):
        run_grid(items, ("truncate", "truncate"), (50,), make_config,
                 TitleMatchSelector())


def test_run_grid_cache_only_mode(tmp_path):
    items, make_config = grid_fixture(tmp_path)
    cache = ProfileCache(tmp_path / "cache")
    cold = run_grid(items, ("truncate",), (50,), make_config, TitleMatchSelector(),
                    cache=cache, compute=False)
    row = cold.get(("truncate", 50))
    assert row["metric"] is None and row["n"] == 0

    run_grid(items, ("truncate",), (50,), make_config, TitleMatchSelector(),
             cache=cache, compute=True)
    warm = run_grid(items, ("truncate",), (50,), make_config, TitleMatchSelector(),
                    cache=cache, compute=False)
    assert warm.get(("truncate", 50))["metric"] is not None


def test_run_grid_records_partial_failures(tmp_path):
    items, make_config = grid_fixture(tmp_path, num_users=2)

    def broken_config(method, limit):
        # attention methods get no provider, so compression fails cleanly
        return make_config(method, limit, provider=None)

    table = run_grid(items, ("attn-gs", "truncate"), (50,), broken_config,
                     TitleMatchSelector())
    assert table.get(("attn-gs", 50))["metric"] is None
    assert table.get(("truncate", 50))["metric"] is not None


def test_ablate_alpha_shrinks_the_selection(tmp_path):
    items, make_config = grid_fixture(tmp_path)

    def make(alpha):
        return make_config("attn-gs", 50, alpha=alpha)

    table = ablate("alpha", (0.01, 0.2, 1.0), make, items, TitleMatchSelector())
    rows = table.rows()
    assert [row["value"] for row in rows] == [0.01, 0.2, 1.0]
    sizes = [row["mean_selected"] for row in rows]
    assert sizes[0] > sizes[1] > sizes[2] >= 1.0
    assert all(row["metric"] == pytest.approx(1.0) for row in rows)
    assert all(row["n"] == 6 for row in rows)


def test_ablate_requires_values(tmp_path):
    items, make_config = grid_fixture(tmp_path, num_users=1)
    with pytest.raises(PipelineError, match="at least one value"):
        ablate("alpha", (), lambda v: make_config("attn-gs", 50), items,
               TitleMatchSelector())


def test_signal_report_planted_labels_dominate(tmp_path):
    records = synth.selection_records(4)
    path = synth.write_jsonl(tmp_path / "sel.jsonl", records)
    items = ingest_selection_dataset(path)
    contexts = [ctx for ctx, _ in items]
    provider = ToyAttentionProvider(rules=(
        KeywordRule("User basic info", 3.0),
        KeywordRule("The movie title is", 2.0),
        KeywordRule("stars", 1.0),
    ))
    table = signal_report(contexts, [6], provider)
    assert len(table) == 7  # one row per signal label
    score = {row["signal_label"]: row["mean_score"] for row in table.rows()}
    assert score["basic_info"] > score["title"] > score["rating"]
    for quiet in ("year", "genre", "summary", "rating_time"):
        assert score["rating"] > score[quiet]
    counts = {row["signal_label"]: row["sentence_count"] for row in table.rows()}
    assert counts["basic_info"] == 4      # one sentence per user
    assert counts["title"] == 4 * 8       # eight interactions per user


def test_signal_report_covers_each_layer(tmp_path):
    records = synth.selection_records(2)
    path = synth.write_jsonl(tmp_path / "sel.jsonl", records)
    contexts = [ctx for ctx, _ in ingest_selection_dataset(path)]
    table = signal_report(contexts, [0, 6], ToyAttentionProvider())
    assert len(table) == 7 * 2
    assert {row["layer"] for row in table.rows()} == {0, 6}


def test_token_efficiency_reports_smallest_sufficient_limit():
    grid = ReportTable(("method", "token_limit", "metric", "n", "parse_failures"))
    for method, limit, metric in (
        ("attn-gs", 100, 1.0), ("attn-gs", 50, 0.9),   # added out of order
        ("truncate", 50, 0.2), ("truncate", 100, 0.5),
        ("direct", 50, None),
    ):
        grid.add_row((method, limit), method=method, token_limit=limit,
                     metric=metric, n=0 if metric is None else 6,
                     parse_failures=None)
    grid.add_row(("full-context", ""), method="full-context", token_limit="",
                 metric=1.0, n=6, parse_failures=0)

    table = token_efficiency(grid, 0.85, ("attn-gs", "truncate", "direct"), 400)
    assert table.get(("attn-gs",)) == {
        "method": "attn-gs", "tokens": 50, "percentage": pytest.approx(12.5)
    }
    assert table.get(("truncate",))["tokens"] == "not reached"
    assert table.get(("truncate",))["percentage"] is None
    assert table.get(("direct",))["tokens"] == "not reached"
