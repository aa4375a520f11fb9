"""Batch command-line interface.

Subcommands mirror the pipeline stages: ``mark`` writes marked histories
and selection audits, ``compress`` fills the profile cache, ``eval`` /
``ablate`` / ``analyze`` / ``efficiency`` emit CSV reports. Configuration
merges three layers — built-in defaults, a JSON manifest, then flags — and
the effective configuration is echoed next to every output for audit.

Exit codes: 0 complete, 2 usage error, 3 partial failure (failed users or
missing cache entries, listed on stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .context import ingest_generation_dataset, ingest_selection_dataset
from .errors import AttnpressError
from .evaluation import run_grid, ablate, signal_report, token_efficiency
from .marking import mark_context
from .pipeline import (
    METHODS,
    CompressionConfig,
    ProfileCache,
    attention_selection,
    compress_many,
)
from .providers import WhitespaceCounter, build_generator, build_provider

DEFAULT_LIMITS = (50, 100, 150, 200)


@dataclass
class RunManifest:
    """Effective run configuration after defaults <- manifest file <- flags."""

    task: str = "selection"
    dataset: str | None = None
    signal_manifest: str | None = None
    provider: dict | None = None
    generator: dict | None = None
    eval_generator: dict | None = None
    methods: list[str] = field(default_factory=lambda: list(METHODS))
    limits: list[int] = field(default_factory=lambda: list(DEFAULT_LIMITS))
    alpha: float = 0.2
    layer: int | None = None
    seed: int = 0
    temperature: float = 0.0
    jobs: int = 4
    cache_dir: str = "cache"
    output_dir: str = "out"
    dataset_name: str = "default"

    def echo(self) -> dict:
        return asdict(self)


def _parse_int_list(raw: str) -> list[int]:
    return [int(part) for part in raw.split(",") if part.strip()]


def _parse_methods(raw: str, parser) -> list[str]:
    methods = [part.strip() for part in raw.split(",") if part.strip()]
    for method in methods:
        if method not in METHODS:
            parser.error(f"unknown method {method!r} (choose from {', '.join(METHODS)})")
    return methods


def _parse_sweep(param: str, raw: str, parser) -> list:
    """Sweep values: "a:b:step" inclusive range or a comma list; "0-15" for layers."""
    cast = float if param == "alpha" else int
    if ":" in raw:
        lo_s, hi_s, step_s = raw.split(":")
        lo, hi, step = float(lo_s), float(hi_s), float(step_s)
        if step <= 0:
            parser.error("sweep step must be positive")
        values = []
        v = lo
        while v <= hi + 1e-9:
            values.append(cast(round(v, 10)))
            v += step
        return values
    if "-" in raw and param == "layer":
        lo_s, hi_s = raw.split("-")
        return list(range(int(lo_s), int(hi_s) + 1))
    return [cast(part) for part in raw.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attnpress",
        description="Compress user histories into token-limited profiles and score them.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="JSON run manifest; flags override it")
    common.add_argument("--dataset", help="path to the line-delimited dataset")
    common.add_argument("--task", choices=("selection", "generation"))
    common.add_argument("--signal-manifest", dest="signal_manifest",
                        help="field-to-signal-label map (JSON)")
    common.add_argument("--provider", help="attention provider kind (toy|remote)")
    common.add_argument("--generator", help="generator kind")
    common.add_argument("--eval-generator", dest="eval_generator",
                        help="generator kind used for task evaluation")
    common.add_argument("--alpha", type=float)
    common.add_argument("--layer", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--temperature", type=float)
    common.add_argument("--jobs", type=int)
    common.add_argument("--cache-dir", dest="cache_dir")
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("--dataset-name", dest="dataset_name")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("mark", parents=[common],
                   help="write marked histories and selection audits")

    p_compress = sub.add_parser("compress", parents=[common],
                                help="fill the profile cache")
    p_compress.add_argument("--methods")
    p_compress.add_argument("--limits")
    p_compress.add_argument("--max-tokens", dest="max_tokens", type=int,
                            help="single token limit (alternative to --limits)")
    p_compress.add_argument("--method", help="single method (alternative to --methods)")
    p_compress.add_argument("--force", action="store_true",
                            help="recompute even when cached")

    p_eval = sub.add_parser("eval", parents=[common], help="method x limit grid CSV")
    p_eval.add_argument("--methods")
    p_eval.add_argument("--limits")

    p_ablate = sub.add_parser("ablate", parents=[common],
                              help="sweep alpha or layer, emit plot-data CSV")
    p_ablate.add_argument("--param", choices=("alpha", "layer"), required=True)
    p_ablate.add_argument("--values", required=True)
    p_ablate.add_argument("--limit", type=int, default=50,
                          help="token limit used during the sweep")

    p_analyze = sub.add_parser("analyze", parents=[common],
                               help="per-layer per-signal attention CSV")
    p_analyze.add_argument("--layers", required=True)

    p_eff = sub.add_parser("efficiency", parents=[common],
                           help="tokens needed to reach a target metric")
    p_eff.add_argument("--methods")
    p_eff.add_argument("--limits")
    p_eff.add_argument("--target", type=float, required=True)
    return parser


def _merge_manifest(ns, parser) -> RunManifest:
    manifest = RunManifest()
    if ns.manifest:
        path = Path(ns.manifest)
        if not path.exists():
            parser.error(f"manifest {path} does not exist")
        data = json.loads(path.read_text(encoding="utf-8"))
        for key, value in data.items():
            if not hasattr(manifest, key):
                parser.error(f"unknown manifest key {key!r}")
            setattr(manifest, key, value)
    for key in ("dataset", "task", "signal_manifest", "alpha", "layer", "seed",
                "temperature", "jobs", "cache_dir", "output_dir", "dataset_name"):
        value = getattr(ns, key, None)
        if value is not None:
            setattr(manifest, key, value)
    for kind_key in ("provider", "generator", "eval_generator"):
        kind = getattr(ns, kind_key, None)
        if kind is not None:
            setattr(manifest, kind_key, {"kind": kind})
    if getattr(ns, "methods", None):
        manifest.methods = _parse_methods(ns.methods, parser)
    if getattr(ns, "method", None):
        manifest.methods = _parse_methods(ns.method, parser)
    if getattr(ns, "limits", None):
        manifest.limits = _parse_int_list(ns.limits)
    if getattr(ns, "max_tokens", None):
        manifest.limits = [ns.max_tokens]

    if not 0.0 < manifest.alpha <= 1.0:
        parser.error(f"--alpha must be in (0, 1], got {manifest.alpha}")
    if any(limit < 1 for limit in manifest.limits):
        parser.error("token limits must be >= 1")
    if manifest.dataset is None:
        parser.error("a dataset path is required (--dataset or manifest)")
    if not Path(manifest.dataset).exists():
        parser.error(f"dataset {manifest.dataset} does not exist")
    if manifest.signal_manifest and not Path(manifest.signal_manifest).exists():
        parser.error(f"signal manifest {manifest.signal_manifest} does not exist")

    uses_attention_methods = any(
        m in ("attn-gs", "random-mark") for m in manifest.methods
    )
    if ns.command == "mark" or (ns.command == "ablate" and ns.param == "alpha"):
        if manifest.layer is None:
            parser.error("--layer is required for attention-based marking")
    if ns.command in ("compress", "eval", "efficiency") and uses_attention_methods:
        if manifest.layer is None:
            parser.error("--layer is required for attention-based methods")
    if ns.command in ("mark", "analyze", "ablate") and manifest.provider is None:
        parser.error("an attention provider is required (--provider or manifest)")
    if ns.command == "compress" and uses_attention_methods and manifest.provider is None:
        parser.error("an attention provider is required (--provider or manifest)")
    return manifest


def _seeded(config: dict | None, seed: int) -> dict | None:
    if config is None:
        return None
    out = dict(config)
    out.setdefault("seed", seed)
    return out


class _Runtime:
    """Constructed handles plus bookkeeping shared by all subcommands."""

    def __init__(self, manifest: RunManifest):
        self.manifest = manifest
        self.counter = WhitespaceCounter()
        loader = (ingest_selection_dataset if manifest.task == "selection"
                  else ingest_generation_dataset)
        self.items = loader(manifest.dataset, manifest.signal_manifest)
        self.contexts = [ctx for ctx, _ in self.items]
        self.provider = (build_provider(_seeded(manifest.provider, manifest.seed))
                         if manifest.provider else None)
        self.generator = (build_generator(_seeded(manifest.generator, manifest.seed))
                          if manifest.generator else None)
        self.eval_generator = (
            build_generator(_seeded(manifest.eval_generator, manifest.seed))
            if manifest.eval_generator else None
        )
        self.cache = ProfileCache(manifest.cache_dir)
        self.output_dir = Path(manifest.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def model_labels(self) -> dict:
        labels = {}
        if self.manifest.provider:
            labels["provider"] = self.manifest.provider.get("kind", "")
        if self.manifest.generator:
            labels["generator"] = self.manifest.generator.get("kind", "")
        return labels

    def make_config(self, method: str, limit: int, **overrides) -> CompressionConfig:
        args = dict(
            method=method,
            max_tokens=limit,
            dataset_kind=self.manifest.task,
            alpha=self.manifest.alpha,
            layer=self.manifest.layer,
            seed=self.manifest.seed,
            temperature=self.manifest.temperature,
            provider=self.provider,
            generator=self.generator,
            models=self.model_labels(),
        )
        args.update(overrides)
        return CompressionConfig(**args)

    def write_table(self, table, name: str) -> Path:
        out_path = self.output_dir / name
        table.to_csv(out_path)
        meta_path = out_path.with_suffix(".meta.json")
        meta_path.write_text(
            json.dumps(self.manifest.echo(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        return out_path


def _report_failures(failures: list[str]) -> int:
    if not failures:
        return 0
    print(f"{len(failures)} failure(s):", file=sys.stderr)
    for line in failures:
        print(f"  {line}", file=sys.stderr)
    return 3


def cmd_mark(rt: _Runtime) -> int:
    marked_dir = rt.output_dir / "marked"
    marked_dir.mkdir(parents=True, exist_ok=True)
    cfg = rt.make_config("attn-gs", limit=max(rt.manifest.limits))
    failures = []
    audits = []
    for ctx in rt.contexts:
        try:
            sel = attention_selection(ctx, cfg)
        except AttnpressError as exc:
            failures.append(f"user {ctx.user_id}: {exc}")
            continue
        marked = mark_context(sel, ctx)
        (marked_dir / f"{ctx.user_id}.txt").write_text(marked.text, encoding="utf-8")
        audits.append({
            "user_id": ctx.user_id,
            "alpha": rt.manifest.alpha,
            "layer": rt.manifest.layer,
            "selected": list(sel.indices()),
        })
    with open(rt.output_dir / "audit.jsonl", "w", encoding="utf-8") as fh:
        for record in audits:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    print(f"marked {len(audits)} of {len(rt.contexts)} users "
          f"(alpha={rt.manifest.alpha}, layer={rt.manifest.layer})")
    return _report_failures(failures)


def cmd_compress(rt: _Runtime, force: bool) -> int:
    failures = []
    written = 0
    for method in rt.manifest.methods:
        for limit in rt.manifest.limits:
            cfg = rt.make_config(method, limit)
            if force:
                rt.cache.invalidate(rt.manifest.dataset_name, cfg.fingerprint())
            try:
                profiles = compress_many(
                    rt.contexts, cfg, cache=rt.cache,
                    dataset=rt.manifest.dataset_name, jobs=rt.manifest.jobs,
                )
            except AttnpressError as exc:
                failures.append(f"{method}@{limit}: {exc}")
                continue
            written += len(profiles)
    print(f"cached {written} profiles for {len(rt.manifest.methods)} method(s) "
          f"x {len(rt.manifest.limits)} limit(s)")
    return _report_failures(failures)


def _grid(rt: _Runtime):
    needs_generator = any(m != "truncate" for m in rt.manifest.methods)
    needs_provider = any(m in ("attn-gs", "random-mark") for m in rt.manifest.methods)
    compute = ((rt.generator is not None or not needs_generator)
               and (rt.provider is not None or not needs_provider))
    return run_grid(
        rt.items, rt.manifest.methods, rt.manifest.limits,
        rt.make_config, rt.eval_generator,
        cache=rt.cache, dataset=rt.manifest.dataset_name,
        jobs=rt.manifest.jobs, compute=compute,
    )


def cmd_eval(rt: _Runtime) -> int:
    if rt.eval_generator is None:
        print("eval requires --eval-generator (or manifest eval_generator)",
              file=sys.stderr)
        return 2
    table = _grid(rt)
    out = rt.write_table(table, f"eval_{rt.manifest.task}.csv")
    missing = [f"{row['method']}@{row['token_limit']}: no cached profiles"
               for row in table.rows()
               if row["token_limit"] != "" and row["metric"] is None]
    print(f"wrote {out} ({len(table)} rows)")
    return _report_failures(missing)


def cmd_ablate(rt: _Runtime, param: str, values, limit: int) -> int:
    if rt.eval_generator is None:
        print("ablate requires --eval-generator (or manifest eval_generator)",
              file=sys.stderr)
        return 2

    def make(value):
        override = {param: value}
        return rt.make_config("attn-gs", limit, **override)

    table = ablate(param, values, make, rt.items, rt.eval_generator,
                   cache=rt.cache, dataset=rt.manifest.dataset_name,
                   jobs=rt.manifest.jobs)
    out = rt.write_table(table, f"ablate_{param}.csv")
    missing = [f"{param}={row['value']}: failed"
               for row in table.rows() if row["metric"] is None]
    print(f"wrote {out} ({len(table)} rows)")
    return _report_failures(missing)


def cmd_analyze(rt: _Runtime, layers) -> int:
    table = signal_report(rt.contexts, layers, rt.provider)
    out = rt.write_table(table, "signals.csv")
    print(f"wrote {out} ({len(table)} rows)")
    return 0


def cmd_efficiency(rt: _Runtime, target: float) -> int:
    if rt.eval_generator is None:
        print("efficiency requires --eval-generator (or manifest eval_generator)",
              file=sys.stderr)
        return 2
    grid = _grid(rt)
    full_tokens = round(
        sum(rt.counter.count(ctx.document) for ctx in rt.contexts) / len(rt.contexts)
    )
    table = token_efficiency(grid, target, rt.manifest.methods, full_tokens)
    out = rt.write_table(table, "efficiency.csv")
    print(f"wrote {out} ({len(table)} rows; full context ~{full_tokens} tokens)")
    missing = [f"{row['method']}@{row['token_limit']}: no cached profiles"
               for row in grid.rows()
               if row["token_limit"] != "" and row["metric"] is None]
    return _report_failures(missing)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    manifest = _merge_manifest(ns, parser)
    try:
        rt = _Runtime(manifest)
        if ns.command == "mark":
            return cmd_mark(rt)
        if ns.command == "compress":
            return cmd_compress(rt, force=ns.force)
        if ns.command == "eval":
            return cmd_eval(rt)
        if ns.command == "ablate":
            values = _parse_sweep(ns.param, ns.values, parser)
            return cmd_ablate(rt, ns.param, values, ns.limit)
        if ns.command == "analyze":
            layers = _parse_sweep("layer", ns.layers, parser)
            return cmd_analyze(rt, layers)
        if ns.command == "efficiency":
            return cmd_efficiency(rt, ns.target)
        parser.error(f"unknown command {ns.command!r}")
    except AttnpressError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
