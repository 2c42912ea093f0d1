"""Command-line pipeline driver.

Each subcommand reads and writes files only, prints a one-line summary
to standard output, and is fully determined by its options, so reruns
with identical inputs produce byte-identical artifacts. Options resolve
in order: command-line flag, then --config JSON key, then built-in
default. Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

from .augment import (
    QC_DEFAULT_QUOTA,
    QC_DEFAULT_TARGETS,
    QI_DEFAULT_QUOTA,
    QI_DEFAULT_TARGETS,
    HttpTranslator,
    StubTranslator,
    dev_paths,
    execute_plan,
    plan_from_json,
    plan_qc_augmentation,
    plan_qi_augmentation,
)
from .cleanse import cleanse, language_stats, load_allowlist
from .errors import InputError, RelmineError
from .metrics import distribution_report, evaluate_task
from .mining import (
    DEFAULT_HARD_THRESHOLD,
    MiningConfig,
    batch_mine,
    load_embeddings,
)
from .records import (
    PATH_SEPARATOR,
    TASKS,
    canonical_key,
    parse_record_file,
    write_record_file,
)
from .seeding import DEFAULT_SEED
from .split import (
    DEFAULT_RATIOS,
    SPLIT_NAMES,
    split_query_disjoint,
    split_stratified,
)
from .taxonomy import (
    STRATEGIES,
    NegativeGenConfig,
    SubprocessQueryGenerator,
    batch_generate,
    build_taxonomy,
)

# Every key a config file may carry; flags share these names as dests.
_CONFIG_KEYS = frozenset({
    "task", "input", "output", "out_dir", "report",
    "allowlist", "strict_numeric", "path_separator",
    "strategy", "seed", "max_resamples", "generator_cmd",
    "embeddings", "mining_mode", "tau", "uniform_hard", "threads",
    "targets", "quota", "dev", "plan", "endpoint", "batch_size", "retries",
    "split_mode", "ratios", "gold", "pred", "json", "csv", "svg",
})


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on bad usage; the contract here is 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


@dataclass
class _Options:
    ns: argparse.Namespace
    config: dict

    def get(self, key: str, default=None):
        value = getattr(self.ns, key, None)
        if value is not None:
            return value
        if key in self.config and self.config[key] is not None:
            return self.config[key]
        return default

    def require(self, key: str, flag: str):
        value = self.get(key)
        if value is None:
            raise InputError(f"missing required option {flag}")
        return value


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"config {path} must hold a JSON object")
    unknown = sorted(set(doc) - _CONFIG_KEYS)
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")
    return doc


def _check_cli_task(opts: _Options) -> str:
    task = opts.require("task", "--task")
    if task not in TASKS:
        raise InputError(f"task must be one of {TASKS}, got {task!r}")
    return task


def _parse_languages(value) -> tuple[str, ...]:
    if isinstance(value, str):
        parts = tuple(part.strip() for part in value.split(",") if part.strip())
    elif isinstance(value, (list, tuple)):
        parts = tuple(value)
    else:
        raise InputError(f"cannot read a language list from {value!r}")
    if not parts:
        raise InputError("language list is empty")
    return parts


def _parse_ratios(value) -> tuple[float, float, float]:
    if isinstance(value, str):
        pieces = [part.strip() for part in value.split(",")]
    elif isinstance(value, (list, tuple)):
        pieces = list(value)
    else:
        raise InputError(f"cannot read ratios from {value!r}")
    try:
        numbers = tuple(float(p) for p in pieces)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad ratio value in {value!r}") from exc
    if len(numbers) != 3:
        raise InputError("ratios need exactly three comma-separated numbers")
    return numbers  # range/sum validation happens in the split module


def _resolve_seed(opts: _Options) -> int:
    seed = opts.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise InputError(f"seed must be an integer, got {seed!r}")
    return seed


def _resolve_threads(opts: _Options) -> int:
    value = opts.get("threads")
    if value is None:
        env = os.environ.get("RELMINE_THREADS")
        if env:
            try:
                value = int(env)
            except ValueError:
                raise InputError(f"RELMINE_THREADS is not an integer: {env!r}") from None
    if value is None:
        return 1
    value = int(value)
    if value < 1:
        raise InputError("thread count must be positive")
    return value


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _cmd_ingest(opts: _Options) -> int:
    task = _check_cli_task(opts)
    source = opts.require("input", "--in")
    out = opts.require("output", "--out")
    separator = opts.get("path_separator", PATH_SEPARATOR)
    records, diagnostics = parse_record_file(source, task, path_separator=separator)
    write_record_file(out, records, task)
    print(f"ingest: kept {len(records)} records, skipped {len(diagnostics)} -> {out}")
    return 0


def _cmd_clean(opts: _Options) -> int:
    task = _check_cli_task(opts)
    source = opts.require("input", "--in")
    out = opts.require("output", "--out")
    allowlist_path = opts.get("allowlist")
    allowlist = load_allowlist(allowlist_path) if allowlist_path else frozenset()
    records, _ = parse_record_file(source, task)
    result = cleanse(
        records,
        allowlist=allowlist,
        strict_numeric=bool(opts.get("strict_numeric", False)),
    )
    write_record_file(out, result.kept, task)
    report_path = opts.get("report")
    if report_path:
        _write_text(report_path, result.report.to_json() + "\n")
    print(result.report.to_json())
    return 0


def _cmd_stats(opts: _Options) -> int:
    task = _check_cli_task(opts)
    source = opts.require("input", "--in")
    records, _ = parse_record_file(source, task)
    stats = language_stats(records)
    json_path = opts.get("json")
    if json_path:
        _write_text(json_path, stats.to_json() + "\n")
    csv_path = opts.get("csv")
    if csv_path:
        _write_text(csv_path, stats.to_csv())
    print(
        f"stats: {stats.total} records, {stats.total_positives} positive, "
        f"{stats.total_negatives} negative, {len(stats.counts)} languages"
    )
    return 0


def _cmd_taxonomy(opts: _Options) -> int:
    source = opts.require("input", "--in")
    out = opts.require("output", "--out")
    records, _ = parse_record_file(source, "qc")
    if not records:
        raise InputError(f"{source} holds no usable records")
    tree = build_taxonomy(record.path for record in records)
    _write_text(out, tree.to_json())
    print(
        f"taxonomy: {tree.root_count} roots, "
        f"{len(tree.observed_leaves())} observed leaves -> {out}"
    )
    return 0


def _cmd_gen_negatives(opts: _Options) -> int:
    source = opts.require("input", "--in")
    out = opts.require("output", "--out")
    strategy = opts.require("strategy", "--strategy")
    config = NegativeGenConfig(
        strategy,
        seed=_resolve_seed(opts),
        max_resamples=int(opts.get("max_resamples", 16)),
    )
    records, _ = parse_record_file(source, "qc")
    sources = [record for record in records if record.label == 1]
    positive_keys = {canonical_key(record) for record in sources}
    if strategy == "synthetic-query":
        command = opts.require("generator_cmd", "--generator-cmd")
        with SubprocessQueryGenerator(shlex.split(command)) as generator:
            negatives, diagnostics = batch_generate(
                sources, None, positive_keys, config, generator
            )
    else:
        if not records:
            raise InputError(f"{source} holds no usable records")
        tree = build_taxonomy(record.path for record in records)
        negatives, diagnostics = batch_generate(sources, tree, positive_keys, config)
    write_record_file(out, negatives, "qc")
    print(
        f"gen-negatives: {len(negatives)} negatives via {strategy}, "
        f"{len(diagnostics)} skipped -> {out}"
    )
    return 0


def _cmd_mine(opts: _Options) -> int:
    source = opts.require("input", "--in")
    out = opts.require("output", "--out")
    embeddings_path = opts.require("embeddings", "--embeddings")
    config = MiningConfig(
        mode=opts.get("mining_mode", "easy"),
        hard_threshold=float(opts.get("tau", DEFAULT_HARD_THRESHOLD)),
        seed=_resolve_seed(opts),
        hard_uniform=bool(opts.get("uniform_hard", False)),
    )
    records, _ = parse_record_file(source, "qi")
    positives = [record for record in records if record.label == 1]
    store = load_embeddings(embeddings_path)
    result = batch_mine(positives, store, config, workers=_resolve_threads(opts))
    write_record_file(out, result.negatives, "qi")
    print(
        f"mine: {len(result.negatives)} {config.mode} negatives, "
        f"{len(result.diagnostics)} skipped -> {out}"
    )
    return 0


def _cmd_augment_plan(opts: _Options) -> int:
    task = _check_cli_task(opts)
    source = opts.require("input", "--in")
    out = opts.require("output", "--out")
    seed = _resolve_seed(opts)
    records, _ = parse_record_file(source, task)
    if task == "qc":
        targets = _parse_languages(opts.get("targets", QC_DEFAULT_TARGETS))
        quota = int(opts.get("quota", QC_DEFAULT_QUOTA))
        dev_file = opts.require("dev", "--dev")
        dev_records, _ = parse_record_file(dev_file, "qc")
        plan = plan_qc_augmentation(records, dev_paths(dev_records), targets, quota, seed)
    else:
        targets = _parse_languages(opts.get("targets", QI_DEFAULT_TARGETS))
        quota = int(opts.get("quota", QI_DEFAULT_QUOTA))
        plan = plan_qi_augmentation(records, targets, quota, seed)
    _write_text(out, plan.to_json())
    print(
        f"augment-plan: {plan.total()} sources across "
        f"{len(plan.targets())} target languages -> {out}"
    )
    return 0


def _cmd_augment_run(opts: _Options) -> int:
    task = _check_cli_task(opts)
    source = opts.require("input", "--in")
    plan_path = opts.require("plan", "--plan")
    out = opts.require("output", "--out")
    records, _ = parse_record_file(source, task)
    try:
        with open(plan_path, "r", encoding="utf-8") as fh:
            plan_text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read plan {plan_path}: {exc}") from exc
    plan = plan_from_json(plan_text, records)
    if plan.task != task:
        raise InputError(f"plan is for task {plan.task!r}, not {task!r}")
    endpoint = opts.get("endpoint")
    translator = HttpTranslator(endpoint) if endpoint else StubTranslator()
    augmented, diagnostics = execute_plan(
        plan,
        translator,
        batch_size=int(opts.get("batch_size", 64)),
        retries=int(opts.get("retries", 3)),
    )
    write_record_file(out, augmented, task)
    print(
        f"augment-run: {len(augmented)} translated records, "
        f"{len(diagnostics)} failures -> {out}"
    )
    return 0


def _cmd_split(opts: _Options) -> int:
    task = _check_cli_task(opts)
    source = opts.require("input", "--in")
    out_dir = opts.require("out_dir", "--out-dir")
    mode = opts.get("split_mode", "query-disjoint")
    ratios = _parse_ratios(opts.get("ratios", DEFAULT_RATIOS))
    seed = _resolve_seed(opts)
    records, _ = parse_record_file(source, task)
    if mode == "stratified":
        manifest = split_stratified(records, ratios, seed)
    elif mode == "query-disjoint":
        manifest = split_query_disjoint(records, ratios, seed)
    else:
        raise InputError(f"split mode must be stratified or query-disjoint, got {mode!r}")
    os.makedirs(out_dir, exist_ok=True)
    parts = manifest.partition(records)
    for name in SPLIT_NAMES:
        write_record_file(os.path.join(out_dir, f"{name}.tsv"), parts[name], task)
    _write_text(os.path.join(out_dir, "manifest.json"), manifest.to_json())
    counts = manifest.counts()
    print(
        "split: " + " ".join(f"{name}={counts[name]}" for name in SPLIT_NAMES)
        + f" -> {out_dir}"
    )
    return 0


def _cmd_evaluate(opts: _Options) -> int:
    task = _check_cli_task(opts)
    gold = opts.require("gold", "--gold")
    pred = opts.require("pred", "--pred")
    report = evaluate_task(gold, pred, task)
    json_path = opts.get("json")
    if json_path:
        _write_text(json_path, report.to_json())
    sys.stdout.write(report.to_table())
    print(
        f"evaluate: micro_f1={report.micro_f1:.4f} "
        f"macro_f1={report.macro_f1:.4f} pairs={report.pooled.total}"
    )
    return 0


def _cmd_report(opts: _Options) -> int:
    task = _check_cli_task(opts)
    source = opts.require("input", "--in")
    records, _ = parse_record_file(source, task)
    report = distribution_report(records)
    svg_path = opts.get("svg")
    if svg_path:
        _write_text(svg_path, report.svg)
    json_path = opts.get("json")
    if json_path:
        _write_text(json_path, report.to_json() + "\n")
    print(
        f"report: {report.stats.total} records, "
        f"{report.stats.total_positives} positive, "
        f"{report.stats.total_negatives} negative, "
        f"{len(report.stats.counts)} languages"
    )
    return 0


_HANDLERS = {
    "ingest": _cmd_ingest,
    "clean": _cmd_clean,
    "stats": _cmd_stats,
    "taxonomy": _cmd_taxonomy,
    "gen-negatives": _cmd_gen_negatives,
    "mine": _cmd_mine,
    "augment-plan": _cmd_augment_plan,
    "augment-run": _cmd_augment_run,
    "split": _cmd_split,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
}


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="relmine",
        description="Relevance-corpus curation: cleaning, negative "
        "generation, mining, augmentation, splitting, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="JSON config file; flags override it")
        cmd.add_argument("--task", choices=TASKS)
        cmd.add_argument("--seed", type=int)
        return cmd

    cmd = add("ingest", "normalize a record file into canonical TSV")
    cmd.add_argument("--in", dest="input")
    cmd.add_argument("--out", dest="output")
    cmd.add_argument("--path-separator", dest="path_separator")

    cmd = add("clean", "remove conflicts, duplicates, and numeric-only queries")
    cmd.add_argument("--in", dest="input")
    cmd.add_argument("--out", dest="output")
    cmd.add_argument("--allowlist")
    cmd.add_argument("--strict-numeric", dest="strict_numeric",
                     action="store_true", default=None)
    cmd.add_argument("--report", help="also write the summary JSON here")

    cmd = add("stats", "per-language label counts")
    cmd.add_argument("--in", dest="input")
    cmd.add_argument("--json", help="write counts JSON here")
    cmd.add_argument("--csv", help="write counts CSV here")

    cmd = add("taxonomy", "build the observed-path category tree")
    cmd.add_argument("--in", dest="input")
    cmd.add_argument("--out", dest="output")

    cmd = add("gen-negatives", "derive negatives from positive QC records")
    cmd.add_argument("--in", dest="input")
    cmd.add_argument("--out", dest="output")
    cmd.add_argument("--strategy", choices=STRATEGIES)
    cmd.add_argument("--max-resamples", dest="max_resamples", type=int)
    cmd.add_argument("--generator-cmd", dest="generator_cmd",
                     help="synthetic-query generator command line")

    cmd = add("mine", "mine QI negatives from item embeddings")
    cmd.add_argument("--in", dest="input")
    cmd.add_argument("--out", dest="output")
    cmd.add_argument("--embeddings")
    cmd.add_argument("--mode", dest="mining_mode", choices=("easy", "hard"))
    cmd.add_argument("--tau", type=float)
    cmd.add_argument("--uniform-hard", dest="uniform_hard",
                     action="store_true", default=None)
    cmd.add_argument("--threads", type=int)

    cmd = add("augment-plan", "plan translation augmentation under quotas")
    cmd.add_argument("--in", dest="input")
    cmd.add_argument("--out", dest="output")
    cmd.add_argument("--targets", help="comma-separated target languages")
    cmd.add_argument("--quota", type=int)
    cmd.add_argument("--dev", help="dev record file (QC path coverage)")

    cmd = add("augment-run", "execute a translation plan")
    cmd.add_argument("--in", dest="input")
    cmd.add_argument("--plan")
    cmd.add_argument("--out", dest="output")
    cmd.add_argument("--endpoint", help="translator base URL; omit for the stub")
    cmd.add_argument("--batch-size", dest="batch_size", type=int)
    cmd.add_argument("--retries", type=int)

    cmd = add("split", "write train/validation/test files and a manifest")
    cmd.add_argument("--in", dest="input")
    cmd.add_argument("--out-dir", dest="out_dir")
    cmd.add_argument("--mode", dest="split_mode",
                     choices=("stratified", "query-disjoint"))
    cmd.add_argument("--ratios", help="three comma-separated fractions")

    cmd = add("evaluate", "score predictions with positive-class F1")
    cmd.add_argument("--gold")
    cmd.add_argument("--pred")
    cmd.add_argument("--json", help="write the report JSON here")

    cmd = add("report", "per-language distribution counts and SVG chart")
    cmd.add_argument("--in", dest="input")
    cmd.add_argument("--json", help="write counts JSON here")
    cmd.add_argument("--svg", help="write the bar chart here")

    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        opts = _Options(ns, _load_config(ns.config))
        return _HANDLERS[ns.command](opts)
    except InputError as exc:
        print(f"relmine: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"relmine: error: {exc}", file=sys.stderr)
        return 1
    except RelmineError as exc:
        print(f"relmine: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"relmine: error: {exc}", file=sys.stderr)
        return 2


def main(argv: Optional[Sequence[str]] = None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
