"""Command line: ``satdtax {run,naive,eval,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .corpus import CONTEXT_CAP, CorpusError, load_dataset, load_human_reference
from .evaluate import EvaluationError, MetricReport, aggregate_runs, evaluate_run, get_embedder
from .explain import generate_explanations, load_explanations, save_explanations
from .gateway import MockProvider, ProviderConfig, ProviderError, RunLedger
from .naive import generate_naive_taxonomy
from .report import (
    efficiency_table,
    runlog_export,
    sankey_export,
    summary_markdown,
    summary_table,
    swarm_export,
    write_json,
    write_swarm_csv,
)
from .simulate import SimulatedAnalyst
from .taxonomize import DEFAULT_BATCH_SIZE, Taxonomy, TaxonomyError, build_taxonomy

log = logging.getLogger("satdtax")

DEFAULT_RUNS = 10
LEVELS = ("main", "sub")


class CliError(Exception):
    pass


def _load_config(args) -> ProviderConfig:
    if args.config:
        try:
            return ProviderConfig.load(args.config)
        except FileNotFoundError as e:
            raise CliError(str(e)) from e
    if args.provider == "http":
        raise CliError("--provider http needs --config")
    return ProviderConfig()


def _setting(args, config: ProviderConfig, name: str, default):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return config.extra.get(name, default)


def _make_provider(args, config: ProviderConfig):
    if args.provider == "mock":
        if args.mock_script:
            return MockProvider.from_file(args.mock_script, responder=SimulatedAnalyst())
        return MockProvider(responder=SimulatedAnalyst())
    return config.http_provider()


def _execute_runs(args, variant: str) -> int:
    config = _load_config(args)
    runs = int(_setting(args, config, "runs", DEFAULT_RUNS))
    if runs < 1:
        raise CliError("runs must be ≥ 1")
    batch_size = int(_setting(args, config, "batch_size", DEFAULT_BATCH_SIZE))
    context_lines = int(_setting(args, config, "context_lines", CONTEXT_CAP))
    try:
        dataset = load_dataset(args.dataset, args.source_root)
        if variant == "pipeline" and not args.explanations:
            dataset.validate_sources()
    except CorpusError as e:
        raise CliError(str(e)) from e
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    shared = load_explanations(args.explanations) if args.explanations else None

    def one_run(k: int) -> dict:
        run_id = f"run_{k:03d}"
        run_dir = out / run_id
        run_dir.mkdir(exist_ok=True)
        ledger = RunLedger()
        start = time.perf_counter()
        status, error = "ok", None
        try:
            gateway = config.gateway(_make_provider(args, config), ledger)
            if variant == "naive":
                taxonomy = generate_naive_taxonomy(dataset, gateway, config.context_limit_tokens)
            else:
                cache = run_dir / "explanations.jsonl"
                if shared is not None:
                    explanations = shared
                elif cache.is_file():
                    log.info("%s: reusing cached explanations %s", run_id, cache)
                    explanations = load_explanations(cache)
                else:
                    explanations = generate_explanations(dataset, gateway, context_lines)
                    save_explanations(explanations, cache)
                taxonomy = build_taxonomy(explanations, gateway, batch_size)
            taxonomy.validate(dataset.ids)
            taxonomy.save(run_dir / "taxonomy.json")
            taxonomy.write_csv(run_dir / "assignments.csv")
        except (ProviderError, TaxonomyError, CorpusError, RuntimeError, ValueError) as e:
            status, error = "failed", f"{type(e).__name__}: {e}"
            log.error("%s failed: %s", run_id, error)
        record = runlog_export(ledger, time.perf_counter() - start, config.cost_model,
                               dataset.name, run_id, status, error)
        record["variant"] = variant
        write_json(record, run_dir / "runlog.json")
        return record

    if args.concurrent_runs and runs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=runs) as pool:
            records = list(pool.map(one_run, range(runs)))
    else:
        records = [one_run(k) for k in range(runs)]
    with open(out / "runs.jsonl", "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    failed = [r["run_id"] for r in records if r["status"] != "ok"]
    print(f"{variant}: {runs - len(failed)}/{runs} runs succeeded -> {out}")
    return 1 if failed else 0


def cmd_run(args) -> int:
    return _execute_runs(args, "pipeline")


def cmd_naive(args) -> int:
    return _execute_runs(args, "naive")


def _run_dirs(root: Path) -> list[Path]:
    if (root / "taxonomy.json").is_file():
        return [root]
    dirs = sorted(p for p in root.iterdir() if p.is_dir() and (p / "taxonomy.json").is_file())
    if not dirs:
        raise CliError(f"no run artifacts (taxonomy.json) under {root}")
    return dirs


def cmd_eval(args) -> int:
    root = Path(args.out)
    if not root.is_dir():
        raise CliError(f"run directory not found: {root}")
    try:
        reference = load_human_reference(args.reference)
    except CorpusError as e:
        raise CliError(str(e)) from e
    dirs = _run_dirs(root)
    embedder = get_embedder(args.embedder)
    levels = LEVELS if args.level == "both" else (args.level,)
    for level in levels:
        reports, sims = [], {}
        dataset = ""
        for run_dir in dirs:
            runlog = run_dir / "runlog.json"
            if runlog.is_file():
                dataset = json.loads(runlog.read_text(encoding="utf-8")).get("dataset", "")
            dataset = dataset or Path(args.reference).stem
            taxonomy = Taxonomy.load(run_dir / "taxonomy.json")
            try:
                report, C = evaluate_run(taxonomy, reference, level, embedder, dataset, run_dir.name)
            except EvaluationError as e:
                raise CliError(f"{run_dir.name}: {e}") from e
            report.save(run_dir / f"metrics_{level}.json")
            write_json(sankey_export(C), run_dir / f"sankey_{level}.json")
            run_sims = {c.h_name: c.top_sim for c in report.per_category}
            write_swarm_csv(swarm_export({run_dir.name: run_sims}, dataset, level), run_dir / f"swarm_{level}.csv")
            reports.append(report)
            sims[run_dir.name] = run_sims
        if dirs != [root]:
            aggregate_runs(reports).save(root / f"aggregate_{level}.json")
            write_swarm_csv(swarm_export(sims, dataset, level), root / f"swarm_{level}.csv")
        agg = aggregate_runs(reports)
        print(f"{level}: runs={len(reports)} precision={agg.means['precision']:.3f} "
              f"recall={agg.means['recall']:.3f} f1={agg.means['f1']:.3f} "
              f"granularity={agg.granularity:+.1f} top_sim={agg.means['top_sim']:.3f}")
    return 0


def _read_runs(root: Path) -> list[dict]:
    path = root / "runs.jsonl"
    if not path.is_file():
        return []
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def cmd_report(args) -> int:
    pipeline, naive = Path(args.pipeline), Path(args.naive)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for level in LEVELS:
        p, n = pipeline / f"aggregate_{level}.json", naive / f"aggregate_{level}.json"
        if p.is_file() and n.is_file():
            rows.append(summary_table(MetricReport.load(p), MetricReport.load(n)))
    if not rows:
        raise CliError(f"no matching aggregate_<level>.json files in {pipeline} and {naive}; run eval first")
    write_json({"rows": rows}, out / "summary.json")
    (out / "summary.md").write_text(summary_markdown(rows), encoding="utf-8")
    efficiency = {
        "pipeline": efficiency_table(_read_runs(pipeline)),
        "naive": efficiency_table(_read_runs(naive)),
    }
    write_json(efficiency, out / "efficiency.json")
    print(summary_markdown(rows), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="satdtax", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("--config", help="provider config JSON")
        p.add_argument("--dataset", required=True, help="JSONL dataset manifest")
        p.add_argument("--source-root", help="directory the manifest's file paths are relative to")
        p.add_argument("--runs", type=int, help=f"number of repeated runs (default {DEFAULT_RUNS})")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--provider", choices=("http", "mock"), default="http")
        p.add_argument("--mock-script", help="mock script JSON {replies, fallback}")
        p.add_argument("--concurrent-runs", action="store_true", help="execute runs in parallel")

    p = sub.add_parser("run", help="two-phase taxonomy pipeline")
    run_flags(p)
    p.add_argument("--batch-size", type=int, help=f"explanations per batch (default {DEFAULT_BATCH_SIZE})")
    p.add_argument("--context-lines", type=int, help=f"source context cap (default {CONTEXT_CAP})")
    p.add_argument("--explanations", help="reuse a Phase-1 explanations JSONL for every run")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("naive", help="single-call baseline")
    run_flags(p)
    p.set_defaults(func=cmd_naive, explanations=None)

    p = sub.add_parser("eval", help="score runs against a human reference")
    p.add_argument("--out", required=True, help="a run directory or a directory of runs")
    p.add_argument("--reference", required=True, help="labeled JSONL manifest or assignments JSON")
    p.add_argument("--level", choices=("main", "sub", "both"), default="both")
    p.add_argument("--embedder", default="minilm", help="'minilm' (default), 'hash', or a sentence-transformers model")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="pipeline vs naive comparison tables")
    p.add_argument("--pipeline", required=True, help="evaluated pipeline run directory")
    p.add_argument("--naive", required=True, help="evaluated naive run directory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
