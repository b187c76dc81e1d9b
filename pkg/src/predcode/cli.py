"""Command-line interface: ``predcode <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .corpus import DatasetError, dataset_stats, load_dataset, write_dataset
from .evaluation import DEFAULT_RECALL_TARGETS, check_recall_targets
from .features import TokenValueType
from .learners import DEFAULT_C, DEFAULT_MAX_ITER, DEFAULT_TOL, AlgorithmChoice
from .sweep import (DIMENSIONS, DEFAULT_GRID, ExperimentConfig, ExperimentError, ResultTable,
                    aggregate_by_parameter, default_workers, extreme_combinations,
                    extremes_rows, format_grid, load_grid, manifest_path, metric_columns,
                    parse_dimension, run_experiment, run_sweep, write_manifest)
from .synthetic import planted_corpus, project_corpus

log = logging.getLogger("predcode")

RUN_DEFAULTS = {
    "stemming": "no",
    "ngrams": 1,
    "value_type": TokenValueType.NORMALIZED_TERM_FREQUENCY.value,
    "tokens": 10000,
    "sampling": 100.0,
    "algorithm": AlgorithmChoice.LOGISTIC_REGRESSION.value,
    "seed": 0,
}

# figure number -> aggregated dimension (6 is the strongest/weakest table)
FIGURES = {1: "value_type", 2: "algorithm", 3: "sampling", 4: "sampling", 5: "sampling", 6: None}


def _arg(conv, name):
    def parse(text):
        try:
            return conv(text)
        except (ValueError, TypeError) as exc:
            raise argparse.ArgumentTypeError(f"{name}: {exc}") from None
    parse.__name__ = name
    return parse


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise ValueError(f"must be a positive integer, got {value}")
    return value


def _unsigned_int(text):
    value = int(text)
    if value < 0:
        raise ValueError(f"must be >= 0, got {value}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise ValueError(f"must be positive, got {value}")
    return value


def _percentage(text):
    value = float(text.rstrip("%"))
    if not 0 < value <= 100:
        raise ValueError(f"must be in (0, 100], got {value}")
    return value


def _yes_no(text):
    key = text.strip().lower()
    if key in ("yes", "true", "1", "on"):
        return "yes"
    if key in ("no", "false", "0", "off"):
        return "no"
    raise ValueError(f"expected yes or no, got {text!r}")


def _recall(text):
    value = float(text)
    if not 0 < value <= 1:
        raise ValueError(f"must be in (0, 1], got {value}")
    return value


def _recall_list(text):
    return check_recall_targets(float(v) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predcode",
        description="Predictive-coding preprocessing experiments: stats, single runs, "
                    "grid sweeps and result reports.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("stats", help="class distribution of a dataset", formatter_class=fmt)
    p.add_argument("dataset", type=Path)
    p.add_argument("--format", choices=("jsonl", "csv"), default=None,
                   help="dataset format (default: from the file extension)")
    p.add_argument("--json", action="store_true", help="print JSON instead of text")

    p = sub.add_parser("run", help="run a single experiment", formatter_class=fmt)
    p.add_argument("dataset", type=Path)
    p.add_argument("--format", choices=("jsonl", "csv"), default=None,
                   help="dataset format (default: from the file extension)")
    p.add_argument("--stemming", type=_arg(_yes_no, "stemming"), default=RUN_DEFAULTS["stemming"],
                   help="apply Porter stemming (yes/no)")
    p.add_argument("--ngrams", type=_arg(_positive_int, "ngrams"), default=RUN_DEFAULTS["ngrams"],
                   help="emit all grams of order 1..N")
    p.add_argument("--value-type", type=_arg(lambda t: TokenValueType.parse(t).value, "value-type"),
                   default=RUN_DEFAULTS["value_type"],
                   help="token value type: " + ", ".join(v.value for v in TokenValueType))
    p.add_argument("--tokens", type=_arg(_positive_int, "tokens"), default=RUN_DEFAULTS["tokens"],
                   help="number of top information-gain tokens kept")
    p.add_argument("--sampling", type=_arg(_percentage, "sampling"), default=RUN_DEFAULTS["sampling"],
                   help="percentage of not-relevant training documents kept")
    p.add_argument("--algorithm", type=_arg(lambda t: AlgorithmChoice.parse(t).value, "algorithm"),
                   default=RUN_DEFAULTS["algorithm"], help="svm or logistic_regression (lr)")
    _add_learner_args(p)
    p.add_argument("--recall-targets", type=_arg(_recall_list, "recall-targets"),
                   default=DEFAULT_RECALL_TARGETS, help="comma-separated recall fractions")
    p.add_argument("--json", action="store_true", help="print the result as JSON")
    p.add_argument("--out", type=Path, default=None,
                   help="also write a one-row result CSV (with manifest sidecar)")

    p = sub.add_parser("sweep", help="run every configuration of a parameter grid", formatter_class=fmt)
    p.add_argument("dataset", type=Path)
    p.add_argument("--format", choices=("jsonl", "csv"), default=None,
                   help="dataset format (default: from the file extension)")
    p.add_argument("--grid", type=Path, default=None,
                   help="grid file ('key = v1, v2' lines); omitted keys use the full default grid")
    p.add_argument("--out", type=Path, required=True, help="result CSV")
    p.add_argument("--workers", type=_arg(_positive_int, "workers"), default=default_workers(),
                   help="worker processes (env PREDCODE_WORKERS)")
    p.add_argument("--resume", action="store_true",
                   help="skip configs already present in --out")

    p = sub.add_parser("report", help="mean metrics per value of one dimension", formatter_class=fmt)
    p.add_argument("results", type=Path)
    p.add_argument("--by", required=True, type=_arg(parse_dimension, "by"),
                   help="dimension: " + ", ".join(DIMENSIONS))
    p.add_argument("--out", type=Path, default=None, help="write CSV here instead of stdout")

    p = sub.add_parser("extremes", help="strongest and weakest configuration", formatter_class=fmt)
    p.add_argument("results", type=Path)
    p.add_argument("--recall", type=_arg(_recall, "recall"), default=0.8,
                   help="recall level (must be one of the table's targets)")
    p.add_argument("--out", type=Path, default=None, help="write CSV here instead of stdout")

    p = sub.add_parser("plot-data", help="CSV series behind a results figure", formatter_class=fmt)
    p.add_argument("results", type=Path)
    p.add_argument("--figure", type=int, choices=sorted(FIGURES), required=True,
                   help="1 value types, 2 algorithms, 3-5 down sampling, 6 strongest/weakest")
    p.add_argument("--recall", type=_arg(_recall, "recall"), default=0.8,
                   help="recall level for figure 6")
    p.add_argument("--out", type=Path, default=None, help="write CSV here instead of stdout")

    p = sub.add_parser("synth", help="write a synthetic dataset", formatter_class=fmt)
    p.add_argument("kind", choices=("planted", "project"))
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=_arg(_unsigned_int, "seed"), default=0)
    p.add_argument("--project", type=int, choices=(1, 2, 3), default=1,
                   help="published project whose class counts to mimic (project only)")
    p.add_argument("--docs", type=_arg(_positive_int, "docs"), default=2000,
                   help="document count (planted only)")
    p.add_argument("--prevalence", type=_arg(_recall, "prevalence"), default=0.15,
                   help="relevant fraction (planted only)")

    sub.add_parser("grid", help="print the full default grid file", formatter_class=fmt)
    return parser


def _add_learner_args(p):
    p.add_argument("--seed", type=_arg(_unsigned_int, "seed"), default=RUN_DEFAULTS["seed"],
                   help="down-sampling seed")
    p.add_argument("--c", dest="C", type=_arg(_positive_float, "c"), default=DEFAULT_C,
                   help="regularization constant C")
    p.add_argument("--tol", type=_arg(_positive_float, "tol"), default=None,
                   help=f"stopping tolerance (default: {DEFAULT_TOL[AlgorithmChoice.LOGISTIC_REGRESSION]!r} "
                        f"gradient norm for LR, {DEFAULT_TOL[AlgorithmChoice.SVM]!r} relative "
                        "objective change for SVM)")
    p.add_argument("--max-iter", dest="max_iterations", type=_arg(_positive_int, "max-iter"),
                   default=DEFAULT_MAX_ITER, help="iteration cap")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _emit_rows(rows, out: Path | None, manifest: dict | None = None):
    if out is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerows(rows)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    if manifest is not None:
        manifest = dict(manifest, output={"file": out.name, "sha256": _sha256(out)})
        write_manifest(manifest_path(out), manifest)


def _derived_manifest(command: str, source: Path, **params) -> dict:
    return {"tool": "predcode", "version": __version__, "command": command,
            "source": {"file": source.name, "sha256": _sha256(source)}, "parameters": params}


def cmd_stats(args) -> int:
    corpus = load_dataset(args.dataset, args.format)
    dist = dataset_stats(corpus)
    if args.json:
        print(json.dumps({"training_relevant": dist.training_relevant,
                          "training_not_relevant": dist.training_not_relevant,
                          "validation_relevant": dist.validation_relevant,
                          "validation_not_relevant": dist.validation_not_relevant,
                          "total": dist.total}, indent=2))
        return 0
    print(f"dataset: {corpus.name}")
    print(f"Training - Relevant:        {dist.training_relevant}")
    print(f"Training - Not Relevant:    {dist.training_not_relevant}")
    print(f"Validation - Relevant:      {dist.validation_relevant}")
    print(f"Validation - Not Relevant:  {dist.validation_not_relevant}")
    print(f"Total:                      {dist.total}")
    return 0


def cmd_run(args) -> int:
    corpus = load_dataset(args.dataset, args.format)
    config = ExperimentConfig(stemming=args.stemming, ngrams=args.ngrams, value_type=args.value_type,
                              tokens=args.tokens, sampling=args.sampling, algorithm=args.algorithm,
                              seed=args.seed, C=args.C, tol=args.tol,
                              max_iterations=args.max_iterations)
    try:
        result = run_experiment(config, corpus, args.recall_targets)
    except ExperimentError as exc:
        print(f"predcode run: experiment failed: {exc}", file=sys.stderr)
        return 1
    if args.out is not None:
        ResultTable([result], args.recall_targets).write_csv(args.out)
        manifest = {"tool": "predcode", "version": __version__,
                    "corpus": {"name": corpus.name, "documents": len(corpus),
                               "sha256": corpus.checksum()},
                    "config": config.to_row(), "recall_targets": list(args.recall_targets),
                    "results": {"file": args.out.name, "sha256": _sha256(args.out)}}
        write_manifest(manifest_path(args.out), manifest)
    if args.json:
        row = result.to_row()
        print(json.dumps(row, indent=2))
        return 0
    print("config: " + config.describe())
    print(f"{'recall':>8} {'% reviewed':>12} {'precision':>10}")
    for r, pr, prec in zip(result.recall_targets, result.percent_reviewed, result.precision):
        print(f"{r * 100:>7.0f}% {pr:>12.2f} {prec:>10.2f}")
    print(f"average % reviewed: {result.avg_percent_reviewed:.4f}")
    print(f"vocabulary: {result.vocabulary_size} tokens, selected {result.selected_tokens}; "
          f"training docs after sampling: {result.training_size} "
          f"({result.training_relevant} relevant)")
    print(f"learner: objective {result.objective:.6g}, optimality {result.optimality:.3g}, "
          f"{result.iterations} iterations, converged={'yes' if result.converged else 'no'}")
    return 0


def cmd_sweep(args) -> int:
    corpus = load_dataset(args.dataset, args.format)
    grid = load_grid(args.grid) if args.grid is not None else DEFAULT_GRID
    step = max(1, grid.size // 100)

    def progress(done, total):
        if done % step == 0 or done == total:
            log.info("sweep: %d/%d configs", done, total)

    table = run_sweep(grid, corpus, args.out, workers=args.workers, resume=args.resume,
                      progress=progress)
    failed = len(table.failed)
    print(f"{len(table)} configs written to {args.out} ({failed} failed)")
    return 0 if failed == 0 else 1


def cmd_report(args) -> int:
    table = ResultTable.read_csv(args.results)
    agg = aggregate_by_parameter(table, args.by)
    if agg.excluded_failed:
        print(f"predcode report: {agg.excluded_failed} failed rows excluded", file=sys.stderr)
    rows = [[agg.dimension, "n_rows"] + metric_columns(agg.recall_targets)]
    for row in agg.rows:
        rows.append([row.value, row.n_rows] + [repr(v) for v in row.percent_reviewed]
                    + [repr(v) for v in row.precision] + [repr(row.avg_percent_reviewed)])
    _emit_rows(rows, args.out, _derived_manifest("report", args.results, by=agg.dimension))
    return 0


def cmd_extremes(args) -> int:
    table = ResultTable.read_csv(args.results)
    best, worst = extreme_combinations(table, args.recall)
    _emit_rows(extremes_rows(best, worst, args.recall), args.out,
               _derived_manifest("extremes", args.results, recall=args.recall))
    return 0


def cmd_plot_data(args) -> int:
    table = ResultTable.read_csv(args.results)
    dimension = FIGURES[args.figure]
    if dimension is None:
        best, worst = extreme_combinations(table, args.recall)
        rows = [["figure", "series", "recall", "percent_reviewed", "precision"]]
        for name, res in (("strongest", best), ("weakest", worst)):
            for r, pr, prec in zip(table.recall_targets, res.percent_reviewed, res.precision):
                rows.append([6, name, repr(r), repr(pr), repr(prec)])
    else:
        agg = aggregate_by_parameter(table, dimension)
        rows = [["figure", "series", "recall", "percent_reviewed", "precision"]]
        for row in agg.rows:
            for r, pr, prec in zip(agg.recall_targets, row.percent_reviewed, row.precision):
                rows.append([args.figure, row.value, repr(r), repr(pr), repr(prec)])
            rows.append([args.figure, row.value, "average", repr(row.avg_percent_reviewed), ""])
    _emit_rows(rows, args.out, _derived_manifest("plot-data", args.results, figure=args.figure,
                                                 recall=args.recall))
    return 0


def cmd_synth(args) -> int:
    if args.kind == "planted":
        corpus = planted_corpus(n_docs=args.docs, prevalence=args.prevalence, seed=args.seed)
    else:
        corpus = project_corpus(project=args.project, seed=args.seed)
    write_dataset(corpus, args.out)
    print(f"wrote {len(corpus)} documents to {args.out}")
    return 0


def cmd_grid(args) -> int:
    sys.stdout.write(format_grid(DEFAULT_GRID))
    return 0


COMMANDS = {
    "stats": cmd_stats, "run": cmd_run, "sweep": cmd_sweep, "report": cmd_report,
    "extremes": cmd_extremes, "plot-data": cmd_plot_data, "synth": cmd_synth, "grid": cmd_grid,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (DatasetError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"predcode {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
