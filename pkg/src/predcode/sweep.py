"""Parameter grids, end-to-end experiments, resumable sweeps and result aggregation."""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import math
import os
import time
from collections import Counter, OrderedDict
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .corpus import Corpus
from .evaluation import (DEFAULT_RECALL_TARGETS, build_curve, check_recall_targets,
                         percent_reviewed_at_recall, precision_at_recall)
from .features import (TokenValueType, build_vocabulary, count_matrix,
                       information_gain_array, rank_tokens, ReducedVocabulary, weight_matrix)
from .learners import DEFAULT_C, DEFAULT_MAX_ITER, AlgorithmChoice, default_tol, train
from .sampling import SamplingSpec, down_sample_mask
from .textprep import ngrams, stem, tokenize

log = logging.getLogger(__name__)

DIMENSIONS = ("stemming", "ngrams", "value_type", "tokens", "sampling", "algorithm")

_DIMENSION_ALIASES = {
    "word_stemming": "stemming", "stem": "stemming",
    "n_grams": "ngrams", "ngram": "ngrams", "ngram_orders": "ngrams", "n": "ngrams",
    "token_value_type": "value_type", "value_types": "value_type", "value-type": "value_type",
    "number_of_tokens": "tokens", "token_counts": "tokens", "k": "tokens",
    "down_sampling": "sampling", "sampling_percentages": "sampling",
    "algorithms": "algorithm", "learner": "algorithm",
}

_VALUE_TYPE_ORDER = tuple(TokenValueType)
_ALGORITHM_ORDER = (AlgorithmChoice.SVM, AlgorithmChoice.LOGISTIC_REGRESSION)


def parse_dimension(name: str) -> str:
    key = name.strip().lower().replace("-", "_").replace(" ", "_")
    key = _DIMENSION_ALIASES.get(key, key)
    if key not in DIMENSIONS:
        raise ValueError(f"unknown dimension {name!r} (expected one of {', '.join(DIMENSIONS)})")
    return key


def _fmt_num(x) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def _fmt_float(x) -> str:
    return "" if x is None else repr(float(x))


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    key = str(value).strip().lower()
    if key in ("yes", "true", "1", "y", "on"):
        return True
    if key in ("no", "false", "0", "n", "off"):
        return False
    raise ValueError(f"expected yes/no, got {value!r}")


def _canonical_value_key(dimension: str, value):
    # published order: stemming Yes before No, SVM before LR
    if dimension == "stemming":
        return 0 if value else 1
    if dimension == "value_type":
        return _VALUE_TYPE_ORDER.index(value)
    if dimension == "algorithm":
        return _ALGORITHM_ORDER.index(value)
    return float(value)


def _sorted_unique(dimension: str, values) -> tuple:
    out = []
    for v in values:
        if v not in out:
            out.append(v)
    return tuple(sorted(out, key=lambda v: _canonical_value_key(dimension, v)))


def _positive_int(value, name: str) -> int:
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name}: expected a positive integer, got {value!r}") from None
    if not f.is_integer() or f < 1:
        raise ValueError(f"{name}: expected a positive integer, got {value!r}")
    return int(f)


def _percentage(value) -> float:
    p = float(value)
    if not 0 < p <= 100:
        raise ValueError(f"sampling: percentage must be in (0, 100], got {value!r}")
    return p


@dataclass(frozen=True)
class ParameterGrid:
    stemming: tuple = (True, False)
    ngram_orders: tuple = (1, 2, 3, 4)
    value_types: tuple = tuple(TokenValueType)
    token_counts: tuple = (1000, 3000, 5000, 7000, 10000, 15000, 20000, 25000,
                           30000, 35000, 40000, 45000, 50000)
    sampling_percentages: tuple = (25, 50, 75, 100)
    algorithms: tuple = _ALGORITHM_ORDER
    seed: int = 0
    C: float = DEFAULT_C
    tol: float | None = None
    max_iterations: int = DEFAULT_MAX_ITER
    recall_targets: tuple = DEFAULT_RECALL_TARGETS

    def __post_init__(self):
        norm = {
            "stemming": _sorted_unique("stemming", (_parse_bool(v) for v in self.stemming)),
            "ngram_orders": _sorted_unique("ngrams", (_positive_int(v, "ngrams") for v in self.ngram_orders)),
            "value_types": _sorted_unique("value_type", (TokenValueType.parse(v) for v in self.value_types)),
            "token_counts": _sorted_unique("tokens", (_positive_int(v, "tokens") for v in self.token_counts)),
            "sampling_percentages": _sorted_unique("sampling", (_percentage(v) for v in self.sampling_percentages)),
            "algorithms": _sorted_unique("algorithm", (AlgorithmChoice.parse(v) for v in self.algorithms)),
            "recall_targets": check_recall_targets(self.recall_targets),
        }
        for name, values in norm.items():
            if not values:
                raise ValueError(f"grid dimension {name!r} is empty")
            object.__setattr__(self, name, values)
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if self.tol is not None and not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        SamplingSpec(100, self.seed)  # seed validation

    @property
    def size(self) -> int:
        return (len(self.stemming) * len(self.ngram_orders) * len(self.value_types)
                * len(self.token_counts) * len(self.sampling_percentages) * len(self.algorithms))

    def to_dict(self) -> dict:
        return {
            "stemming": ["yes" if s else "no" for s in self.stemming],
            "ngrams": list(self.ngram_orders),
            "value_types": [v.value for v in self.value_types],
            "tokens": list(self.token_counts),
            "sampling": [_fmt_num(p) for p in self.sampling_percentages],
            "algorithms": [a.value for a in self.algorithms],
            "seed": self.seed,
            "c": self.C,
            "tol": self.tol,
            "max_iterations": self.max_iterations,
            "recall_targets": list(self.recall_targets),
        }


DEFAULT_GRID = ParameterGrid()


@dataclass(frozen=True)
class ExperimentConfig:
    stemming: bool
    ngrams: int
    value_type: TokenValueType
    tokens: int
    sampling: float
    algorithm: AlgorithmChoice
    seed: int = 0
    C: float = DEFAULT_C
    tol: float | None = None
    max_iterations: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        object.__setattr__(self, "stemming", _parse_bool(self.stemming))
        object.__setattr__(self, "ngrams", _positive_int(self.ngrams, "ngrams"))
        object.__setattr__(self, "value_type", TokenValueType.parse(self.value_type))
        object.__setattr__(self, "tokens", _positive_int(self.tokens, "tokens"))
        object.__setattr__(self, "sampling", _percentage(self.sampling))
        object.__setattr__(self, "algorithm", AlgorithmChoice.parse(self.algorithm))
        object.__setattr__(self, "C", float(self.C))
        if self.tol is None:
            object.__setattr__(self, "tol", default_tol(self.algorithm))
        object.__setattr__(self, "tol", float(self.tol))
        SamplingSpec(self.sampling, self.seed)

    def to_row(self) -> dict:
        return {
            "stemming": "yes" if self.stemming else "no",
            "ngrams": str(self.ngrams),
            "value_type": self.value_type.value,
            "tokens": str(self.tokens),
            "sampling": _fmt_num(self.sampling),
            "algorithm": self.algorithm.value,
            "seed": str(self.seed),
            "C": repr(self.C),
            "tol": repr(self.tol),
            "max_iterations": str(self.max_iterations),
        }

    @classmethod
    def from_row(cls, row: dict) -> "ExperimentConfig":
        return cls(stemming=row["stemming"], ngrams=row["ngrams"], value_type=row["value_type"],
                   tokens=row["tokens"], sampling=row["sampling"], algorithm=row["algorithm"],
                   seed=int(row["seed"]), C=float(row["C"]), tol=float(row["tol"]),
                   max_iterations=int(row["max_iterations"]))

    def key(self) -> tuple:
        return tuple(self.to_row().values())

    def canonical_key(self) -> tuple:
        return tuple(_canonical_value_key(d, self.value(d)) for d in DIMENSIONS) + (
            self.seed, self.C, self.tol, self.max_iterations)

    def value(self, dimension: str):
        return getattr(self, parse_dimension(dimension))

    def describe(self) -> str:
        return ", ".join(f"{k}={v}" for k, v in self.to_row().items())


CONFIG_FIELDS = tuple(ExperimentConfig.__dataclass_fields__)


def enumerate_grid(grid: ParameterGrid) -> list[ExperimentConfig]:
    """Full cross-product, nested in canonical dimension order (last dimension fastest)."""
    configs = []
    for stemming, n, vt, k, p, alg in itertools.product(
            grid.stemming, grid.ngram_orders, grid.value_types, grid.token_counts,
            grid.sampling_percentages, grid.algorithms):
        configs.append(ExperimentConfig(
            stemming=stemming, ngrams=n, value_type=vt, tokens=k, sampling=p, algorithm=alg,
            seed=grid.seed, C=grid.C,
            tol=grid.tol if grid.tol is not None else default_tol(alg),
            max_iterations=grid.max_iterations))
    return configs


# results

def _target_label(r: float) -> str:
    return _fmt_num(round(r * 100, 10))


def metric_columns(targets: Sequence[float]) -> list[str]:
    cols = [f"percent_reviewed_at_{_target_label(r)}" for r in targets]
    cols += [f"precision_at_{_target_label(r)}" for r in targets]
    return cols + ["avg_percent_reviewed"]


DIAGNOSTIC_COLUMNS = ("vocabulary_size", "selected_tokens", "training_size", "training_relevant",
                      "converged", "iterations", "objective", "optimality", "error")


def result_columns(targets: Sequence[float]) -> list[str]:
    config_cols = list(ExperimentConfig(True, 1, "binary", 1, 100, "svm").to_row())
    return config_cols + metric_columns(targets) + list(DIAGNOSTIC_COLUMNS)


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    recall_targets: tuple
    percent_reviewed: tuple | None = None
    precision: tuple | None = None
    avg_percent_reviewed: float | None = None
    vocabulary_size: int | None = None
    selected_tokens: int | None = None
    training_size: int | None = None
    training_relevant: int | None = None
    converged: bool | None = None
    iterations: int | None = None
    objective: float | None = None
    optimality: float | None = None
    error: str = ""
    # excluded from equality and from the result CSV; see the timing sidecar
    wall_time: float = field(default=0.0, compare=False)

    @property
    def failed(self) -> bool:
        return bool(self.error)

    def percent_reviewed_at(self, r: float) -> float:
        return self.percent_reviewed[self._target_index(r)]

    def precision_at(self, r: float) -> float:
        return self.precision[self._target_index(r)]

    def _target_index(self, r: float) -> int:
        for i, t in enumerate(self.recall_targets):
            if math.isclose(t, r, rel_tol=0, abs_tol=1e-12):
                return i
        raise KeyError(f"recall {r} is not one of the configured targets {self.recall_targets}")

    def to_row(self) -> dict:
        row = self.config.to_row()
        cols = metric_columns(self.recall_targets)
        nt = len(self.recall_targets)
        vals = (list(self.percent_reviewed) + list(self.precision) + [self.avg_percent_reviewed]
                if not self.failed else [None] * (2 * nt + 1))
        row.update({c: _fmt_float(v) for c, v in zip(cols, vals)})

        def opt(v, fmt=str):
            return "" if v is None else fmt(v)

        row.update({
            "vocabulary_size": opt(self.vocabulary_size),
            "selected_tokens": opt(self.selected_tokens),
            "training_size": opt(self.training_size),
            "training_relevant": opt(self.training_relevant),
            "converged": opt(self.converged, lambda b: "yes" if b else "no"),
            "iterations": opt(self.iterations),
            "objective": _fmt_float(self.objective),
            "optimality": _fmt_float(self.optimality),
            "error": self.error.replace("\n", " "),
        })
        return row

    @classmethod
    def from_row(cls, row: dict, targets: Sequence[float]) -> "ExperimentResult":
        config = ExperimentConfig.from_row(row)

        def num(key, conv=float):
            v = row.get(key, "")
            return None if v == "" else conv(v)

        error = row.get("error", "")
        nt = len(targets)
        cols = metric_columns(targets)
        pr = prec = avg = None
        if not error:
            pr = tuple(float(row[c]) for c in cols[:nt])
            prec = tuple(float(row[c]) for c in cols[nt:2 * nt])
            avg = float(row[cols[-1]])
        conv = row.get("converged", "")
        return cls(config=config, recall_targets=tuple(targets), percent_reviewed=pr,
                   precision=prec, avg_percent_reviewed=avg,
                   vocabulary_size=num("vocabulary_size", int),
                   selected_tokens=num("selected_tokens", int),
                   training_size=num("training_size", int),
                   training_relevant=num("training_relevant", int),
                   converged=None if conv == "" else conv == "yes",
                   iterations=num("iterations", int), objective=num("objective"),
                   optimality=num("optimality"), error=error)


class ResultTable:
    """Experiment results sharing one set of recall targets, kept in canonical config order."""

    def __init__(self, results: Iterable[ExperimentResult], recall_targets=DEFAULT_RECALL_TARGETS):
        self.recall_targets = check_recall_targets(recall_targets)
        self.results = sorted(results, key=lambda r: r.config.canonical_key())
        for r in self.results:
            if tuple(r.recall_targets) != self.recall_targets:
                raise ValueError("all results must share the table's recall targets")

    def __len__(self):
        return len(self.results)

    def __iter__(self):
        return iter(self.results)

    def __eq__(self, other):
        if not isinstance(other, ResultTable):
            return NotImplemented
        return self.recall_targets == other.recall_targets and self.results == other.results

    @property
    def succeeded(self) -> list[ExperimentResult]:
        return [r for r in self.results if not r.failed]

    @property
    def failed(self) -> list[ExperimentResult]:
        return [r for r in self.results if r.failed]

    def write_csv(self, path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=result_columns(self.recall_targets),
                                    lineterminator="\n")
            writer.writeheader()
            for r in self.results:
                writer.writerow(r.to_row())
        os.replace(tmp, path)

    @classmethod
    def read_csv(cls, path) -> "ResultTable":
        targets, rows = _read_result_rows(path)
        return cls([ExperimentResult.from_row(row, targets) for row in rows], targets)


def _targets_from_header(header: Sequence[str]) -> tuple[float, ...]:
    prefix = "percent_reviewed_at_"
    targets = tuple(float(h[len(prefix):]) / 100 for h in header if h.startswith(prefix))
    return check_recall_targets(targets)


def _read_result_rows(path) -> tuple[tuple[float, ...], list[dict]]:
    """Rows of a (possibly truncated) result CSV; incomplete trailing rows are dropped."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty result file")
        targets = _targets_from_header(header)
        if header != result_columns(targets):
            raise ValueError(f"{path}: unexpected result columns")
        rows = []
        for values in reader:
            if len(values) != len(header):
                continue
            rows.append(dict(zip(header, values)))
    return targets, rows


# experiment pipeline

class ExperimentError(RuntimeError):
    def __init__(self, config: ExperimentConfig, cause: BaseException):
        self.config = config
        self.cause = cause
        super().__init__(f"{type(cause).__name__}: {cause} [{config.describe()}]")


@dataclass(frozen=True, eq=False)
class _FeatureSet:
    vocabulary: object
    ig: np.ndarray
    order: np.ndarray
    train_counts: object
    val_counts: object


class PreparedCorpus:
    """A corpus plus caches for the stages shared across configurations.

    Tokenization is cached per stemming flag; vocabulary, information gain and
    count matrices per (stemming, n); weighted matrices for a few recent
    (stemming, n, K, value type) keys. Caching never changes results.
    """

    def __init__(self, corpus: Corpus, weighted_cache: int = 8):
        corpus.check_trainable()
        self.corpus = corpus
        self.train_docs = corpus.training()
        self.val_docs = corpus.validation()
        if not any(d.relevant for d in self.val_docs):
            raise ValueError("validation split has no relevant documents")
        self.train_positive = np.array([d.relevant for d in self.train_docs], dtype=bool)
        self.val_pairs = [(d.id, d.relevant) for d in self.val_docs]
        self.val_ids = [d.id for d in self.val_docs]
        self._tokens: dict = {}
        self._features: dict = {}
        self._weighted: OrderedDict = OrderedDict()
        self._weighted_cache = weighted_cache
        self._masks: dict = {}

    def tokens(self, stemming: bool):
        if False not in self._tokens:
            docs = itertools.chain(self.train_docs, self.val_docs)
            self._tokens[False] = [tokenize(d.text) for d in docs]
        if stemming and True not in self._tokens:
            self._tokens[True] = [stem(t, True) for t in self._tokens[False]]
        return self._tokens[bool(stemming)]

    def features(self, stemming: bool, n: int) -> _FeatureSet:
        key = (stemming, n)
        fs = self._features.get(key)
        if fs is None:
            toks = self.tokens(stemming)
            counters = [Counter(ngrams(t, n).tokens) for t in toks]
            n_train = len(self.train_docs)
            vocab = build_vocabulary(counters[:n_train], self.train_positive)
            ig = information_gain_array(vocab)
            fs = _FeatureSet(vocabulary=vocab, ig=ig, order=rank_tokens(vocab.tokens, ig),
                             train_counts=count_matrix(counters[:n_train], vocab),
                             val_counts=count_matrix(counters[n_train:], vocab))
            self._features[key] = fs
        return fs

    def reduced(self, stemming: bool, n: int, k: int) -> ReducedVocabulary:
        fs = self.features(stemming, n)
        vocab = fs.vocabulary
        idx = fs.order[:k]
        return ReducedVocabulary(tokens=tuple(vocab.tokens[i] for i in idx), scores=fs.ig[idx],
                                 source_index=idx, doc_freq=vocab.doc_freq[idx],
                                 n_docs=vocab.n_docs)

    def weighted(self, stemming: bool, n: int, k: int, value_type: TokenValueType):
        key = (stemming, n, k, value_type)
        hit = self._weighted.get(key)
        if hit is not None:
            self._weighted.move_to_end(key)
            return hit
        fs = self.features(stemming, n)
        reduced = self.reduced(stemming, n, k)
        hit = (weight_matrix(fs.train_counts, reduced, value_type),
               weight_matrix(fs.val_counts, reduced, value_type), reduced)
        self._weighted[key] = hit
        if len(self._weighted) > self._weighted_cache:
            self._weighted.popitem(last=False)
        return hit

    def sample_mask(self, percentage: float, seed: int) -> np.ndarray:
        key = (percentage, seed)
        if key not in self._masks:
            self._masks[key] = down_sample_mask(self.train_positive, SamplingSpec(percentage, seed))
        return self._masks[key]


def run_experiment(config: ExperimentConfig, corpus, recall_targets=DEFAULT_RECALL_TARGETS) -> ExperimentResult:
    """Run one configuration end to end.

    tokenize -> stem -> ngrams -> vocabulary -> information gain -> top K ->
    down sample -> vectorize -> train -> score validation -> curve -> metrics.
    ``corpus`` may be a Corpus or a PreparedCorpus (to share caches).
    Failures raise ExperimentError carrying the config.
    """
    start = time.perf_counter()
    try:
        targets = check_recall_targets(recall_targets)
        prep = corpus if isinstance(corpus, PreparedCorpus) else PreparedCorpus(corpus)
        fs = prep.features(config.stemming, config.ngrams)
        X_train, X_val, reduced = prep.weighted(config.stemming, config.ngrams, config.tokens,
                                                config.value_type)
        mask = prep.sample_mask(config.sampling, config.seed)
        y = np.where(prep.train_positive[mask], 1.0, -1.0)
        model = train(X_train[mask], y, config.algorithm, C=config.C, tol=config.tol,
                      max_iterations=config.max_iterations, n_features=len(reduced))
        val_scores = X_val @ model.weights + model.bias
        curve = build_curve(dict(zip(prep.val_ids, val_scores.tolist())), prep.val_pairs)
        pr = tuple(percent_reviewed_at_recall(curve, r) for r in targets)
        prec = tuple(precision_at_recall(curve, r) for r in targets)
    except Exception as exc:
        raise ExperimentError(config, exc) from exc
    diag = model.diagnostics
    return ExperimentResult(
        config=config, recall_targets=targets, percent_reviewed=pr, precision=prec,
        avg_percent_reviewed=sum(pr) / len(pr),
        vocabulary_size=len(fs.vocabulary), selected_tokens=len(reduced),
        training_size=int(mask.sum()), training_relevant=int(prep.train_positive[mask].sum()),
        converged=diag.converged, iterations=diag.iterations, objective=diag.objective,
        optimality=diag.optimality, wall_time=time.perf_counter() - start)


def _run_or_record(config, prep, targets) -> ExperimentResult:
    start = time.perf_counter()
    try:
        return run_experiment(config, prep, targets)
    except ExperimentError as exc:
        log.warning("experiment failed: %s", exc)
        return ExperimentResult(config=config, recall_targets=tuple(targets),
                                error=str(exc.cause) or type(exc.cause).__name__,
                                wall_time=time.perf_counter() - start)


# worker-process state: one PreparedCorpus per process
_WORKER: dict = {}


def _init_worker(corpus, targets):
    _WORKER["prep"] = PreparedCorpus(corpus)
    _WORKER["targets"] = targets


def _run_batch(configs):
    prep, targets = _WORKER["prep"], _WORKER["targets"]
    return [_run_or_record(c, prep, targets) for c in configs]


def _batches(configs: list[ExperimentConfig]) -> list[list[ExperimentConfig]]:
    """Group configs sharing a weighted feature matrix, keeping canonical order."""
    groups: OrderedDict = OrderedDict()
    for c in configs:
        groups.setdefault((c.stemming, c.ngrams, c.value_type, c.tokens), []).append(c)
    return list(groups.values())


def manifest_path(out_path) -> Path:
    out_path = Path(out_path)
    return out_path.with_name(out_path.name + ".manifest.json")


def timing_path(out_path) -> Path:
    out_path = Path(out_path)
    return out_path.with_name(out_path.name + ".timing.csv")


def build_manifest(grid: ParameterGrid, corpus: Corpus, result_file=None) -> dict:
    manifest = {
        "tool": "predcode",
        "version": __version__,
        "corpus": {"name": corpus.name, "documents": len(corpus), "sha256": corpus.checksum()},
        "grid": grid.to_dict(),
        "seed": grid.seed,
        "configs": grid.size,
    }
    if result_file is not None:
        result_file = Path(result_file)
        manifest["results"] = {"file": result_file.name,
                               "sha256": hashlib.sha256(result_file.read_bytes()).hexdigest()}
    return manifest


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def default_workers() -> int:
    env = os.environ.get("PREDCODE_WORKERS")
    if env:
        return max(1, int(env))
    return 1


def run_sweep(grid: ParameterGrid, corpus: Corpus, out_path=None, workers: int = 1,
              resume: bool = False,
              progress: Callable[[int, int], None] | None = None) -> ResultTable:
    """Run every configuration of ``grid`` once and return the full table.

    With ``out_path`` rows are appended as they finish (so a killed sweep can
    be resumed with ``resume=True``, skipping configs already on disk), and
    the file is rewritten in canonical order at the end together with a
    ``.manifest.json`` sidecar. Wall times go to a ``.timing.csv`` sidecar so
    the result file and manifest stay byte-reproducible.
    """
    targets = grid.recall_targets
    configs = enumerate_grid(grid)
    wanted = {c.key(): c for c in configs}
    done: dict = {}
    columns = result_columns(targets)

    if out_path is not None:
        out_path = Path(out_path)
        if resume and out_path.exists():
            file_targets, rows = _read_result_rows(out_path)
            if file_targets != targets:
                raise ValueError(f"{out_path}: recall targets differ from the grid's")
            for row in rows:
                res = ExperimentResult.from_row(row, targets)
                if res.config.key() in wanted:
                    done[res.config.key()] = res
            log.info("resuming: %d of %d configs already present", len(done), len(configs))
            # drop a torn trailing line before appending
            ResultTable(done.values(), targets).write_csv(out_path)
        else:
            with open(out_path, "w", encoding="utf-8", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerow(columns)
            timing_path(out_path).unlink(missing_ok=True)

    pending = [c for c in configs if c.key() not in done]
    total = len(configs)
    finished = len(done)
    out_fh = open(out_path, "a", encoding="utf-8", newline="") if out_path is not None else None
    timing_fh = open(timing_path(out_path), "a", encoding="utf-8", newline="") if out_path is not None else None
    writer = csv.DictWriter(out_fh, fieldnames=columns, lineterminator="\n") if out_fh else None

    def record(batch_results):
        nonlocal finished
        for res in batch_results:
            done[res.config.key()] = res
            if writer is not None:
                writer.writerow(res.to_row())
                timing_fh.write(f"{'|'.join(res.config.key())},{res.wall_time!r}\n")
        if out_fh is not None:
            out_fh.flush()
            timing_fh.flush()
        finished += len(batch_results)
        if progress is not None:
            progress(finished, total)

    try:
        batches = _batches(pending)
        if workers <= 1 or len(batches) <= 1:
            prep = PreparedCorpus(corpus) if batches else None
            for batch in batches:
                record([_run_or_record(c, prep, targets) for c in batch])
        else:
            with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                     initargs=(corpus, targets)) as pool:
                futures = [pool.submit(_run_batch, b) for b in batches]
                for fut in as_completed(futures):
                    record(fut.result())
    finally:
        if out_fh is not None:
            out_fh.close()
            timing_fh.close()

    table = ResultTable(done.values(), targets)
    if len(table) != total:
        raise RuntimeError(f"sweep produced {len(table)} rows for {total} configs")
    if out_path is not None:
        table.write_csv(out_path)
        write_manifest(manifest_path(out_path), build_manifest(grid, corpus, out_path))
    return table


# aggregation

@dataclass(frozen=True)
class AggregateRow:
    value: str
    n_rows: int
    avg_percent_reviewed: float
    percent_reviewed: tuple
    precision: tuple


@dataclass(frozen=True)
class Aggregate:
    dimension: str
    recall_targets: tuple
    rows: tuple
    excluded_failed: int

    def write_csv(self, path_or_fh) -> None:
        own = not hasattr(path_or_fh, "write")
        fh = open(path_or_fh, "w", encoding="utf-8", newline="") if own else path_or_fh
        try:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([self.dimension, "n_rows"] + metric_columns(self.recall_targets))
            for row in self.rows:
                writer.writerow([row.value, row.n_rows]
                                + [repr(v) for v in row.percent_reviewed]
                                + [repr(v) for v in row.precision]
                                + [repr(row.avg_percent_reviewed)])
        finally:
            if own:
                fh.close()


def _display_value(dimension: str, value) -> str:
    row = ExperimentConfig(True, 1, "binary", 1, 100, "svm")
    row = replace(row, **{dimension: value}).to_row()
    return row[dimension]


def aggregate_by_parameter(table: ResultTable, dimension: str) -> Aggregate:
    """Per-value means of the review metrics; failed rows are excluded and counted."""
    dimension = parse_dimension(dimension)
    groups: dict = {}
    for res in table.succeeded:
        groups.setdefault(res.config.value(dimension), []).append(res)
    rows = []
    for value in sorted(groups, key=lambda v: _canonical_value_key(dimension, v)):
        members = groups[value]
        n = len(members)
        pr = np.array([m.percent_reviewed for m in members])
        prec = np.array([m.precision for m in members])
        rows.append(AggregateRow(
            value=_display_value(dimension, value), n_rows=n,
            avg_percent_reviewed=math.fsum(m.avg_percent_reviewed for m in members) / n,
            percent_reviewed=tuple(math.fsum(pr[:, i]) / n for i in range(pr.shape[1])),
            precision=tuple(math.fsum(prec[:, i]) / n for i in range(prec.shape[1]))))
    return Aggregate(dimension=dimension, recall_targets=table.recall_targets, rows=tuple(rows),
                     excluded_failed=len(table.failed))


def extreme_combinations(table: ResultTable, r: float = 0.8) -> tuple[ExperimentResult, ExperimentResult]:
    """(best, worst) rows by percent reviewed at recall ``r``; ties go to canonical order."""
    candidates = table.succeeded
    if not candidates:
        raise ValueError("no successful experiments in the table")
    best = worst = candidates[0]
    for res in candidates[1:]:
        v = res.percent_reviewed_at(r)
        if v < best.percent_reviewed_at(r):
            best = res
        if v > worst.percent_reviewed_at(r):
            worst = res
    return best, worst


_EXTREME_ROWS = (
    ("Word Stemming", "stemming"),
    ("Number of Tokens", "tokens"),
    ("N-Grams", "ngrams"),
    ("Down Sampling", "sampling"),
    ("Token Value Type", "value_type"),
    ("Machine Learning Algorithm", "algorithm"),
)


def extremes_rows(best: ExperimentResult, worst: ExperimentResult, r: float) -> list[list[str]]:
    """Two-column strongest/weakest table in the layout of the published comparison."""
    pct = _target_label(r)
    rows = [["parameter", "strongest", "weakest"]]
    b, w = best.config.to_row(), worst.config.to_row()
    for label, dim in _EXTREME_ROWS:
        rows.append([label, b[dim], w[dim]])
    rows.append([f"Precision @ {pct}% Recall", f"{best.precision_at(r):.2f}",
                 f"{worst.precision_at(r):.2f}"])
    rows.append([f"Documents Requiring Review @ {pct}% Recall",
                 f"{best.percent_reviewed_at(r):.2f}", f"{worst.percent_reviewed_at(r):.2f}"])
    return rows


# grid files: one "key = v1, v2, ..." line per dimension

_GRID_KEYS = {
    "stemming": "stemming", "word_stemming": "stemming",
    "ngrams": "ngram_orders", "n_grams": "ngram_orders", "ngram_orders": "ngram_orders",
    "value_types": "value_types", "value_type": "value_types", "token_value_type": "value_types",
    "tokens": "token_counts", "number_of_tokens": "token_counts", "token_counts": "token_counts",
    "sampling": "sampling_percentages", "down_sampling": "sampling_percentages",
    "sampling_percentages": "sampling_percentages",
    "algorithms": "algorithms", "algorithm": "algorithms",
    "seed": "seed", "c": "C", "tol": "tol", "max_iterations": "max_iterations",
    "max_iter": "max_iterations", "recall_targets": "recall_targets",
}


def parse_grid_text(text: str) -> ParameterGrid:
    """Parse a grid file. Dimensions left out keep their default grid values."""
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"grid line {lineno}: expected 'key = values'")
        key, _, values = line.partition("=")
        key = key.strip().lower().replace("-", "_").replace(" ", "_")
        if key not in _GRID_KEYS:
            raise ValueError(f"grid line {lineno}: unknown key {key!r}")
        name = _GRID_KEYS[key]
        items = [v.strip().replace("%", "") for v in values.split(",") if v.strip()]
        if name in ("seed", "max_iterations"):
            kwargs[name] = int(items[0])
        elif name in ("C", "tol"):
            kwargs[name] = float(items[0])
        elif name == "recall_targets":
            kwargs[name] = tuple(float(v) for v in items)
        elif name == "token_counts":
            kwargs[name] = tuple(v.replace("_", "") for v in items)
        else:
            kwargs[name] = tuple(items)
    return ParameterGrid(**kwargs)


def load_grid(path) -> ParameterGrid:
    return parse_grid_text(Path(path).read_text(encoding="utf-8"))


def format_grid(grid: ParameterGrid) -> str:
    d = grid.to_dict()
    lines = [
        f"stemming = {', '.join(d['stemming'])}",
        f"ngrams = {', '.join(map(str, d['ngrams']))}",
        f"value_types = {', '.join(d['value_types'])}",
        f"tokens = {', '.join(map(str, d['tokens']))}",
        f"sampling = {', '.join(d['sampling'])}",
        f"algorithms = {', '.join(d['algorithms'])}",
        f"seed = {grid.seed}",
        f"c = {grid.C!r}",
        f"max_iterations = {grid.max_iterations}",
        f"recall_targets = {', '.join(repr(r) for r in grid.recall_targets)}",
    ]
    if grid.tol is not None:
        lines.append(f"tol = {grid.tol!r}")
    return "\n".join(lines) + "\n"
