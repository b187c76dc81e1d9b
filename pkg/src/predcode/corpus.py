"""Labeled document collections: loading, validation and class statistics."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

RELEVANT = "relevant"
NOT_RELEVANT = "not_relevant"
LABELS = (RELEVANT, NOT_RELEVANT)

TRAINING = "training"
VALIDATION = "validation"
SPLITS = (TRAINING, VALIDATION)

FIELDS = ("id", "text", "label", "split")


class DatasetError(ValueError):
    """Raised for unreadable or invalid dataset files."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    label: str
    split: str

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise DatasetError("document id must be a non-empty string", field="id")
        if self.label not in LABELS:
            raise DatasetError(f"unknown label {self.label!r}", field="label")
        if self.split not in SPLITS:
            raise DatasetError(f"unknown split {self.split!r}", field="split")

    @property
    def relevant(self) -> bool:
        return self.label == RELEVANT


@dataclass(frozen=True)
class ClassDistribution:
    training_relevant: int = 0
    training_not_relevant: int = 0
    validation_relevant: int = 0
    validation_not_relevant: int = 0

    @property
    def total(self) -> int:
        return (self.training_relevant + self.training_not_relevant
                + self.validation_relevant + self.validation_not_relevant)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.training_relevant, self.training_not_relevant,
                self.validation_relevant, self.validation_not_relevant)


class Corpus:
    """An immutable, ordered collection of documents with unique ids."""

    def __init__(self, documents: Iterable[Document], name: str = "corpus"):
        docs = tuple(documents)
        seen = set()
        for doc in docs:
            if doc.id in seen:
                raise DatasetError(f"duplicate id {doc.id!r}", field="id")
            seen.add(doc.id)
        self._documents = docs
        self.name = name

    @property
    def documents(self) -> tuple[Document, ...]:
        return self._documents

    def __len__(self) -> int:
        return len(self._documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._documents)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return self.name == other.name and self._documents == other._documents

    def __hash__(self):
        return hash((self.name, self._documents))

    def __repr__(self):
        return f"Corpus(name={self.name!r}, size={len(self)})"

    def training(self) -> list[Document]:
        return [d for d in self._documents if d.split == TRAINING]

    def validation(self) -> list[Document]:
        return [d for d in self._documents if d.split == VALIDATION]

    def check_trainable(self) -> None:
        """Raise unless the training split holds both labels."""
        labels = {d.label for d in self.training()}
        missing = [lab for lab in LABELS if lab not in labels]
        if missing:
            raise DatasetError(
                f"training split has no {' or '.join(missing)} documents")

    def checksum(self) -> str:
        """SHA-256 over the canonical JSONL serialization; independent of source format."""
        h = hashlib.sha256()
        for doc in self._documents:
            h.update(_record_line(doc).encode("utf-8"))
        return h.hexdigest()


def _record_line(doc: Document) -> str:
    rec = {"id": doc.id, "text": doc.text, "label": doc.label, "split": doc.split}
    return json.dumps(rec, ensure_ascii=False, sort_keys=False) + "\n"


def _make_document(rec, line: int) -> Document:
    if not isinstance(rec, dict):
        raise DatasetError("record is not an object", line=line)
    for field in FIELDS:
        if field not in rec or rec[field] is None:
            raise DatasetError("missing field", line=line, field=field)
        if not isinstance(rec[field], str):
            raise DatasetError(f"expected a string, got {type(rec[field]).__name__}",
                               line=line, field=field)
    if not rec["id"]:
        raise DatasetError("empty id", line=line, field="id")
    if rec["label"] not in LABELS:
        raise DatasetError(f"unknown label {rec['label']!r} (expected one of {', '.join(LABELS)})",
                           line=line, field="label")
    if rec["split"] not in SPLITS:
        raise DatasetError(f"unknown split {rec['split']!r} (expected one of {', '.join(SPLITS)})",
                           line=line, field="split")
    return Document(rec["id"], rec["text"], rec["label"], rec["split"])


def _read_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                yield lineno, json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"malformed JSON ({exc.msg})", line=lineno) from None


def _read_csv(path: Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return
        missing = [f for f in FIELDS if f not in reader.fieldnames]
        if missing:
            raise DatasetError(f"header lacks column(s) {', '.join(missing)}", line=1)
        try:
            for rec in reader:
                if None in rec:
                    raise DatasetError("too many columns", line=reader.line_num)
                yield reader.line_num, rec
        except csv.Error as exc:
            raise DatasetError(f"malformed CSV ({exc})", line=reader.line_num) from None


def load_dataset(path, format: str | None = None, name: str | None = None) -> Corpus:
    """Load a corpus from a JSONL or CSV file, preserving file order.

    ``format`` defaults to the file extension (``.csv`` means CSV, anything
    else JSONL). Errors carry the offending line number.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such dataset file: {path}")
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if format not in ("jsonl", "csv"):
        raise DatasetError(f"unsupported format {format!r}")
    reader = _read_csv if format == "csv" else _read_jsonl

    docs = []
    seen: dict[str, int] = {}
    for lineno, rec in reader(path):
        doc = _make_document(rec, lineno)
        if doc.id in seen:
            raise DatasetError(f"duplicate id {doc.id!r} (first seen on line {seen[doc.id]})",
                               line=lineno, field="id")
        seen[doc.id] = lineno
        docs.append(doc)
    return Corpus(docs, name=name or path.stem)


def write_dataset(corpus: Corpus | Iterable[Document], path, format: str | None = None) -> None:
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    docs = list(corpus)
    if format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, quoting=csv.QUOTE_NONNUMERIC)
            writer.writerow(FIELDS)
            for d in docs:
                writer.writerow([d.id, d.text, d.label, d.split])
    else:
        with open(path, "w", encoding="utf-8") as fh:
            for d in docs:
                fh.write(_record_line(d))


def dataset_stats(corpus: Corpus | Iterable[Document]) -> ClassDistribution:
    counts = {(s, l): 0 for s in SPLITS for l in LABELS}
    for doc in corpus:
        counts[doc.split, doc.label] += 1
    return ClassDistribution(
        training_relevant=counts[TRAINING, RELEVANT],
        training_not_relevant=counts[TRAINING, NOT_RELEVANT],
        validation_relevant=counts[VALIDATION, RELEVANT],
        validation_not_relevant=counts[VALIDATION, NOT_RELEVANT],
    )
