"""Canonical text records, platform datasets, statistics and stratified sampling."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

TEEN_AGE_LIMIT = 20
PLATFORMS = ("blogger", "youtube", "myspace", "pan13")
FORMATS = ("jsonl", "csv")


class CorpusError(ValueError):
    """Raised for malformed rows, invalid datasets and bad sampling requests."""


def validate_platform(platform: str) -> str:
    if platform in PLATFORMS:
        return platform
    if platform.startswith("synthetic:") and len(platform) > len("synthetic:"):
        return platform
    raise CorpusError(f"unknown platform {platform!r}; expected one of {PLATFORMS} or 'synthetic:<name>'")


def normalize_whitespace(text: str) -> str:
    return " ".join(text.split())


def tokenize(text: str) -> list[str]:
    """Whitespace tokens; the unit for every length statistic."""
    return text.split()


def map_age_to_label(age: int) -> int:
    """1 (teenager) for ages below 20, else 0 (adult)."""
    if isinstance(age, bool) or int(age) != age:
        raise CorpusError(f"age must be an integer, got {age!r}")
    if age < 0:
        raise CorpusError(f"age must be non-negative, got {age}")
    return 1 if age < TEEN_AGE_LIMIT else 0


@dataclass(frozen=True)
class TextRecord:
    id: str
    platform: str
    text: str
    label: int
    age: Optional[int] = None

    def __post_init__(self):
        validate_platform(self.platform)
        if not normalize_whitespace(self.text):
            raise CorpusError(f"record {self.id!r}: empty text")
        if self.label not in (0, 1):
            raise CorpusError(f"record {self.id!r}: label must be 0 or 1, got {self.label!r}")
        if self.age is not None and map_age_to_label(self.age) != self.label:
            raise CorpusError(f"record {self.id!r}: label {self.label} contradicts age {self.age}")

    def to_json(self) -> dict:
        out = {"id": self.id, "text": self.text}
        if self.age is not None:
            out["age"] = self.age
        out["label"] = self.label
        return out


@dataclass(frozen=True)
class PlatformDataset:
    platform: str
    records: tuple[TextRecord, ...]
    provenance: str = ""

    def __post_init__(self):
        validate_platform(self.platform)
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for rec in self.records:
            if rec.platform != self.platform:
                raise CorpusError(
                    f"record {rec.id!r} has platform {rec.platform!r}, dataset is {self.platform!r}"
                )
            if rec.id in seen:
                raise CorpusError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def texts(self) -> list[str]:
        return [r.text for r in self.records]

    @property
    def labels(self) -> list[int]:
        return [r.label for r in self.records]

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def subset(self, indices: Iterable[int], provenance: Optional[str] = None) -> "PlatformDataset":
        recs = [self.records[i] for i in indices]
        return PlatformDataset(self.platform, tuple(recs), provenance or self.provenance)

    def with_texts(self, texts: Sequence[str]) -> "PlatformDataset":
        if len(texts) != len(self.records):
            raise CorpusError("text count does not match record count")
        recs = tuple(replace(r, text=t) for r, t in zip(self.records, texts))
        return PlatformDataset(self.platform, recs, self.provenance)


@dataclass(frozen=True)
class DatasetStats:
    size: int
    avg_length: float
    teenager_ratio: float
    year: Optional[int] = None

    def __post_init__(self):
        if self.size < 1:
            raise CorpusError("stats require size >= 1")
        if not 0.0 <= self.teenager_ratio <= 1.0:
            raise CorpusError(f"teenager_ratio out of range: {self.teenager_ratio}")

    def to_json(self) -> dict:
        out = {"size": self.size, "avg_length": self.avg_length, "teenager_ratio": self.teenager_ratio}
        if self.year is not None:
            out["year"] = self.year
        return out


def _parse_optional_int(value, what: str, row: int):
    if value is None or value == "":
        return None
    try:
        as_float = float(value)
    except (TypeError, ValueError):
        raise CorpusError(f"row {row}: {what} is not a number: {value!r}") from None
    if not as_float.is_integer():
        raise CorpusError(f"row {row}: {what} must be an integer, got {value!r}")
    return int(as_float)


def _record_from_row(row: dict, index: int, platform: str) -> TextRecord:
    if not isinstance(row, dict):
        raise CorpusError(f"row {index}: expected an object, got {type(row).__name__}")
    text = row.get("text")
    if not isinstance(text, str) or not normalize_whitespace(text):
        raise CorpusError(f"row {index}: missing or empty text")
    age = _parse_optional_int(row.get("age"), "age", index)
    label = _parse_optional_int(row.get("label"), "label", index)
    if age is None and label is None:
        raise CorpusError(f"row {index}: row provides neither age nor label")
    if age is not None:
        if age < 0:
            raise CorpusError(f"row {index}: negative age {age}")
        derived = map_age_to_label(age)
        if label is not None and label != derived:
            raise CorpusError(f"row {index}: label {label} contradicts age {age}")
        label = derived
    if label not in (0, 1):
        raise CorpusError(f"row {index}: label must be 0 or 1, got {label}")
    rid = row.get("id")
    rid = str(index) if rid is None or rid == "" else str(rid)
    return TextRecord(id=rid, platform=platform, text=normalize_whitespace(text), label=label, age=age)


def load_dataset(path, format: str = "jsonl", platform: str = "synthetic:unnamed") -> PlatformDataset:
    """Read a JSONL or CSV file into a canonical dataset.

    Each row needs ``text`` and at least one of ``age`` / ``label``; when both are
    present they must agree. Row indices in error messages are 0-based data rows.
    """
    path = Path(path)
    platform = validate_platform(platform)
    if format not in FORMATS:
        raise CorpusError(f"unknown format {format!r}; expected one of {FORMATS}")
    if not path.is_file():
        raise CorpusError(f"dataset file not found: {path}")

    rows: list[tuple[int, dict]] = []
    with path.open(encoding="utf-8", newline="") as fh:
        if format == "jsonl":
            index = 0
            for line in fh:
                if not line.strip():
                    continue
                try:
                    rows.append((index, json.loads(line)))
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"row {index}: invalid JSON ({exc.msg})") from None
                index += 1
        else:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "text" not in reader.fieldnames:
                raise CorpusError(f"{path}: CSV header must include a 'text' column")
            rows.extend(enumerate(reader))

    records = [_record_from_row(row, i, platform) for i, row in rows]
    if not records:
        raise CorpusError(f"{path}: empty dataset")
    return PlatformDataset(platform, tuple(records), f"{path}:{format}")


def write_jsonl(dataset: PlatformDataset, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in dataset.records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def dataset_stats(dataset: PlatformDataset, year: Optional[int] = None) -> DatasetStats:
    n = len(dataset)
    if n == 0:
        raise CorpusError("cannot compute stats of an empty dataset")
    total_tokens = sum(len(tokenize(r.text)) for r in dataset.records)
    teens = sum(r.label for r in dataset.records)
    return DatasetStats(size=n, avg_length=total_tokens / n, teenager_ratio=teens / n, year=year)


def _class_indices(dataset: PlatformDataset) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {0: [], 1: []}
    for i, rec in enumerate(dataset.records):
        out[rec.label].append(i)
    return out


def _allocate(total: int, class_sizes: dict[int, int]) -> dict[int, int]:
    """Largest-remainder apportionment of ``total`` over classes by size."""
    size = sum(class_sizes.values())
    quotas = {c: total * s / size for c, s in class_sizes.items()}
    counts = {c: math.floor(q) for c, q in quotas.items()}
    leftover = total - sum(counts.values())
    # remainder desc, then class asc
    order = sorted(class_sizes, key=lambda c: (-(quotas[c] - counts[c]), c))
    for c in order[:leftover]:
        counts[c] += 1
    return counts


def stratified_sample(dataset: PlatformDataset, n: int, seed: int) -> PlatformDataset:
    """Draw ``n`` records keeping the class ratio, reproducible from ``seed``."""
    if n < 1:
        raise CorpusError(f"sample size must be positive, got {n}")
    if n > len(dataset):
        raise CorpusError(f"sample size {n} exceeds dataset size {len(dataset)}")
    by_class = _class_indices(dataset)
    sizes = {c: len(ix) for c, ix in by_class.items() if ix}
    if n >= 2 and len(sizes) < 2:
        raise CorpusError("stratified sampling needs both classes present")
    counts = _allocate(n, sizes)

    rng = np.random.default_rng(seed)
    chosen: list[int] = []
    for c in sorted(sizes):
        pool = np.asarray(by_class[c])
        chosen.extend(int(i) for i in rng.permutation(pool)[: counts[c]])
    order = rng.permutation(len(chosen))
    return dataset.subset([chosen[i] for i in order], f"{dataset.provenance}|sample(n={n},seed={seed})")


def train_test_split(
    dataset: PlatformDataset, test_fraction: float = 0.2, seed: int = 0
) -> tuple[PlatformDataset, PlatformDataset]:
    """Stratified, disjoint split; each side keeps the input order."""
    if not 0.0 < test_fraction < 1.0:
        raise CorpusError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = len(dataset)
    n_test = math.floor(n * test_fraction + 0.5)
    if n_test < 1 or n_test >= n:
        raise CorpusError(f"test_fraction {test_fraction} leaves an empty split for {n} records")
    by_class = _class_indices(dataset)
    sizes = {c: len(ix) for c, ix in by_class.items() if ix}
    counts = _allocate(n_test, sizes)

    rng = np.random.default_rng(seed)
    test_idx: set[int] = set()
    for c in sorted(sizes):
        pool = np.asarray(by_class[c])
        test_idx.update(int(i) for i in rng.permutation(pool)[: counts[c]])
    train = [i for i in range(n) if i not in test_idx]
    test = [i for i in range(n) if i in test_idx]
    tag = f"split(frac={test_fraction},seed={seed})"
    return (
        dataset.subset(train, f"{dataset.provenance}|{tag}:train"),
        dataset.subset(test, f"{dataset.provenance}|{tag}:test"),
    )
