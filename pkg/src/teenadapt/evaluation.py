"""Macro-F1, the C/S/A ablation variants and the experiment grids."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
import statistics
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import torch

from . import concentrator as conc
from .adaptation import AdaptationState, Hyperparams, adapt_target, discriminator_accuracy, predict_target, write_trace_csv
from .corpus import PlatformDataset, dataset_stats, stratified_sample, train_test_split
from .encoder import EncoderConfig, build_encoder, init_target_from_source, parameter_vector, save_encoder, train_source_encoder
from .heads import Classifier, Discriminator

log = logging.getLogger(__name__)

COMPONENTS = ("C", "S", "A")
ABBREV = {"blogger": "B", "youtube": "Y", "myspace": "M", "pan13": "P"}

CROSS_PAIRS = (
    ("blogger", "youtube"),
    ("blogger", "myspace"),
    ("blogger", "pan13"),
    ("youtube", "blogger"),
    ("youtube", "myspace"),
    ("youtube", "pan13"),
    ("myspace", "blogger"),
    ("myspace", "youtube"),
    ("myspace", "pan13"),
)
IN_PAIRS = (("blogger", "blogger"), ("youtube", "youtube"), ("myspace", "myspace"), ("pan13", "pan13"))
CROSS_VARIANTS = ("BASELINE", "AB_CSA", "AB_CS", "AB_S", "AB_C", "AB_A", "AB_CA", "AB_SA")
IN_VARIANTS = ("BASELINE", "AB_C", "AB_S", "AB_CS")

RESULT_FIELDS = (
    "source", "target", "variant", "seed", "macro_f1", "f1_class0", "f1_class1",
    "tp", "fp", "fn", "tn", "wall_secs",
)


class ExperimentError(RuntimeError):
    pass


# -- metrics -------------------------------------------------------------------


@dataclass(frozen=True)
class ClassReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: tuple[float, float]
    recall: tuple[float, float]
    f1: tuple[float, float]

    @property
    def macro_f1(self) -> float:
        return (self.f1[0] + self.f1[1]) / 2


def _check_labels(predictions, labels):
    if len(predictions) != len(labels):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(labels)} labels")
    if not labels:
        raise ValueError("empty input")
    for v in (*predictions, *labels):
        if v not in (0, 1):
            raise ValueError(f"labels must be 0 or 1, got {v!r}")


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def class_report(predictions: Sequence[int], labels: Sequence[int]) -> ClassReport:
    """Confusion counts (class 1 positive) and per-class P/R/F1 for classes 0 and 1."""
    predictions, labels = [int(v) for v in predictions], [int(v) for v in labels]
    _check_labels(predictions, labels)
    tp = sum(1 for p, y in zip(predictions, labels) if p == 1 and y == 1)
    fp = sum(1 for p, y in zip(predictions, labels) if p == 1 and y == 0)
    fn = sum(1 for p, y in zip(predictions, labels) if p == 0 and y == 1)
    tn = len(labels) - tp - fp - fn
    p1, r1, f1 = _prf(tp, fp, fn)
    p0, r0, f0 = _prf(tn, fn, fp)
    return ClassReport(tp, fp, fn, tn, (p0, p1), (r0, r1), (f0, f1))


def macro_f1(predictions: Sequence[int], labels: Sequence[int]) -> float:
    """Unweighted mean of the class-0 and class-1 F1 scores."""
    return class_report(predictions, labels).macro_f1


# -- variants ------------------------------------------------------------------


def variant_name(components, full_data: bool = False) -> str:
    comps = set(components)
    unknown = comps - set(COMPONENTS)
    if unknown:
        raise ValueError(f"unknown components {sorted(unknown)}")
    if not comps:
        return "BASELINE" if full_data else "AB_NONE"
    return "AB_" + "".join(c for c in COMPONENTS if c in comps)


def parse_variant(name: str) -> tuple[frozenset, bool]:
    """Variant name -> (components, uses full training data)."""
    if name == "BASELINE":
        return frozenset(), True
    if name == "AB_NONE":
        return frozenset(), False
    if not name.startswith("AB_") or len(name) == 3:
        raise ValueError(f"bad variant name {name!r}")
    letters = name[3:]
    comps = frozenset(letters)
    if not comps <= set(COMPONENTS) or len(comps) != len(letters) or variant_name(comps) != name:
        raise ValueError(f"bad variant name {name!r}; letters must be a subset of C,S,A in that order")
    return comps, False


def pair_label(source: str, target: str) -> str:
    return f"{ABBREV.get(source, source)}->{ABBREV.get(target, target)}"


# -- single experiment ---------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    source: str
    target: str
    components: frozenset = frozenset()
    n_train: Optional[int] = 700
    seed: int = 0
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    adapt_hyperparams: Optional[Hyperparams] = None
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    discriminator_hidden: int = 256
    lexicon_capacity: int = conc.DEFAULT_CAPACITY
    budget_floor: int = conc.BUDGET_FLOOR
    test_fraction: float = 0.2
    allow_pan13_source: bool = False

    def __post_init__(self):
        object.__setattr__(self, "components", frozenset(self.components))
        variant_name(self.components)

    @property
    def in_platform(self) -> bool:
        return self.source == self.target

    @property
    def variant_name(self) -> str:
        return variant_name(self.components, full_data=self.n_train is None)

    @classmethod
    def for_variant(cls, source: str, target: str, variant: str, **kw) -> "ExperimentConfig":
        comps, full = parse_variant(variant)
        if full:
            kw["n_train"] = None
        return cls(source, target, comps, **kw)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    macro_f1: float
    report: ClassReport
    wall_secs: float
    source_loss_curve: list[float]
    fingerprints: dict[str, str]
    disc_accuracy: Optional[float] = None
    adaptation: Optional[AdaptationState] = None

    def row(self, timing: bool = True) -> dict:
        r = self.report
        return {
            "source": self.config.source,
            "target": self.config.target,
            "variant": self.config.variant_name,
            "seed": self.config.seed,
            "macro_f1": repr(self.macro_f1),
            "f1_class0": repr(r.f1[0]),
            "f1_class1": repr(r.f1[1]),
            "tp": r.tp, "fp": r.fp, "fn": r.fn, "tn": r.tn,
            "wall_secs": f"{self.wall_secs:.3f}" if timing else "",
        }


def _digest(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(str(p).encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()[:16]


def _tensor_digest(t: torch.Tensor) -> str:
    return hashlib.sha256(t.numpy().tobytes()).hexdigest()[:16]


def check_platform_roles(config: ExperimentConfig) -> None:
    if config.source == "pan13" and not config.in_platform:
        if not config.allow_pan13_source:
            raise ExperimentError("pan13 is a target-only platform; set allow_pan13_source to override")
        warnings.warn("using pan13 as a source platform", stacklevel=3)


def run_experiment(
    config: ExperimentConfig,
    corpora: Mapping[str, PlatformDataset],
    external_lexicon: Sequence[tuple[str, float]] = (),
    trace_dir=None,
    checkpoint_dir=None,
    heldout_target: Optional[PlatformDataset] = None,
) -> ExperimentResult:
    """sample -> [C] align -> train source encoder + head -> [A] adapt -> predict -> metrics.

    ``adapt_hyperparams`` (when set) drive the adversarial stage instead of
    ``hyperparams``. With ``heldout_target`` the discriminator is scored on it and
    on unsampled source records; otherwise on the texts it was trained on.
    """
    start = time.perf_counter()
    check_platform_roles(config)
    for name in {config.source, config.target}:
        if name not in corpora:
            raise ExperimentError(f"missing corpus {name!r}")
    hp = replace(config.hyperparams, seed=config.seed)
    adapt_hp = replace(config.adapt_hyperparams or config.hyperparams, seed=config.seed)

    if config.in_platform:
        pool, test = train_test_split(corpora[config.source], config.test_fraction, config.seed)
    else:
        pool, test = corpora[config.source], corpora[config.target]
    if config.n_train is None or config.n_train >= len(pool):
        train = pool
    else:
        train = stratified_sample(pool, config.n_train, config.seed)
    sampled = set(train.ids)
    heldout_source = pool.subset(i for i, r in enumerate(pool.records) if r.id not in sampled)

    if "C" in config.components:
        lexicon = conc.build_lexicon(external_lexicon, [train], config.lexicon_capacity)
        budget = conc.compute_budget(
            dataset_stats(test), encoder_max=config.encoder.max_tokens, floor=config.budget_floor
        )
        train = conc.align_corpus(train, lexicon, budget)
        test = conc.align_corpus(test, lexicon, budget)
        if len(heldout_source):
            heldout_source = conc.align_corpus(heldout_source, lexicon, budget)
        if heldout_target is not None:
            heldout_target = conc.align_corpus(heldout_target, lexicon, budget)

    fingerprints = {"preprocess": _digest(*train.texts, "|", *test.texts)}

    torch.manual_seed(config.seed)
    M_S = build_encoder(config.encoder, seed=config.seed)
    variant = "adaptive" if "S" in config.components else "baseline"
    C_s = Classifier(config.encoder.embedding_dim, variant, seed=config.seed + 1)
    fingerprints["head"] = f"{variant}:{sum(p.numel() for p in C_s.parameters())}"
    M_S, C_s, curve = train_source_encoder(M_S, C_s, train, hp)
    for p in C_s.parameters():
        p.requires_grad_(False)

    state = None
    disc_acc = None
    if "A" in config.components:
        M_T = init_target_from_source(M_S)
        D = Discriminator(config.encoder.embedding_dim, config.discriminator_hidden, seed=config.seed + 2)
        epoch_dir = Path(checkpoint_dir) / _cell_stem(config) if checkpoint_dir is not None else None
        state = adapt_target(AdaptationState(M_S, M_T, D), train.texts, test.texts, adapt_hp, epoch_dir)
        if heldout_target is not None and len(heldout_source):
            n = min(len(heldout_source), len(heldout_target))
            disc_acc = discriminator_accuracy(D, M_S, M_T, heldout_source.texts[:n], heldout_target.texts[:n])
        else:
            disc_acc = discriminator_accuracy(D, M_S, M_T, train.texts, test.texts)
        fingerprints["target_encoder"] = "adapted:" + _tensor_digest(parameter_vector(M_T))
        if trace_dir is not None:
            write_trace_csv(state, Path(trace_dir) / f"{_cell_stem(config)}.csv")
    else:
        M_T = M_S
        fingerprints["target_encoder"] = "source"

    if checkpoint_dir is not None:
        save_encoder(M_T, Path(checkpoint_dir) / f"{_cell_stem(config)}.target.pt")

    preds = predict_target(M_T, C_s, test.texts)
    report = class_report(preds, test.labels)
    return ExperimentResult(
        config=config,
        macro_f1=report.macro_f1,
        report=report,
        wall_secs=time.perf_counter() - start,
        source_loss_curve=curve,
        fingerprints=fingerprints,
        disc_accuracy=disc_acc,
        adaptation=state,
    )


def _cell_stem(config: ExperimentConfig) -> str:
    safe = lambda s: s.replace(":", "-")
    return f"{safe(config.source)}__{safe(config.target)}__{config.variant_name}__seed{config.seed}"


# -- grids ---------------------------------------------------------------------


@dataclass
class GridCell:
    source: str
    target: str
    variant: str
    results: list[ExperimentResult] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return not self.results

    @property
    def value(self) -> float:
        """Median macro-F1 over successful seeds (NaN when every seed failed)."""
        if not self.results:
            return math.nan
        return statistics.median(r.macro_f1 for r in self.results)


@dataclass
class GridResult:
    pairs: list[tuple[str, str]]
    variants: list[str]
    cells: dict[tuple[tuple[str, str], str], GridCell]

    def column_means(self) -> dict[str, float]:
        out = {}
        for v in self.variants:
            vals = [self.cells[(p, v)].value for p in self.pairs if not self.cells[(p, v)].failed]
            out[v] = sum(vals) / len(vals) if vals else math.nan
        return out

    def table_rows(self) -> list[list[str]]:
        rows = [["pair", *self.variants]]
        for p in self.pairs:
            rows.append([pair_label(*p), *(_fmt(self.cells[(p, v)]) for v in self.variants)])
        means = self.column_means()
        rows.append(["Average", *(repr(means[v]) for v in self.variants)])
        return rows

    def table_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.table_rows())
        return buf.getvalue()

    def results_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=RESULT_FIELDS, lineterminator="\n")
        w.writeheader()
        for p in self.pairs:
            for v in self.variants:
                for r in self.cells[(p, v)].results:
                    w.writerow(r.row(timing))
        return buf.getvalue()

    def render(self, digits: int = 2) -> str:
        """Plain-text table: one row per source->target pair plus an Average row."""
        header = ["Source->Target", *self.variants]
        body = []
        for p in self.pairs:
            cells = [self.cells[(p, v)] for v in self.variants]
            body.append([pair_label(*p), *("failed" if c.failed else f"{c.value:.{digits}f}" for c in cells)])
        means = self.column_means()
        body.append(["Average", *(f"{means[v]:.{digits}f}" for v in self.variants)])
        widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
        lines = ["  ".join(s.ljust(w) for s, w in zip(r, widths)).rstrip() for r in [header, *body]]
        return "\n".join(lines) + "\n"


def _fmt(cell: GridCell) -> str:
    return "failed" if cell.failed else repr(cell.value)


@dataclass(frozen=True)
class _RowScore:
    macro_f1: float


def grid_from_rows(rows: Sequence[Mapping[str, str]]) -> GridResult:
    """Rebuild a GridResult (values only) from results.csv rows, keeping first-seen order."""
    pairs, variants, cells = [], [], {}
    for row in rows:
        missing = [k for k in ("source", "target", "variant", "macro_f1") if k not in row]
        if missing:
            raise ValueError(f"results row lacks columns {missing}")
        p, v = (row["source"], row["target"]), row["variant"]
        if p not in pairs:
            pairs.append(p)
        if v not in variants:
            variants.append(v)
        cell = cells.setdefault((p, v), GridCell(p[0], p[1], v))
        cell.results.append(_RowScore(float(row["macro_f1"])))
    for p in pairs:
        for v in variants:
            cells.setdefault((p, v), GridCell(p[0], p[1], v, errors=["no rows"]))
    return GridResult(pairs, variants, cells)


def run_grid(
    pairs: Sequence[tuple[str, str]],
    variants: Sequence[str],
    seeds: Sequence[int],
    corpora: Mapping[str, PlatformDataset],
    base: Optional[dict] = None,
    external_lexicon: Sequence[tuple[str, float]] = (),
    trace_dir=None,
    checkpoint_dir=None,
) -> GridResult:
    """Run every (pair, variant, seed) cell once; failures are recorded, not raised.

    ``base`` holds extra ``ExperimentConfig`` keyword arguments shared by all cells.
    """
    base = dict(base or {})
    pairs = [tuple(p) for p in pairs]
    cells = {}
    for p in pairs:
        for v in variants:
            cell = GridCell(p[0], p[1], v)
            for seed in seeds:
                try:
                    cfg = ExperimentConfig.for_variant(p[0], p[1], v, seed=seed, **base)
                    cell.results.append(
                        run_experiment(cfg, corpora, external_lexicon, trace_dir, checkpoint_dir)
                    )
                except Exception as exc:  # noqa: BLE001 - a failed cell must not abort the grid
                    log.warning("cell %s %s seed %s failed: %s", pair_label(*p), v, seed, exc)
                    cell.errors.append(f"seed {seed}: {type(exc).__name__}: {exc}")
            cells[(p, v)] = cell
    return GridResult(list(pairs), list(variants), cells)


def write_grid_outputs(grid: GridResult, out_dir, timing: bool = True) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "table": out_dir / "grid.csv",
        "results": out_dir / "results.csv",
        "text": out_dir / "grid.txt",
    }
    paths["table"].write_text(grid.table_csv())
    paths["results"].write_text(grid.results_csv(timing))
    paths["text"].write_text(grid.render())
    return paths
