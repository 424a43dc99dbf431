"""Declarative run configuration (JSON, versioned schema)."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

from .adaptation import Hyperparams
from .corpus import FORMATS, PlatformDataset, load_dataset, validate_platform, CorpusError
from .encoder import BACKENDS, EncoderConfig
from .evaluation import CROSS_PAIRS, CROSS_VARIANTS, IN_PAIRS, IN_VARIANTS, parse_variant
from .synthetic import PlatformSpec, make_platform

SCHEMA_VERSION = 1
ENV_OUT = "TEENADAPT_OUT"
ENV_SEED = "TEENADAPT_SEED"

_TOP_KEYS = {
    "version", "datasets", "lexicon", "encoder", "hyperparams", "adapt_hyperparams", "grid", "seeds",
    "seed", "output_dir", "allow_pan13_source", "discriminator_hidden", "record_timing", "save_checkpoints",
}
_GRID_KEYS = {"mode", "pairs", "variants", "n_train", "test_fraction"}
_LEXICON_KEYS = {"external", "standin", "capacity"}
_FILE_DATASET_KEYS = {"path", "format"}
_SYNTH_DATASET_KEYS = {"synthetic", "seed"}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid run config:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass
class DatasetEntry:
    name: str
    path: Optional[Path] = None
    format: str = "jsonl"
    synthetic: Optional[dict] = None
    seed: int = 0

    def load(self) -> PlatformDataset:
        if self.synthetic is not None:
            spec = PlatformSpec(name=self.name, platform=self.name, **self.synthetic)
            return make_platform(spec, self.seed)
        return load_dataset(self.path, self.format, self.name)


@dataclass
class RunConfig:
    datasets: dict[str, DatasetEntry]
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    adapt_hyperparams: Optional[Hyperparams] = None
    mode: str = "cross"
    pairs: list[tuple[str, str]] = field(default_factory=lambda: list(CROSS_PAIRS))
    variants: list[str] = field(default_factory=lambda: list(CROSS_VARIANTS))
    n_train: int = 700
    test_fraction: float = 0.2
    seeds: list[int] = field(default_factory=lambda: [0])
    seed: int = 0  # a single-seed override (flag or environment) replaces ``seeds`` with [seed]
    output_dir: Path = Path("runs/default")
    external_lexicon: Optional[Path] = None
    standin_lexicon: bool = False
    lexicon_capacity: int = 900
    allow_pan13_source: bool = False
    discriminator_hidden: int = 256
    record_timing: bool = True
    save_checkpoints: bool = False
    raw: dict = field(default_factory=dict)

    def override(self, seed: Optional[int] = None, output_dir=None) -> "RunConfig":
        if seed is not None:
            self.seed, self.seeds = seed, [seed]
        if output_dir is not None:
            self.output_dir = Path(output_dir)
        return self

    @property
    def digest(self) -> str:
        return config_digest(self.raw)

    def experiment_kwargs(self) -> dict:
        return dict(
            n_train=self.n_train,
            hyperparams=self.hyperparams,
            adapt_hyperparams=self.adapt_hyperparams,
            encoder=self.encoder,
            discriminator_hidden=self.discriminator_hidden,
            lexicon_capacity=self.lexicon_capacity,
            test_fraction=self.test_fraction,
            allow_pan13_source=self.allow_pan13_source,
        )


def config_digest(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True).encode("utf-8")).hexdigest()


def _check_keys(obj, allowed: set, where: str, problems: list) -> bool:
    if not isinstance(obj, dict):
        problems.append(f"{where}: expected an object")
        return False
    for k in sorted(set(obj) - allowed):
        problems.append(f"{where}.{k}: unknown key")
    return True


def _dataclass_from(cls, obj, where: str, problems: list, **extra):
    if obj is None:
        return cls(**extra)
    allowed = {f.name for f in fields(cls)} - set(extra)
    if not _check_keys(obj, allowed, where, problems):
        return None
    try:
        return cls(**obj, **extra)
    except (TypeError, ValueError) as exc:
        problems.append(f"{where}: {exc}")
        return None


def _resolve(path: str, base: Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base / p


def parse_config(raw: dict, base_dir: Path = Path("."), env: Optional[dict] = None) -> RunConfig:
    """Validate ``raw`` completely, collecting every problem before raising."""
    env = os.environ if env is None else env
    problems: list[str] = []
    if not _check_keys(raw, _TOP_KEYS, "config", problems):
        raise ConfigError(problems)
    if raw.get("version") != SCHEMA_VERSION:
        problems.append(f"version: expected {SCHEMA_VERSION}, got {raw.get('version')!r}")

    datasets: dict[str, DatasetEntry] = {}
    ds_raw = raw.get("datasets")
    if not isinstance(ds_raw, dict) or not ds_raw:
        problems.append("datasets: expected a non-empty object")
        ds_raw = {}
    for name, entry in ds_raw.items():
        where = f"datasets.{name}"
        try:
            validate_platform(name)
        except CorpusError as exc:
            problems.append(f"{where}: {exc}")
        if not isinstance(entry, dict):
            problems.append(f"{where}: expected an object")
            continue
        if "synthetic" in entry:
            if not _check_keys(entry, _SYNTH_DATASET_KEYS, where, problems):
                continue
            spec = entry["synthetic"]
            allowed = {f.name for f in fields(PlatformSpec)} - {"name", "platform"}
            if _check_keys(spec, allowed, f"{where}.synthetic", problems):
                datasets[name] = DatasetEntry(name, synthetic=dict(spec), seed=int(entry.get("seed", 0)))
            continue
        if not _check_keys(entry, _FILE_DATASET_KEYS, where, problems):
            continue
        if "path" not in entry:
            problems.append(f"{where}.path: missing")
            continue
        path = _resolve(entry["path"], base_dir)
        if not path.is_file():
            problems.append(f"{where}.path: file not found: {path}")
        fmt = entry.get("format", "jsonl")
        if fmt not in FORMATS:
            problems.append(f"{where}.format: expected one of {FORMATS}, got {fmt!r}")
        datasets[name] = DatasetEntry(name, path=path, format=fmt)

    enc = raw.get("encoder")
    if isinstance(enc, dict) and enc.get("backend", "toy") not in BACKENDS:
        problems.append(f"encoder.backend: expected one of {BACKENDS}")
        encoder = None
    else:
        encoder = _dataclass_from(EncoderConfig, enc, "encoder", problems)
    hp = _dataclass_from(Hyperparams, raw.get("hyperparams"), "hyperparams", problems)
    ahp = None
    if raw.get("adapt_hyperparams") is not None:
        ahp = _dataclass_from(Hyperparams, raw["adapt_hyperparams"], "adapt_hyperparams", problems)

    grid = raw.get("grid") or {}
    _check_keys(grid, _GRID_KEYS, "grid", problems)
    mode = grid.get("mode", "cross")
    if mode not in ("cross", "in"):
        problems.append(f"grid.mode: expected 'cross' or 'in', got {mode!r}")
    default_pairs, default_variants = (CROSS_PAIRS, CROSS_VARIANTS) if mode != "in" else (IN_PAIRS, IN_VARIANTS)
    pairs = [tuple(p) for p in grid.get("pairs") or default_pairs]
    for p in pairs:
        if len(p) != 2:
            problems.append(f"grid.pairs: {list(p)} is not a [source, target] pair")
            continue
        for name in p:
            if name not in ds_raw:
                problems.append(f"grid.pairs: platform {name!r} has no entry under datasets")
        if mode == "in" and p[0] != p[1]:
            problems.append(f"grid.pairs: in-platform pair {list(p)} must have source == target")
        if mode == "cross" and p[0] == p[1]:
            problems.append(f"grid.pairs: cross-platform pair {list(p)} must have source != target")
        if p[0] == "pan13" and p[1] != "pan13" and not raw.get("allow_pan13_source", False):
            problems.append(f"grid.pairs: pan13 is target-only (pair {list(p)}); set allow_pan13_source")
    variants = list(grid.get("variants") or default_variants)
    for v in variants:
        try:
            parse_variant(v)
        except ValueError as exc:
            problems.append(f"grid.variants: {exc}")
    n_train = grid.get("n_train", 700)
    if not isinstance(n_train, int) or n_train < 1:
        problems.append(f"grid.n_train: expected a positive integer, got {n_train!r}")
    test_fraction = grid.get("test_fraction", 0.2)
    if not isinstance(test_fraction, (int, float)) or not 0 < test_fraction < 1:
        problems.append(f"grid.test_fraction: expected a number in (0, 1), got {test_fraction!r}")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        problems.append(f"seed: expected an integer, got {seed!r}")
        seed = 0
    seeds = raw.get("seeds", [seed])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        problems.append("seeds: expected a non-empty list of integers")
        seeds = [seed]
    if ENV_SEED in env:
        try:
            seed = int(env[ENV_SEED])
            seeds = [seed]
        except ValueError:
            problems.append(f"{ENV_SEED}: not an integer: {env[ENV_SEED]!r}")
    output_dir = env.get(ENV_OUT) or raw.get("output_dir") or "runs/default"

    lex = raw.get("lexicon") or {}
    _check_keys(lex, _LEXICON_KEYS, "lexicon", problems)
    external = None
    if lex.get("external"):
        external = _resolve(lex["external"], base_dir)
        if not external.is_file():
            problems.append(f"lexicon.external: file not found: {external}")
    capacity = lex.get("capacity", 900)
    if not isinstance(capacity, int) or capacity < 1:
        problems.append(f"lexicon.capacity: expected a positive integer, got {capacity!r}")

    for key in ("allow_pan13_source", "record_timing", "save_checkpoints"):
        if key in raw and not isinstance(raw[key], bool):
            problems.append(f"{key}: expected true or false")
    dh = raw.get("discriminator_hidden", 256)
    if not isinstance(dh, int) or dh < 1:
        problems.append(f"discriminator_hidden: expected a positive integer, got {dh!r}")

    if problems:
        raise ConfigError(problems)
    return RunConfig(
        datasets=datasets,
        encoder=encoder,
        hyperparams=hp,
        adapt_hyperparams=ahp,
        mode=mode,
        pairs=pairs,
        variants=variants,
        n_train=n_train,
        test_fraction=float(test_fraction),
        seeds=list(seeds),
        seed=seed,
        output_dir=_resolve(output_dir, Path(".")),
        external_lexicon=external,
        standin_lexicon=bool(lex.get("standin", False)),
        lexicon_capacity=capacity,
        allow_pan13_source=raw.get("allow_pan13_source", False),
        discriminator_hidden=dh,
        record_timing=raw.get("record_timing", True),
        save_checkpoints=raw.get("save_checkpoints", False),
        raw=raw,
    )


def load_config(path, env: Optional[dict] = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    try:
        raw: Any = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})"]) from None
    return parse_config(raw, path.parent, env)
