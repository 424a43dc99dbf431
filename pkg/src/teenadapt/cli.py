"""Command-line entry point: ``teenadapt <command> ...``.

Exit codes: 0 success, 1 validation failure, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import ENV_OUT, ENV_SEED, SCHEMA_VERSION, ConfigError, RunConfig, load_config
from .corpus import FORMATS, PLATFORMS, CorpusError, dataset_stats, load_dataset, write_jsonl

log = logging.getLogger("teenadapt")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class UsageError(ValueError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _platform_for(path: Path) -> str:
    return path.stem if path.stem in PLATFORMS else f"synthetic:{path.stem}"


# -- commands ------------------------------------------------------------------


def cmd_ingest(args) -> int:
    ds = load_dataset(args.input, args.format, args.platform)
    write_jsonl(ds, args.output)
    stats = dataset_stats(ds, year=args.year)
    stats_path = Path(args.stats) if args.stats else Path(args.output).with_suffix(".stats.json")
    stats_path.write_text(_dump(stats.to_json()))
    sys.stdout.write(_dump(stats.to_json()))
    return EXIT_OK


def cmd_lexicon_build(args) -> int:
    from .concentrator import build_lexicon, read_term_weights
    from .synthetic import standin_lexicon

    external = []
    if args.external:
        external = read_term_weights(args.external)
    elif args.standin:
        external = standin_lexicon()
    corpora = [load_dataset(p, args.corpus_format, _platform_for(Path(p))) for p in args.corpus or []]
    if not external and not corpora:
        raise UsageError("lexicon build needs --external, --standin or at least one --corpus")
    lexicon = build_lexicon(external, corpora, args.capacity)
    out = _output_path(args, "lexicon.json")
    lexicon.save(out)
    print(f"wrote {len(lexicon.entries)} entries to {out}")
    return EXIT_OK


def _load_run_config(args) -> RunConfig:
    path = args.run_config or args.config
    if not path:
        raise UsageError("run needs a config file (--config PATH)")
    cfg = load_config(path)
    return cfg.override(seed=args.seed, output_dir=args.out)


def write_manifest(cfg: RunConfig, out_dir: Path, extra: Optional[dict] = None) -> Path:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "config_sha256": cfg.digest,
        "seeds": list(cfg.seeds),
        "pairs": [list(p) for p in cfg.pairs],
        "variants": list(cfg.variants),
        "encoder": asdict(cfg.encoder),
    }
    manifest.update(extra or {})
    path = out_dir / "manifest.json"
    path.write_text(_dump(manifest))
    return path


def execute_run(cfg: RunConfig) -> dict:
    """Run the configured grid and write all outputs; returns the output paths."""
    from .concentrator import read_term_weights
    from .evaluation import run_grid, write_grid_outputs
    from .synthetic import standin_lexicon

    corpora = {}
    for name, entry in cfg.datasets.items():
        corpora[name] = entry.load()
    external = []
    if cfg.external_lexicon is not None:
        external = read_term_weights(cfg.external_lexicon)
    elif cfg.standin_lexicon:
        external = standin_lexicon()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = run_grid(
        cfg.pairs,
        cfg.variants,
        cfg.seeds,
        corpora,
        base=cfg.experiment_kwargs(),
        external_lexicon=external,
        trace_dir=out / "traces",
        checkpoint_dir=out / "checkpoints" if cfg.save_checkpoints else None,
    )
    paths = write_grid_outputs(grid, out, timing=cfg.record_timing)
    failed = {
        f"{p[0]}->{p[1]} {v}": cell.errors
        for (p, v), cell in grid.cells.items()
        if cell.errors
    }
    paths["manifest"] = write_manifest(cfg, out, {"failed_cells": failed})
    paths["grid"] = grid
    return paths


def cmd_run(args) -> int:
    cfg = _load_run_config(args)
    paths = execute_run(cfg)
    sys.stdout.write(paths["text"].read_text())
    print(f"outputs in {cfg.output_dir}")
    return EXIT_RUNTIME if any(c.failed for c in paths["grid"].cells.values()) else EXIT_OK


def cmd_adapt(args) -> int:
    from .adaptation import AdaptationState, Hyperparams, adapt_target, write_trace_csv
    from .encoder import init_target_from_source, load_encoder, save_encoder
    from .heads import Discriminator

    hp = Hyperparams(
        batch_size=args.batch_size,
        encoder_lr=args.encoder_lr,
        head_lr=args.head_lr,
        epochs=args.epochs,
        kl_weight=args.kl_weight,
        seed=args.seed or 0,
    )
    M_S = load_encoder(args.encoder)
    source = load_dataset(args.source, args.data_format, _platform_for(Path(args.source)))
    target = load_dataset(args.target, args.data_format, _platform_for(Path(args.target)))
    M_T = init_target_from_source(M_S)
    D = Discriminator(M_S.embedding_dim, args.disc_hidden, seed=hp.seed + 2)
    out = _output_path(args, "target.pt")
    state = adapt_target(AdaptationState(M_S, M_T, D), source.texts, target.texts, hp)
    save_encoder(M_T, out)
    if args.trace:
        write_trace_csv(state, args.trace)
    print(f"{state.step} adaptation steps; target encoder written to {out}")
    return EXIT_OK


def _read_labels(path, key_options) -> dict[str, int]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise UsageError(f"{path}: row {i}: invalid JSON ({exc.msg})") from None
            key = next((k for k in key_options if k in row), None)
            if "id" not in row or key is None:
                raise UsageError(f"{path}: row {i}: needs 'id' and one of {key_options}")
            out[str(row["id"])] = int(row[key])
    return out


def cmd_eval(args) -> int:
    from .evaluation import class_report

    preds = _read_labels(args.pred, ("prediction", "label"))
    gold = {r.id: r.label for r in load_dataset(args.gold, "jsonl").records}
    missing = sorted(set(gold) - set(preds))
    if missing:
        raise UsageError(f"no prediction for {len(missing)} gold ids (first: {missing[0]!r})")
    ids = sorted(gold)
    report = class_report([preds[i] for i in ids], [gold[i] for i in ids])
    result = {
        "macro_f1": report.macro_f1,
        "f1_class0": report.f1[0],
        "f1_class1": report.f1[1],
        "tp": report.tp, "fp": report.fp, "fn": report.fn, "tn": report.tn,
    }
    sys.stdout.write(_dump(result))
    return EXIT_OK


def cmd_report(args) -> int:
    from .evaluation import grid_from_rows

    with open(args.results, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise UsageError(f"{args.results}: no result rows")
    text = grid_from_rows(rows).render(args.digits)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return EXIT_OK


def _output_path(args, default_name: str) -> Path:
    out = Path(args.out or os.environ.get(ENV_OUT) or ".")
    if out.suffix:
        return out
    out.mkdir(parents=True, exist_ok=True)
    return out / default_name


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="teenadapt", description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=None, help=f"global seed (env {ENV_SEED})")
    ap.add_argument("--out", default=None, help=f"output file or directory (env {ENV_OUT})")
    ap.add_argument("--config", default=None, help="run config JSON")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert a csv/jsonl dataset to canonical JSONL and print stats")
    p.add_argument("--format", choices=FORMATS, default="jsonl")
    p.add_argument("--platform", required=True)
    p.add_argument("--year", type=int, default=None)
    p.add_argument("--stats", default=None, help="stats JSON path (default: <output>.stats.json)")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("lexicon", help="lexicon utilities")
    lsub = p.add_subparsers(dest="lexicon_command", required=True)
    b = lsub.add_parser("build", help="build the alignment lexicon")
    b.add_argument("--external", default=None, help="term/weight file (.json or .tsv)")
    b.add_argument("--standin", action="store_true", help="use the bundled stand-in list")
    b.add_argument("--corpus", nargs="*", default=[], help="labelled JSONL corpora")
    b.add_argument("--corpus-format", choices=FORMATS, default="jsonl")
    b.add_argument("--capacity", type=int, default=900)
    b.add_argument("--out", dest="out", default=argparse.SUPPRESS)
    b.set_defaults(func=cmd_lexicon_build)

    p = sub.add_parser("run", help="run an experiment grid from a config file")
    p.add_argument("run_config", nargs="?", default=None)
    p.add_argument("--config", dest="config", default=argparse.SUPPRESS)
    p.add_argument("--out", dest="out", default=argparse.SUPPRESS)
    p.add_argument("--seed", dest="seed", type=int, default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("adapt", help="adapt a saved source encoder to a target corpus")
    p.add_argument("--encoder", required=True, help="source encoder checkpoint (with .json sidecar)")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--data-format", choices=FORMATS, default="jsonl")
    p.add_argument("--lambda", dest="kl_weight", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--encoder-lr", type=float, default=2e-5)
    p.add_argument("--head-lr", type=float, default=1e-3)
    p.add_argument("--disc-hidden", type=int, default=256)
    p.add_argument("--trace", default=None, help="loss trace CSV path")
    p.add_argument("--out", dest="out", default=argparse.SUPPRESS)
    p.add_argument("--seed", dest="seed", type=int, default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("eval", help="macro-F1 of predictions against gold labels")
    p.add_argument("--pred", required=True, help="JSONL with id and prediction (or label)")
    p.add_argument("--gold", required=True, help="canonical JSONL dataset")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="render the results table from a results.csv")
    p.add_argument("results")
    p.add_argument("--digits", type=int, default=2)
    p.add_argument("--out", dest="out", default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    from .adaptation import AdaptationError
    from .concentrator import LexiconError
    from .encoder import TrainingError
    from .evaluation import ExperimentError

    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is None and ENV_SEED in os.environ:
        try:
            args.seed = int(os.environ[ENV_SEED])
        except ValueError:
            print(f"error: {ENV_SEED} is not an integer", file=sys.stderr)
            return EXIT_VALIDATION
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (AdaptationError, TrainingError, ExperimentError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (CorpusError, LexiconError, UsageError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
