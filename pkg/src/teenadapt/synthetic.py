"""Synthetic platforms with controllable length, label ratio and vocabulary shift.

Every text mixes three token pools: class markers shared by all platforms
(``teen*`` / ``adult*``), neutral words shared by all platforms (``w*``) and
filler that only occurs on one platform (``<name>*``). Shifting the filler pool
and the length distribution is what makes two synthetic platforms differ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import PlatformDataset, TextRecord


@dataclass(frozen=True)
class PlatformSpec:
    name: str
    size: int = 1000
    teen_ratio: float = 0.3
    mean_length: float = 20.0
    marker_rate: float = 0.1
    marker_noise: float = 0.25
    filler_rate: float = 0.4
    n_markers: int = 40
    n_neutral: int = 300
    n_filler: int = 300
    passage_length: int = 0
    slang_rate: float = 0.0
    platform: str = ""

    @property
    def tag(self) -> str:
        return self.platform or f"synthetic:{self.name}"


def make_platform(spec: PlatformSpec, seed: int = 0) -> PlatformDataset:
    """Draw ``spec.size`` records; exactly ``round(size * teen_ratio)`` are teenagers.

    Lengths are 1 + Poisson(mean_length - 1). Each token is a class marker with
    probability ``marker_rate`` (from the opposite class with probability
    ``marker_noise``), platform filler with probability ``filler_rate`` and a
    shared neutral word otherwise. With ``passage_length > 0`` markers occur only
    inside one randomly placed passage of that many tokens. ``slang_rate`` is the
    probability that a token is a teenager marker used regardless of the label.
    """
    rng = np.random.default_rng(seed)
    n_teen = int(round(spec.size * spec.teen_ratio))
    labels = np.array([1] * n_teen + [0] * (spec.size - n_teen))
    rng.shuffle(labels)
    records = []
    for i, y in enumerate(labels):
        length = 1 + int(rng.poisson(max(spec.mean_length - 1, 0)))
        kind = rng.random(length)
        if spec.passage_length and length > spec.passage_length:
            start = int(rng.integers(length - spec.passage_length + 1))
            inside = np.zeros(length, dtype=bool)
            inside[start : start + spec.passage_length] = True
        else:
            inside = np.ones(length, dtype=bool)
        toks = []
        for u, in_passage in zip(kind, inside):
            if u < spec.slang_rate:
                toks.append(f"teen{rng.integers(spec.n_markers)}")
            elif u < spec.slang_rate + spec.marker_rate and in_passage:
                cls = y if rng.random() >= spec.marker_noise else 1 - y
                prefix = "teen" if cls == 1 else "adult"
                toks.append(f"{prefix}{rng.integers(spec.n_markers)}")
            elif u < spec.slang_rate + spec.marker_rate + spec.filler_rate:
                toks.append(f"{spec.name}{rng.integers(spec.n_filler)}")
            else:
                toks.append(f"w{rng.integers(spec.n_neutral)}")
        records.append(TextRecord(id=f"{spec.name}-{i}", platform=spec.tag, text=" ".join(toks), label=int(y)))
    return PlatformDataset(spec.tag, tuple(records), f"synthetic:{spec.name}:seed={seed}")


def separable_platform(name: str = "sep", size: int = 200, seed: int = 0) -> PlatformDataset:
    """Linearly separable toy set: every token is a marker of the record's own class."""
    spec = PlatformSpec(name, size=size, teen_ratio=0.5, mean_length=6, marker_rate=1.0, marker_noise=0.0,
                        filler_rate=0.0, n_markers=10)
    return make_platform(spec, seed)


# Source: long texts whose age markers sit in one 16-token passage. Target: short
# texts, its own filler words, and teen slang used by adults and teenagers alike.
SOURCE_SPEC = PlatformSpec(
    "src", size=1000, teen_ratio=0.42, mean_length=120, marker_rate=0.35, passage_length=16,
    filler_rate=0.4, n_filler=5,
)
TARGET_SPEC = PlatformSpec(
    "tgt", size=800, teen_ratio=0.3, mean_length=20, marker_rate=0.25, filler_rate=0.4, n_filler=5,
    slang_rate=0.1,
)


def shifted_pair(seed: int = 0, source: PlatformSpec = SOURCE_SPEC, target: PlatformSpec = TARGET_SPEC):
    """(source, target) synthetic platforms drawn with independent streams from ``seed``."""
    return make_platform(source, seed=2 * seed), make_platform(target, seed=2 * seed + 1)


def standin_lexicon(n_markers: int = 40) -> list[tuple[str, float]]:
    """Small (term, weight) list standing in for an external age lexicon."""
    out = []
    for i in range(0, n_markers, 2):
        out.append((f"teen{i}", 1.0))
        out.append((f"adult{i}", -1.0))
    return out


# Desk-scale recipe for the toy encoder. The source stage needs a larger encoder
# learning rate than a pretrained model would (its embeddings start random); the
# adversarial stage runs 10x slower so the whole target cloud does not swing
# across the classifier boundary between discriminator updates.
TOY_SOURCE_HP = dict(batch_size=16, encoder_lr=5e-3, head_lr=1e-3, epochs=4, kl_weight=1.0)
TOY_ADAPT_HP = dict(batch_size=16, encoder_lr=1e-4, head_lr=1e-3, epochs=4, kl_weight=1.0)


@dataclass
class TrialOutcome:
    seed: int
    baseline_f1: float
    full_f1: float
    disc_accuracy: float
    kl_trace: list


def synthetic_trial(
    seed: int,
    source: PlatformSpec = SOURCE_SPEC,
    target: PlatformSpec = TARGET_SPEC,
    n_train: int = 700,
    heldout_size: int = 400,
    embedding_dim: int = 32,
) -> TrialOutcome:
    """One seed of the bundled experiment: BASELINE vs AB_CSA on a shifted pair."""
    from dataclasses import replace as _replace

    from .adaptation import Hyperparams
    from .encoder import EncoderConfig
    from .evaluation import ExperimentConfig, run_experiment

    src, tgt = shifted_pair(seed, source, target)
    held = make_platform(_replace(target, size=heldout_size), seed=10_000 + seed)
    corpora = {src.platform: src, tgt.platform: tgt}
    common = dict(
        seed=seed,
        hyperparams=Hyperparams(**TOY_SOURCE_HP),
        adapt_hyperparams=Hyperparams(**TOY_ADAPT_HP),
        encoder=EncoderConfig(embedding_dim=embedding_dim),
    )
    lex = standin_lexicon(source.n_markers)
    base = run_experiment(ExperimentConfig.for_variant(src.platform, tgt.platform, "BASELINE", **common), corpora, lex)
    full = run_experiment(
        ExperimentConfig.for_variant(src.platform, tgt.platform, "AB_CSA", n_train=n_train, **common),
        corpora,
        lex,
        heldout_target=held,
    )
    return TrialOutcome(seed, base.macro_f1, full.macro_f1, full.disc_accuracy, list(full.adaptation.kl_losses))
