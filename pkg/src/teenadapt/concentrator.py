"""Lexicon construction and lexicon-guided fragment extraction.

Source and target texts are cut down to a shared token budget derived from the
target platform's mean length, keeping the windows that carry the most lexicon
weight.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import DatasetStats, PlatformDataset, tokenize

DEFAULT_CAPACITY = 900
ENCODER_MAX_TOKENS = 512
BUDGET_FLOOR = 16


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class Lexicon:
    """Ranked ``term -> weight`` entries (unigrams or space-joined bigrams)."""

    entries: tuple[tuple[str, float], ...]
    capacity: int = DEFAULT_CAPACITY

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((str(t), float(w)) for t, w in self.entries))
        if len(self.entries) > self.capacity:
            raise LexiconError(f"{len(self.entries)} entries exceed capacity {self.capacity}")
        terms = [t for t, _ in self.entries]
        if len(set(terms)) != len(terms):
            raise LexiconError("duplicate lexicon terms")
        if not all(math.isfinite(w) for _, w in self.entries):
            raise LexiconError("lexicon weights must be finite")
        object.__setattr__(self, "_weights", dict(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, term: str) -> bool:
        return term in self._weights

    @property
    def weights(self) -> dict[str, float]:
        return dict(self._weights)

    def weight(self, term: str) -> float:
        return self._weights.get(term, 0.0)

    def to_json(self) -> str:
        return json.dumps([{"term": t, "weight": w} for t, w in self.entries], ensure_ascii=False, indent=1)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path, capacity: int | None = None) -> "Lexicon":
        items = read_term_weights(path)
        return cls(tuple(items), capacity=capacity or max(len(items), 1))


def read_term_weights(path) -> list[tuple[str, float]]:
    """Read ``[{"term", "weight"}, ...]`` JSON or a two-column TSV file."""
    path = Path(path)
    if not path.is_file():
        raise LexiconError(f"lexicon file not found: {path}")
    raw = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        data = json.loads(raw)
        return [(str(d["term"]), float(d["weight"])) for d in data]
    out = []
    for n, line in enumerate(raw.splitlines()):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rsplit("\t", 1) if "\t" in line else line.rsplit(None, 1)
        if len(parts) != 2:
            raise LexiconError(f"{path}:{n + 1}: expected '<term>\\t<weight>'")
        out.append((parts[0].strip(), float(parts[1])))
    return out


def ngrams(tokens: Sequence[str]) -> tuple[list[str], list[str]]:
    """Lowercased unigrams and adjacent space-joined bigrams."""
    low = [t.lower() for t in tokens]
    return low, [f"{a} {b}" for a, b in zip(low, low[1:])]


def log_odds_scores(corpora: Iterable[PlatformDataset]) -> dict[str, float]:
    """|log-odds ratio| of teenager vs adult usage for every unigram and bigram.

    Counts are add-one smoothed; totals are kept per n-gram order so unigrams and
    bigrams are each compared against their own class totals.
    """
    counts = {1: [Counter(), Counter()], 2: [Counter(), Counter()]}
    for ds in corpora:
        for rec in ds.records:
            uni, bi = ngrams(tokenize(rec.text))
            counts[1][rec.label].update(uni)
            counts[2][rec.label].update(bi)

    scores: dict[str, float] = {}
    for order in (1, 2):
        adult, teen = counts[order]
        n_adult, n_teen = sum(adult.values()), sum(teen.values())
        for term in set(adult) | set(teen):
            c1, c0 = teen[term], adult[term]
            lor = math.log((c1 + 1) / (n_teen - c1 + 1)) - math.log((c0 + 1) / (n_adult - c0 + 1))
            scores[term] = abs(lor)
    return scores


def build_lexicon(
    external: Sequence[tuple[str, float]],
    corpora: Sequence[PlatformDataset],
    capacity: int = DEFAULT_CAPACITY,
) -> Lexicon:
    """Merge an external (term, weight) list with corpus log-odds candidates.

    External magnitudes are rescaled linearly onto the [min, max] range of the
    corpus scores (left as |weight| when there are no corpus candidates). A term
    present in both keeps the larger score. Ranking is score descending, then term
    ascending; the top ``capacity`` survive.
    """
    if capacity < 1:
        raise LexiconError(f"capacity must be >= 1, got {capacity}")
    external = [(str(t).lower(), float(w)) for t, w in external]
    corpora = list(corpora)
    if not external and not corpora:
        raise LexiconError("need an external lexicon or at least one corpus")
    for t, w in external:
        if not math.isfinite(w):
            raise LexiconError(f"external weight for {t!r} is not finite")

    scores = log_odds_scores(corpora) if corpora else {}
    if external:
        mags = {}
        for t, w in external:
            mags[t] = max(mags.get(t, 0.0), abs(w))
        if scores:
            lo, hi = min(scores.values()), max(scores.values())
            mlo, mhi = min(mags.values()), max(mags.values())
            span = mhi - mlo
            for t, m in mags.items():
                scaled = hi if span == 0 else lo + (m - mlo) / span * (hi - lo)
                scores[t] = max(scores.get(t, -math.inf), scaled)
        else:
            scores = mags

    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:capacity]
    return Lexicon(tuple(ranked), capacity=capacity)


@dataclass(frozen=True)
class TokenBudget:
    max_tokens: int
    floor: int = BUDGET_FLOOR
    encoder_max: int = ENCODER_MAX_TOKENS

    def __post_init__(self):
        if not self.floor <= self.max_tokens <= self.encoder_max:
            raise LexiconError(
                f"budget {self.max_tokens} outside [{self.floor}, {self.encoder_max}]"
            )


def compute_budget(
    target_stats: DatasetStats, encoder_max: int = ENCODER_MAX_TOKENS, floor: int = BUDGET_FLOOR
) -> TokenBudget:
    """Kept-token count from the target platform's mean length, half-up rounded."""
    if floor < 1 or floor > encoder_max:
        raise LexiconError(f"invalid floor/encoder_max pair ({floor}, {encoder_max})")
    if not math.isfinite(target_stats.avg_length) or target_stats.avg_length < 0:
        raise LexiconError(f"invalid avg_length {target_stats.avg_length}")
    rounded = math.floor(target_stats.avg_length + 0.5)
    return TokenBudget(min(max(rounded, floor), encoder_max), floor=floor, encoder_max=encoder_max)


def _token_weights(tokens: Sequence[str], lexicon: Lexicon) -> tuple[np.ndarray, np.ndarray]:
    uni, bi = ngrams(tokens)
    uw = np.array([lexicon.weight(t) for t in uni], dtype=np.float64)
    bw = np.array([lexicon.weight(b) for b in bi], dtype=np.float64)
    return uw, bw


def window_starts(n_tokens: int, width: int) -> list[int]:
    """Starts at multiples of width // 2, plus one flush with the end."""
    stride = max(1, width // 2)
    starts = list(range(0, n_tokens - width + 1, stride))
    if starts[-1] != n_tokens - width:
        starts.append(n_tokens - width)
    return starts


def select_windows(
    tokens: Sequence[str], lexicon: Lexicon, budget: int, width: int
) -> list[tuple[int, int]]:
    """Greedy non-overlapping windows in rank order; returns (start, end) pairs sorted by start.

    A window's score sums the weights of the unigrams in it and of the bigrams
    lying wholly inside it. Ranking is score descending, then start ascending.
    Windows are accepted while a whole window still fits in the budget.
    """
    n = len(tokens)
    uw, bw = _token_weights(tokens, lexicon)
    if not np.any(uw) and not np.any(bw):
        return [(0, min(budget, n))]
    cu = np.concatenate([[0.0], np.cumsum(uw)])
    cb = np.concatenate([[0.0], np.cumsum(bw)])
    starts = window_starts(n, width)
    scored = []
    for s in starts:
        e = s + width
        scored.append((-(cu[e] - cu[s] + cb[e - 1] - cb[s]), s))
    scored.sort()

    taken = np.zeros(n, dtype=bool)
    chosen = []
    remaining = budget
    for _, s in scored:
        if remaining < width:
            break
        if taken[s : s + width].any():
            continue
        taken[s : s + width] = True
        chosen.append((s, s + width))
        remaining -= width
    return sorted(chosen)


def concentrate(
    text: str, lexicon: Lexicon, budget: TokenBudget | int, fragment_width: int = BUDGET_FLOOR
) -> str:
    """Keep the most lexicon-dense fragments of ``text`` within the token budget.

    Texts that already fit are returned unchanged. Fragments are windows of
    ``min(budget, fragment_width)`` tokens, re-joined in original order. With no
    lexicon hits at all the text is prefix-truncated.
    """
    max_tokens = budget.max_tokens if isinstance(budget, TokenBudget) else int(budget)
    if max_tokens < 1:
        raise LexiconError("budget must be positive")
    tokens = tokenize(text)
    if not tokens:
        raise LexiconError("cannot concentrate an empty text")
    if len(tokens) <= max_tokens:
        return text
    width = min(max_tokens, fragment_width)
    spans = select_windows(tokens, lexicon, max_tokens, width)
    return " ".join(tok for s, e in spans for tok in tokens[s:e])


def align_corpus(
    dataset: PlatformDataset, lexicon: Lexicon, budget: TokenBudget | int, fragment_width: int = BUDGET_FLOOR
) -> PlatformDataset:
    texts = []
    for rec in dataset.records:
        try:
            texts.append(concentrate(rec.text, lexicon, budget, fragment_width))
        except LexiconError as exc:
            raise LexiconError(f"record {rec.id!r}: {exc}") from exc
    return dataset.with_texts(texts)
