"""Sentence encoders, source fine-tuning and source -> target initialization.

Two backends share one calling convention: ``encoder(texts) -> (n, dim)`` tensor.

* ``ToyEncoder``: hashed embedding-bag (mean pooled) followed by a 2-layer MLP.
  Small, float64, trains in seconds; used by tests and the synthetic experiment.
* ``TransformerEncoder``: a Hugging Face encoder; the sentence vector is the
  pooled first-position output.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

from .corpus import PlatformDataset

log = logging.getLogger(__name__)

BACKENDS = ("toy", "pretrained_transformer")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    backend: str = "toy"
    embedding_dim: int = 32
    max_tokens: int = 512
    vocab_size: int = 4096
    hidden_dim: int = 64
    model_name: Optional[str] = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown encoder backend {self.backend!r}")
        if self.embedding_dim < 1 or self.vocab_size < 1 or self.hidden_dim < 1:
            raise ValueError("encoder dimensions must be positive")
        if not 1 <= self.max_tokens <= 512:
            raise ValueError(f"max_tokens must lie in [1, 512], got {self.max_tokens}")
        if self.backend == "pretrained_transformer" and not self.model_name:
            raise ValueError("pretrained_transformer backend needs model_name")


def hash_token(token: str, vocab_size: int) -> int:
    return zlib.crc32(token.lower().encode("utf-8")) % vocab_size


class ToyEncoder(nn.Module):
    def __init__(self, config: EncoderConfig, seed: int = 0):
        super().__init__()
        self.config = config
        self.role = "source"
        self.seed = seed
        d, h = config.embedding_dim, config.hidden_dim
        self.embed = nn.EmbeddingBag(config.vocab_size, h, mode="mean")
        self.fc1 = nn.Linear(h, h)
        self.fc2 = nn.Linear(h, d)
        g = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            self.embed.weight.normal_(0.0, 1.0, generator=g)
            for layer in (self.fc1, self.fc2):
                bound = 1.0 / math.sqrt(layer.in_features)
                layer.weight.uniform_(-bound, bound, generator=g)
                layer.bias.zero_()
        self.double()

    @property
    def embedding_dim(self) -> int:
        return self.config.embedding_dim

    def token_ids(self, texts: Sequence[str]) -> tuple[torch.Tensor, torch.Tensor]:
        ids, offsets = [], []
        for text in texts:
            toks = text.split()[: self.config.max_tokens]
            if not toks:
                raise ValueError("text tokenizes to zero tokens")
            offsets.append(len(ids))
            ids.extend(hash_token(t, self.config.vocab_size) for t in toks)
        return torch.tensor(ids, dtype=torch.long), torch.tensor(offsets, dtype=torch.long)

    def forward(self, texts: Sequence[str]) -> torch.Tensor:
        ids, offsets = self.token_ids(texts)
        pooled = self.embed(ids, offsets)
        return self.fc2(torch.tanh(self.fc1(pooled)))


class TransformerEncoder(nn.Module):
    """Wraps a Hugging Face encoder model and its tokenizer."""

    def __init__(self, model, tokenizer, config: EncoderConfig, seed: int = 0):
        super().__init__()
        self.model = model
        self.tokenizer = tokenizer
        self.config = config
        self.role = "source"
        self.seed = seed
        hidden = model.config.hidden_size
        if hidden != config.embedding_dim:
            raise ValueError(f"model hidden size {hidden} != embedding_dim {config.embedding_dim}")

    @classmethod
    def from_pretrained(cls, config: EncoderConfig, seed: int = 0) -> "TransformerEncoder":
        from transformers import AutoModel, AutoTokenizer

        torch.manual_seed(seed)
        model = AutoModel.from_pretrained(config.model_name)
        tokenizer = AutoTokenizer.from_pretrained(config.model_name)
        return cls(model, tokenizer, config, seed)

    @property
    def embedding_dim(self) -> int:
        return self.config.embedding_dim

    def forward(self, texts: Sequence[str]) -> torch.Tensor:
        if any(not t.split() for t in texts):
            raise ValueError("text tokenizes to zero tokens")
        batch = self.tokenizer(
            list(texts),
            padding=True,
            truncation=True,
            max_length=self.config.max_tokens,
            return_tensors="pt",
        )
        out = self.model(**batch)
        pooled = getattr(out, "pooler_output", None)
        if pooled is None:
            pooled = out.last_hidden_state[:, 0]
        return pooled


def build_encoder(config: EncoderConfig, seed: int = 0) -> nn.Module:
    if config.backend == "toy":
        return ToyEncoder(config, seed)
    return TransformerEncoder.from_pretrained(config, seed)


def encode(encoder: nn.Module, text: str) -> np.ndarray:
    """Inference-mode embedding of one text."""
    was_training = encoder.training
    encoder.eval()
    try:
        with torch.no_grad():
            vec = encoder([text])[0]
    finally:
        encoder.train(was_training)
    out = vec.detach().cpu().numpy().astype(np.float64)
    if not np.all(np.isfinite(out)):
        raise TrainingError("encoder produced non-finite values")
    return out


def encode_batch(encoder: nn.Module, texts: Sequence[str], batch_size: int = 64) -> torch.Tensor:
    was_training = encoder.training
    encoder.eval()
    try:
        with torch.no_grad():
            parts = [encoder(list(texts[i : i + batch_size])) for i in range(0, len(texts), batch_size)]
    finally:
        encoder.train(was_training)
    return torch.cat(parts) if parts else torch.empty(0, encoder.embedding_dim)


def init_target_from_source(source: nn.Module) -> nn.Module:
    """Independent trainable copy of ``source`` tagged with role ``target``."""
    target = copy.deepcopy(source)
    target.role = "target"
    for p in target.parameters():
        p.requires_grad_(True)
    return target


def parameter_vector(module: nn.Module) -> torch.Tensor:
    return torch.cat([p.detach().reshape(-1).double() for p in module.parameters()])


def max_param_diff(a: nn.Module, b: nn.Module) -> float:
    pa, pb = list(a.parameters()), list(b.parameters())
    if [p.shape for p in pa] != [p.shape for p in pb]:
        raise ValueError("parameter shapes differ")
    return max((float((x.detach() - y.detach()).abs().max()) for x, y in zip(pa, pb)), default=0.0)


def iter_batches(n: int, batch_size: int, generator: torch.Generator):
    perm = torch.randperm(n, generator=generator).tolist()
    for i in range(0, n, batch_size):
        yield perm[i : i + batch_size]


def train_source_encoder(encoder: nn.Module, classifier: nn.Module, data: PlatformDataset, hp):
    """Jointly fit encoder and classifier with cross-entropy on labelled source data.

    Mutates both modules in place and returns ``(encoder, classifier, epoch_losses)``.
    """
    texts, labels = data.texts, torch.tensor(data.labels, dtype=torch.long)
    g = torch.Generator().manual_seed(hp.seed)
    opt = torch.optim.Adam(
        [
            {"params": encoder.parameters(), "lr": hp.encoder_lr},
            {"params": classifier.parameters(), "lr": hp.head_lr},
        ]
    )
    encoder.train()
    classifier.train()
    curve = []
    for epoch in range(hp.epochs):
        total, count = 0.0, 0
        for idx in iter_batches(len(texts), hp.batch_size, g):
            logits = classifier(encoder([texts[i] for i in idx]))
            loss = nn.functional.cross_entropy(logits, labels[idx])
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite source loss at epoch {epoch}, batch starting {idx[0]}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
            count += len(idx)
        curve.append(total / count)
        log.debug("source epoch %d loss %.4f", epoch, curve[-1])
    encoder.eval()
    classifier.eval()
    return encoder, classifier, curve


def save_checkpoint(module: nn.Module, path, manifest: dict) -> Path:
    """``torch.save`` the state dict and write a JSON sidecar next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(module.state_dict(), path)
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return sidecar


def encoder_manifest(encoder: nn.Module) -> dict:
    cfg = asdict(encoder.config)
    return {
        "backend": cfg["backend"],
        "embedding_dim": cfg["embedding_dim"],
        "max_tokens": cfg["max_tokens"],
        "role": getattr(encoder, "role", "source"),
        "seed": getattr(encoder, "seed", 0),
        "config": cfg,
    }


def save_encoder(encoder: nn.Module, path) -> Path:
    return save_checkpoint(encoder, path, encoder_manifest(encoder))


def load_encoder(path) -> nn.Module:
    path = Path(path)
    sidecar = path.with_suffix(path.suffix + ".json")
    manifest = json.loads(sidecar.read_text())
    config = EncoderConfig(**manifest["config"])
    encoder = build_encoder(config, manifest.get("seed", 0))
    encoder.load_state_dict(torch.load(path, weights_only=True))
    encoder.role = manifest.get("role", "source")
    return encoder
