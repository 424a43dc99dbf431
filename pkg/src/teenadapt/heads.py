"""Platform discriminator and teenager classifier heads."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

INIT_RANGE = 0.05
ADAPTIVE_HIDDEN = 512
DISCRIMINATOR_HIDDEN = 256
VARIANTS = ("adaptive", "baseline")


def _init_uniform(module: nn.Module, generator: torch.Generator, scale: float = INIT_RANGE) -> None:
    with torch.no_grad():
        for p in module.parameters():
            p.uniform_(-scale, scale, generator=generator)


def _as_batch(v, dim: int, dtype) -> torch.Tensor:
    t = torch.as_tensor(v, dtype=dtype)
    if t.dim() == 1:
        t = t.unsqueeze(0)
    if t.shape[-1] != dim:
        raise ValueError(f"expected embedding of dim {dim}, got {t.shape[-1]}")
    return t


class Discriminator(nn.Module):
    """FC -> ReLU -> FC; ``forward`` returns the source-origin logit."""

    def __init__(self, embedding_dim: int, hidden_dim: int = DISCRIMINATOR_HIDDEN, seed: int = 0):
        super().__init__()
        self.embedding_dim = embedding_dim
        self.hidden_dim = hidden_dim
        self.seed = seed
        self.fc1 = nn.Linear(embedding_dim, hidden_dim)
        self.fc2 = nn.Linear(hidden_dim, 1)
        _init_uniform(self, torch.Generator().manual_seed(seed))
        self.double()

    def forward(self, emb: torch.Tensor) -> torch.Tensor:
        if emb.shape[-1] != self.embedding_dim:
            raise ValueError(f"expected embedding of dim {self.embedding_dim}, got {emb.shape[-1]}")
        return self.fc2(torch.relu(self.fc1(emb.to(self.fc1.weight.dtype)))).squeeze(-1)


class Classifier(nn.Module):
    """Two-class head; ``forward`` returns logits.

    ``adaptive``: Linear(dim, 512) -> ReLU -> Linear(512, 2).
    ``baseline``: a single Linear(dim, 2).
    """

    def __init__(self, embedding_dim: int, variant: str = "adaptive", seed: int = 0):
        super().__init__()
        if variant not in VARIANTS:
            raise ValueError(f"unknown classifier variant {variant!r}")
        self.embedding_dim = embedding_dim
        self.variant = variant
        self.seed = seed
        if variant == "adaptive":
            self.net = nn.Sequential(
                nn.Linear(embedding_dim, ADAPTIVE_HIDDEN), nn.ReLU(), nn.Linear(ADAPTIVE_HIDDEN, 2)
            )
        else:
            self.net = nn.Sequential(nn.Linear(embedding_dim, 2))
        _init_uniform(self, torch.Generator().manual_seed(seed))
        self.double()

    @property
    def hidden_width(self):
        return ADAPTIVE_HIDDEN if self.variant == "adaptive" else None

    @property
    def output_layer(self) -> nn.Linear:
        return self.net[-1]

    def forward(self, emb: torch.Tensor) -> torch.Tensor:
        if emb.shape[-1] != self.embedding_dim:
            raise ValueError(f"expected embedding of dim {self.embedding_dim}, got {emb.shape[-1]}")
        return self.net(emb.to(self.output_layer.weight.dtype))


def discriminate(params: Discriminator, v) -> np.ndarray | float:
    """Probability that ``v`` came from the source encoder."""
    t = _as_batch(v, params.embedding_dim, params.fc1.weight.dtype)
    with torch.no_grad():
        p = torch.sigmoid(params(t)).numpy()
    return float(p[0]) if np.ndim(v) == 1 else p


def classify(params: Classifier, v) -> np.ndarray:
    """(adult, teenager) probabilities, one row per embedding."""
    t = _as_batch(v, params.embedding_dim, params.output_layer.weight.dtype)
    with torch.no_grad():
        p = torch.softmax(params(t), dim=-1).numpy()
    return p[0] if np.ndim(v) == 1 else p


def head_manifest(head: nn.Module) -> dict:
    if isinstance(head, Classifier):
        return {"kind": "classifier", "variant": head.variant, "dims": [head.embedding_dim, 2], "seed": head.seed}
    return {
        "kind": "discriminator",
        "variant": "fc2",
        "dims": [head.embedding_dim, head.hidden_dim, 1],
        "seed": head.seed,
    }
