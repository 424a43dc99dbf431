"""Adversarial target-encoder adaptation with an encoder-consistency KL term."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .encoder import encode_batch, save_checkpoint, save_encoder
from .heads import head_manifest

log = logging.getLogger(__name__)

LOG_CLAMP = 1e-12
_LOG_FLOOR = math.log(LOG_CLAMP)


class AdaptationError(RuntimeError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


@dataclass
class Hyperparams:
    batch_size: int = 16
    encoder_lr: float = 2e-5
    head_lr: float = 1e-3
    epochs: int = 4
    kl_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.encoder_lr <= 0 or self.head_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not self.kl_weight >= 0:
            raise ValueError("kl_weight must be >= 0")


@dataclass
class AdaptationState:
    source_encoder: nn.Module
    target_encoder: nn.Module
    discriminator: nn.Module
    step: int = 0
    d_losses: list[float] = field(default_factory=list)
    adv_losses: list[float] = field(default_factory=list)
    kl_losses: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)

    def __post_init__(self):
        for p in self.source_encoder.parameters():
            p.requires_grad_(False)


# -- losses on raw network outputs ---------------------------------------------


def clamped_log_sigmoid(logits: torch.Tensor) -> torch.Tensor:
    """log(sigmoid(z)) computed stably, floored at log(1e-12)."""
    return torch.clamp(F.logsigmoid(logits), min=_LOG_FLOOR)


def discriminator_bce(source_logits: torch.Tensor, target_logits: torch.Tensor) -> torch.Tensor:
    """-E_s[log D(source)] - E_t[log(1 - D(target))] from discriminator logits."""
    if source_logits.numel() == 0 or target_logits.numel() == 0:
        raise AdaptationError("discriminator loss needs non-empty source and target batches")
    # log(1 - sigmoid(z)) == logsigmoid(-z)
    return -clamped_log_sigmoid(source_logits).mean() - clamped_log_sigmoid(-target_logits).mean()


def inverted_label_bce(target_logits: torch.Tensor) -> torch.Tensor:
    """-E_t[log D(target)]: small when the discriminator calls target samples source."""
    if target_logits.numel() == 0:
        raise AdaptationError("adversarial loss needs a non-empty target batch")
    return -clamped_log_sigmoid(target_logits).mean()


def kl_divergence(p: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
    """KL(p || q) in nats for probability vectors, logs clamped at 1e-12."""
    logp = torch.log(torch.clamp(p, min=LOG_CLAMP))
    logq = torch.log(torch.clamp(q, min=LOG_CLAMP))
    return (p * (logp - logq)).sum()


def measure_kl(source_emb: torch.Tensor, target_emb: torch.Tensor) -> torch.Tensor:
    """KL between softmax-normalized batch-mean embeddings of the two encoders.

    Both arguments are embeddings of the *same* source inputs, one row per text.
    """
    if source_emb.shape[0] == 0:
        raise AdaptationError("encoder measure loss needs a non-empty source batch")
    if not (torch.isfinite(source_emb).all() and torch.isfinite(target_emb).all()):
        raise AdaptationError("non-finite encoder outputs")
    log_ps = F.log_softmax(source_emb.mean(dim=0), dim=-1)
    log_pt = F.log_softmax(target_emb.mean(dim=0), dim=-1)
    return (log_ps.exp() * (log_ps - log_pt)).sum()


# -- losses on (networks, texts) -----------------------------------------------


def discriminator_loss(D, M_S, M_T, source_batch: Sequence[str], target_batch: Sequence[str]) -> torch.Tensor:
    if not source_batch or not target_batch:
        raise AdaptationError("discriminator loss needs non-empty source and target batches")
    return discriminator_bce(D(M_S(list(source_batch))), D(M_T(list(target_batch))))


def encoder_measure_loss(M_S, M_T, source_batch: Sequence[str]) -> torch.Tensor:
    if not source_batch:
        raise AdaptationError("encoder measure loss needs a non-empty source batch")
    with torch.no_grad():
        src = M_S(list(source_batch))
    return measure_kl(src, M_T(list(source_batch)))


def adversarial_encoder_loss(D, M_T, target_batch: Sequence[str]) -> torch.Tensor:
    if not target_batch:
        raise AdaptationError("adversarial loss needs a non-empty target batch")
    return inverted_label_bce(D(M_T(list(target_batch))))


# -- training loop -------------------------------------------------------------


def _grad_norm(params) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(p.grad.detach().pow(2).sum())
    return math.sqrt(total)


def adapt_target(
    state: AdaptationState,
    source_texts: Sequence[str],
    target_texts: Sequence[str],
    hp: Hyperparams,
    checkpoint_dir=None,
) -> AdaptationState:
    """Alternate one discriminator step and one target-encoder step per batch.

    Each epoch walks the shuffled target texts in batches; source batches are
    drawn from a shuffled, cyclically reused source order. The discriminator
    minimizes the source-vs-target BCE with both encoders frozen; the target
    encoder then minimizes the inverted-label loss plus ``kl_weight`` times the
    encoder-measure KL on the source batch. Losses are recorded as computed
    within each step (before that step's update). With ``checkpoint_dir`` the
    target encoder and discriminator are saved at every epoch boundary.
    """
    if not source_texts or not target_texts:
        raise AdaptationError("adaptation needs non-empty source and target texts")
    M_S, M_T, D = state.source_encoder, state.target_encoder, state.discriminator
    if hp.epochs == 0:
        return state
    source_texts, target_texts = list(source_texts), list(target_texts)
    g = torch.Generator().manual_seed(hp.seed)
    opt_d = torch.optim.Adam(D.parameters(), lr=hp.head_lr)
    opt_t = torch.optim.Adam(M_T.parameters(), lr=hp.encoder_lr)
    M_S.eval()
    bs = hp.batch_size

    for epoch in range(hp.epochs):
        t_perm = torch.randperm(len(target_texts), generator=g).tolist()
        s_perm = torch.randperm(len(source_texts), generator=g).tolist()
        for b, i in enumerate(range(0, len(t_perm), bs)):
            tgt = [target_texts[k] for k in t_perm[i : i + bs]]
            src = [source_texts[s_perm[(b * bs + j) % len(s_perm)]] for j in range(bs)]
            step = state.step

            # discriminator step: encoders frozen
            D.train()
            with torch.no_grad():
                src_emb = M_S(src)
                tgt_emb = M_T(tgt)
            d_loss = discriminator_bce(D(src_emb), D(tgt_emb))
            if not torch.isfinite(d_loss):
                raise AdaptationError("non-finite discriminator loss", step)
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()

            # target-encoder step: discriminator and source encoder frozen
            M_T.train()
            D.eval()
            for p in D.parameters():
                p.requires_grad_(False)
            adv = inverted_label_bce(D(M_T(tgt)))
            if hp.kl_weight > 0:
                kl = measure_kl(src_emb, M_T(src))
                total = adv + hp.kl_weight * kl
            else:
                with torch.no_grad():
                    kl = measure_kl(src_emb, M_T(src))
                total = adv
            for p in D.parameters():
                p.requires_grad_(True)
            if not (torch.isfinite(adv) and torch.isfinite(kl)):
                raise AdaptationError("non-finite encoder loss", step)
            opt_t.zero_grad()
            total.backward()
            state.grad_norms.append(_grad_norm(M_T.parameters()))
            opt_t.step()

            state.d_losses.append(d_loss.item())
            state.adv_losses.append(adv.item())
            state.kl_losses.append(kl.item())
            state.step += 1
        if checkpoint_dir is not None:
            ck = Path(checkpoint_dir)
            save_encoder(M_T, ck / f"target_epoch{epoch + 1}.pt")
            save_checkpoint(D, ck / f"discriminator_epoch{epoch + 1}.pt", head_manifest(D))
        log.debug(
            "adapt epoch %d: d_loss %.4f adv %.4f kl %.6f",
            epoch, state.d_losses[-1], state.adv_losses[-1], state.kl_losses[-1],
        )
    M_T.eval()
    D.eval()
    return state


def predict_labels(probs: np.ndarray) -> np.ndarray:
    """Argmax over (adult, teenager); ties go to adult (0)."""
    probs = np.asarray(probs)
    return (probs[:, 1] > probs[:, 0]).astype(int)


def predict_target(M_T, C_s, texts: Sequence[str], batch_size: int = 64) -> list[int]:
    emb = encode_batch(M_T, list(texts), batch_size)
    with torch.no_grad():
        probs = torch.softmax(C_s(emb), dim=-1).numpy()
    return predict_labels(probs).tolist()


def discriminator_accuracy(D, M_S, M_T, source_texts: Sequence[str], target_texts: Sequence[str]) -> float:
    """Fraction of held-out embeddings the discriminator assigns to the right platform."""
    src = encode_batch(M_S, list(source_texts))
    tgt = encode_batch(M_T, list(target_texts))
    with torch.no_grad():
        ps = torch.sigmoid(D(src))
        pt = torch.sigmoid(D(tgt))
    correct = int((ps > 0.5).sum()) + int((pt <= 0.5).sum())
    return correct / (len(source_texts) + len(target_texts))


def write_trace_csv(state: AdaptationState, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "d_loss", "adv_loss", "kl_loss", "grad_norm"])
        for i, row in enumerate(zip(state.d_losses, state.adv_losses, state.kl_losses, state.grad_norms)):
            w.writerow([i, *(repr(v) for v in row)])
