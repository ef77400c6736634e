"""Training objectives at desk scale, with analytic gradients.

Operates directly on embedding matrices; no encoder parameters exist here.
Three objectives:

* ``inbatch_nll``: for each row i, cross-entropy of q_i against the inner
  products with all 2B batch documents (every positive and negative), the
  positive being pos_i.
* ``triplet_loss``: mean hinge max(0, ||q - pos|| - ||q - neg|| + alpha) with
  Euclidean distances; the subgradient at an exactly-zero margin is 0.
* ``combined_loss``: beta * inbatch + (1 - beta) * triplet.

Gradients are returned with respect to the three embedding matrices and are
validated against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LossGrads:
    q: np.ndarray
    pos: np.ndarray
    neg: np.ndarray


@dataclass
class LossBatch:
    q_embs: np.ndarray    # B x dim
    pos_embs: np.ndarray  # B x dim
    neg_embs: np.ndarray  # B x dim
    alpha: float = 5.0    # triplet margin
    beta: float = 0.9     # combined-loss weight on the in-batch term

    def __post_init__(self):
        self.q_embs = np.asarray(self.q_embs, dtype=np.float64)
        self.pos_embs = np.asarray(self.pos_embs, dtype=np.float64)
        self.neg_embs = np.asarray(self.neg_embs, dtype=np.float64)
        if self.q_embs.ndim != 2 or self.q_embs.shape[0] < 1:
            raise ValueError(f"q_embs must be a non-empty 2-D matrix, got {self.q_embs.shape}")
        if self.pos_embs.shape != self.q_embs.shape or self.neg_embs.shape != self.q_embs.shape:
            raise ValueError(
                f"inconsistent shapes: q {self.q_embs.shape}, pos {self.pos_embs.shape}, "
                f"neg {self.neg_embs.shape}"
            )
        for name, arr in (("q", self.q_embs), ("pos", self.pos_embs), ("neg", self.neg_embs)):
            if not np.isfinite(arr).all():
                raise ValueError(f"{name}_embs contains non-finite values")

    @property
    def size(self) -> int:
        return self.q_embs.shape[0]


def inbatch_nll(batch: LossBatch) -> tuple[float, LossGrads]:
    """Mean negative log-likelihood of each positive among all 2B batch docs."""
    b = batch.size
    docs = np.vstack([batch.pos_embs, batch.neg_embs])      # 2B x dim
    logits = batch.q_embs @ docs.T                          # B x 2B
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    rows = np.arange(b)
    log_probs = shifted[rows, rows] - np.log(exp.sum(axis=1))
    loss = float(-log_probs.mean())

    dlogits = probs.copy()
    dlogits[rows, rows] -= 1.0
    dlogits /= b
    gq = dlogits @ docs
    gdocs = dlogits.T @ batch.q_embs
    return loss, LossGrads(q=gq, pos=gdocs[:b], neg=gdocs[b:])


def triplet_loss(batch: LossBatch) -> tuple[float, LossGrads]:
    """Mean Euclidean triplet hinge with margin ``alpha``."""
    diff_pos = batch.q_embs - batch.pos_embs
    diff_neg = batch.q_embs - batch.neg_embs
    dist_pos = np.linalg.norm(diff_pos, axis=1)
    dist_neg = np.linalg.norm(diff_neg, axis=1)
    margin = dist_pos - dist_neg + batch.alpha
    active = margin > 0.0
    loss = float(np.maximum(margin, 0.0).mean())

    b = batch.size
    # unit direction vectors; zero-distance pairs contribute a 0 subgradient
    with np.errstate(divide="ignore", invalid="ignore"):
        unit_pos = np.where(dist_pos[:, None] > 0, diff_pos / dist_pos[:, None], 0.0)
        unit_neg = np.where(dist_neg[:, None] > 0, diff_neg / dist_neg[:, None], 0.0)
    mask = active[:, None].astype(np.float64) / b
    gq = mask * (unit_pos - unit_neg)
    gpos = mask * -unit_pos
    gneg = mask * unit_neg
    return loss, LossGrads(q=gq, pos=gpos, neg=gneg)


def combined_loss(batch: LossBatch) -> tuple[float, LossGrads]:
    """Weighted sum beta * in-batch + (1 - beta) * triplet."""
    if not 0.0 <= batch.beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {batch.beta}")
    li, gi = inbatch_nll(batch)
    lt, gt = triplet_loss(batch)
    w = batch.beta
    return w * li + (1.0 - w) * lt, LossGrads(
        q=w * gi.q + (1.0 - w) * gt.q,
        pos=w * gi.pos + (1.0 - w) * gt.pos,
        neg=w * gi.neg + (1.0 - w) * gt.neg,
    )


__all__ = ["LossBatch", "LossGrads", "inbatch_nll", "triplet_loss", "combined_loss"]
