"""Training losses: L1, adversarial pair/quality terms, evolution contrastive term, and their combination."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .diffcore import Tensor
from .diffcore import ops as F

PROB_EPS = 1e-7


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class LossWeights:
    lam: float = 100.0  # L1 weight
    mu: float = 10.0  # evolution (contrastive) weight
    tau: float = 1.0  # temperature

    def __post_init__(self):
        if self.lam < 0 or self.mu < 0:
            raise ValueError("loss weights must be non-negative")
        if self.tau <= 0:
            raise ValueError("temperature must be positive")


@dataclass
class LossBreakdown:
    l1_p: float = 0.0
    l1_r: float = 0.0
    gan_pair_p: float = 0.0
    gan_pair_r: float = 0.0
    gan_qual_p: float = 0.0
    gan_qual_r: float = 0.0
    erm: float = 0.0
    total: float = 0.0
    total_d: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise F.DimensionError(f"l1_loss: {pred.shape} vs {target.shape}")
    return F.mean(F.abs(pred - target))


def _log_prob(d: Tensor) -> Tensor:
    return F.log(F.clamp(d, PROB_EPS, 1.0 - PROB_EPS))


def _gan_losses(d_real: Tensor | None, d_fake: Tensor):
    """Discriminator and (non-saturating) generator losses from sigmoid outputs."""
    g_loss = -F.mean(_log_prob(d_fake))
    if d_real is None:
        return None, g_loss
    d_loss = -F.mean(_log_prob(d_real)) - F.mean(F.log(F.clamp(1.0 - d_fake, PROB_EPS, 1.0 - PROB_EPS)))
    return d_loss, g_loss


def gan_pair_losses(d_real: Tensor | None, d_fake: Tensor):
    """Losses for the pair discriminator fed (condition, candidate) stacks.

    ``d_loss = -mean log D(real) - mean log(1 - D(fake))``;
    ``g_loss = -mean log D(fake)``. Pass ``d_real=None`` for the generator side only.
    """
    return _gan_losses(d_real, d_fake)


def gan_quality_losses(d_real: Tensor | None, d_fake: Tensor):
    """Same functional form as :func:`gan_pair_losses`, on unconditioned images."""
    return _gan_losses(d_real, d_fake)


def erm_loss(z_pred: Tensor, z_t2: Tensor, z_t1: Tensor, tau: float = 1.0, negatives: Tensor | None = None) -> Tensor:
    """Contrastive evolution loss, averaged over the batch.

    With the single pre-therapy negative this is
    ``-log(exp(sim(z~, z2)/tau) / exp(sim(z~, z1)/tau)) = (sim(z~, z1) - sim(z~, z2)) / tau``.
    ``negatives`` (``(N, K, d)``) switches to the InfoNCE form with ``z_t1`` and
    the extra negatives in the denominator next to the positive.
    """
    pos = F.cosine_similarity(z_pred, z_t2)
    neg = F.cosine_similarity(z_pred, z_t1)
    if negatives is None:
        return F.mean(F.mul(neg - pos, 1.0 / tau))
    n, k, d = negatives.shape
    zp = F.reshape(z_pred, (n, 1, d))
    zp = F.concat([zp] * k, axis=1)
    extra = F.cosine_similarity(zp, negatives)  # (N, K)
    logits = F.concat([F.reshape(pos, (n, 1)), F.reshape(neg, (n, 1)), extra], axis=1)
    logits = F.mul(logits, 1.0 / tau)
    m = logits.data.max(axis=1, keepdims=True)
    lse = F.add(F.log(F.sum(F.exp(logits - Tensor(m.repeat(logits.shape[1], axis=1))), axis=1)), Tensor(m[:, 0]))
    return F.mean(lse - F.mul(pos, 1.0 / tau))


def erm_loss_logform(z_pred, z_t2, z_t1, tau: float = 1.0) -> Tensor:
    """The contrastive quotient evaluated literally through exp and log."""
    num = F.exp(F.mul(F.cosine_similarity(z_pred, z_t2), 1.0 / tau))
    den = F.exp(F.mul(F.cosine_similarity(z_pred, z_t1), 1.0 / tau))
    return F.mean(-(F.log(num) - F.log(den)))


def total_objective(terms: dict, weights: LossWeights) -> Tensor:
    """Generator objective: four adversarial terms + lam * (both L1) + mu * ERM.

    ``terms`` maps names of :class:`LossBreakdown` fields to scalar Tensors;
    absent terms count as zero (used by ablations).
    """
    total = None
    for name, value in terms.items():
        if not math.isfinite(float(value.data)):
            raise TrainingError(f"loss component {name} is not finite")
    parts = []
    for name in ("gan_pair_p", "gan_pair_r", "gan_qual_p", "gan_qual_r"):
        if name in terms:
            parts.append(terms[name])
    for name in ("l1_p", "l1_r"):
        if name in terms:
            parts.append(F.mul(terms[name], weights.lam))
    if "erm" in terms:
        parts.append(F.mul(terms["erm"], weights.mu))
    for p in parts:
        total = p if total is None else total + p
    return total if total is not None else Tensor(0.0)


def combine(breakdown: LossBreakdown, weights: LossWeights) -> float:
    """Scalar recombination of a breakdown (used to audit ``total``)."""
    b = breakdown
    return (
        b.gan_pair_p + b.gan_pair_r + b.gan_qual_p + b.gan_qual_r
        + weights.lam * (b.l1_p + b.l1_r)
        + weights.mu * b.erm
    )
