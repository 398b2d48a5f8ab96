"""Alternating discriminator / generator optimization.

Per batch: one shared generator forward (prediction and reconstruction paths
batched through the encoder together), one discriminator update against both
generators' detached fakes, then one generator update through the freshly
updated discriminators.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..diffcore import Tensor, backward, no_grad
from ..diffcore import ops as F
from ..model import (
    DISCRIMINATOR_GROUPS,
    GENERATOR_GROUPS,
    ModelParams,
    decoder_forward,
    discriminator_forward,
    encoder_forward,
    gem_apply,
    projection_head,
    save_checkpoint,
)
from ..objective import (
    LossBreakdown,
    LossWeights,
    TrainingError,
    erm_loss,
    gan_pair_losses,
    gan_quality_losses,
    l1_loss,
    total_objective,
)
from ..data.stack import augment as augment_sample
from .config import TrainConfig
from .optim import AdamState, adam_step

LOSS_COLUMNS = ("step", "l1_p", "l1_r", "gan_pair_p", "gan_pair_r", "gan_qual_p", "gan_qual_r", "erm", "total_g", "total_d")
SAMPLE_KEYS = ("stack_t1", "stack_t2", "center_t1", "target_t2")


@dataclass
class OptStates:
    generator: AdamState = field(default_factory=AdamState)
    discriminator: AdamState = field(default_factory=AdamState)


@dataclass(frozen=True)
class Variant:
    """Which parts of the model take part in training."""

    use_gem: bool = True
    use_recon: bool = True
    use_erm: bool = True
    disc: str = "both"

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> "Variant":
        return cls(cfg.use_gem, cfg.use_recon, cfg.erm_active, cfg.disc)

    @property
    def use_q(self) -> bool:
        return self.disc in ("q", "both")

    @property
    def use_p(self) -> bool:
        return self.disc in ("p", "both")


def _group_params(params: ModelParams, groups) -> dict:
    return dict(params.named(groups))


def _grads(named: dict) -> dict:
    return {k: t.grad for k, t in named.items()}


def generator_forward(batch: dict, params: ModelParams, variant: Variant) -> dict:
    """Prediction ``x_pred`` and, if enabled, reconstruction ``x_rec`` plus latents."""
    n = batch["stack_t1"].shape[0]
    stacks = batch["stack_t1"]
    if variant.use_recon:
        stacks = np.concatenate([batch["stack_t1"], batch["stack_t2"]])
    f = encoder_forward(Tensor(stacks), params.encoder)
    f_in = F.getitem(f, slice(0, n)) if variant.use_recon else f
    f_pred = gem_apply(f_in, params) if variant.use_gem else f_in
    out = {"f_in": f_in, "f_pred": f_pred}
    if variant.use_recon:
        f_t2 = F.getitem(f, slice(n, 2 * n))
        x = decoder_forward(F.concat([f_pred, f_t2], axis=0), params.decoder)
        out["x_pred"], out["x_rec"] = F.getitem(x, slice(0, n)), F.getitem(x, slice(n, 2 * n))
        out["f_t2"] = f_t2
    else:
        out["x_pred"] = decoder_forward(f_pred, params.decoder)
    return out


def _pair_input(center: np.ndarray, candidate) -> Tensor:
    # condition channel first, candidate second
    cand = candidate if isinstance(candidate, Tensor) else Tensor(candidate)
    return F.concat([Tensor(center), cand], axis=1)


def discriminator_step(batch: dict, fakes: dict, params: ModelParams, state: AdamState, cfg: TrainConfig, variant: Variant) -> dict:
    """One update of the active discriminators. ``fakes`` are plain arrays (detached)."""
    real = batch["target_t2"]
    center = batch["center_t1"]
    fake_list = [fakes["x_pred"]] + ([fakes["x_rec"]] if "x_rec" in fakes else [])
    n = real.shape[0]
    params.set_trainable(GENERATOR_GROUPS, False)
    params.set_trainable(DISCRIMINATOR_GROUPS, True)
    losses = {}
    total = None
    if variant.use_q:
        d = discriminator_forward(Tensor(np.concatenate([real] + fake_list)), params.quality_disc, params.config.slope)
        d_real = F.getitem(d, slice(0, n))
        for i, name in enumerate(("p", "r")[: len(fake_list)]):
            d_loss, _ = gan_quality_losses(d_real, F.getitem(d, slice((i + 1) * n, (i + 2) * n)))
            losses[f"d_qual_{name}"] = d_loss
    if variant.use_p:
        cands = np.concatenate([real] + fake_list)
        conds = np.concatenate([center] * (1 + len(fake_list)))
        d = discriminator_forward(_pair_input(conds, cands), params.pair_disc, params.config.slope)
        d_real = F.getitem(d, slice(0, n))
        for i, name in enumerate(("p", "r")[: len(fake_list)]):
            d_loss, _ = gan_pair_losses(d_real, F.getitem(d, slice((i + 1) * n, (i + 2) * n)))
            losses[f"d_pair_{name}"] = d_loss
    for v in losses.values():
        total = v if total is None else total + v
    if total is None:
        return {"total_d": 0.0}
    if not math.isfinite(total.item()):
        raise TrainingError(f"non-finite discriminator loss; breakdown { {k: v.item() for k, v in losses.items()} }")
    named = _group_params(params, DISCRIMINATOR_GROUPS)
    for t in named.values():
        t.grad = None
    backward(total)
    adam_step(named, _grads(named), state, cfg.lr, cfg.weight_decay)
    params.set_trainable(GENERATOR_GROUPS, True)
    out = {k: v.item() for k, v in losses.items()}
    out["total_d"] = total.item()
    return out


def generator_terms(batch: dict, gen: dict, params: ModelParams, variant: Variant, weights: LossWeights) -> dict:
    """Loss terms of the generator objective, differentiable w.r.t. the generator only."""
    params.set_trainable(DISCRIMINATOR_GROUPS, False)
    target = Tensor(batch["target_t2"])
    center = batch["center_t1"]
    n = target.shape[0]
    fakes = [("p", gen["x_pred"])] + ([("r", gen["x_rec"])] if "x_rec" in gen else [])
    terms = {}
    for name, x in fakes:
        terms[f"l1_{name}"] = l1_loss(x, target)
    stacked = F.concat([x for _, x in fakes], axis=0)
    if variant.use_q:
        d = discriminator_forward(stacked, params.quality_disc, params.config.slope)
        for i, (name, _) in enumerate(fakes):
            terms[f"gan_qual_{name}"] = gan_quality_losses(None, F.getitem(d, slice(i * n, (i + 1) * n)))[1]
    if variant.use_p:
        conds = np.concatenate([center] * len(fakes))
        d = discriminator_forward(_pair_input(conds, stacked), params.pair_disc, params.config.slope)
        for i, (name, _) in enumerate(fakes):
            terms[f"gan_pair_{name}"] = gan_pair_losses(None, F.getitem(d, slice(i * n, (i + 1) * n)))[1]
    if variant.use_erm and "f_t2" in gen:
        ph = params.projection_head
        z = projection_head(F.concat([gen["f_pred"], gen["f_t2"], gen["f_in"]], axis=0), ph["w1"], ph["w2"])
        terms["erm"] = erm_loss(
            F.getitem(z, slice(0, n)), F.getitem(z, slice(n, 2 * n)), F.getitem(z, slice(2 * n, 3 * n)), weights.tau
        )
    return terms


def generator_step(batch: dict, gen: dict, params: ModelParams, state: AdamState, cfg: TrainConfig, variant: Variant) -> dict:
    terms = generator_terms(batch, gen, params, variant, cfg.weights)
    try:
        total = total_objective(terms, cfg.weights)
    except TrainingError as exc:
        snap = {k: v.item() for k, v in terms.items()}
        raise TrainingError(f"{exc}; breakdown {snap}") from None
    named = _group_params(params, GENERATOR_GROUPS)
    for t in named.values():
        t.grad = None
    backward(total)
    adam_step(named, _grads(named), state, cfg.lr, cfg.weight_decay)
    params.set_trainable(DISCRIMINATOR_GROUPS, True)
    out = {k: v.item() for k, v in terms.items()}
    out["total"] = total.item()
    return out


def train_step(batch: dict, params: ModelParams, opt: OptStates, cfg: TrainConfig, variant: Variant | None = None) -> LossBreakdown:
    """One discriminator update followed by one generator update."""
    variant = variant or Variant.from_config(cfg)
    params.set_trainable(GENERATOR_GROUPS, True)
    params.set_trainable(DISCRIMINATOR_GROUPS, False)
    gen = generator_forward(batch, params, variant)
    fakes = {k: gen[k].data.copy() for k in ("x_pred", "x_rec") if k in gen}
    d_out = discriminator_step(batch, fakes, params, opt.discriminator, cfg, variant)
    g_out = generator_step(batch, gen, params, opt.generator, cfg, variant)
    bd = LossBreakdown(**{k: v for k, v in g_out.items() if k in LossBreakdown.__dataclass_fields__})
    bd.total_d = d_out["total_d"]
    return bd


# ---------------------------------------------------------------------------
# loop


def cast_samples(samples: dict, dtype) -> dict:
    return {k: np.ascontiguousarray(samples[k], dtype=dtype) for k in SAMPLE_KEYS}


def concat_samples(sample_list) -> dict:
    return {k: np.concatenate([s[k] for s in sample_list]) for k in SAMPLE_KEYS}


def iter_batches(samples: dict, batch: int, rng: np.random.Generator, augment: bool):
    n = samples["stack_t1"].shape[0]
    order = rng.permutation(n)
    for start in range(0, n, batch):
        idx = order[start : start + batch]
        items = {k: samples[k][idx] for k in SAMPLE_KEYS}
        if augment:
            for i in range(len(idx)):
                out = augment_sample([items[k][i] for k in SAMPLE_KEYS], rng)
                for k, a in zip(SAMPLE_KEYS, out):
                    items[k][i] = a
        yield items


class LossLog:
    """Per-step loss CSV."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self.rows = []
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "w", newline="") as fh:
                csv.writer(fh).writerow(LOSS_COLUMNS)

    def append(self, step: int, bd: LossBreakdown) -> None:
        row = [step, bd.l1_p, bd.l1_r, bd.gan_pair_p, bd.gan_pair_r, bd.gan_qual_p, bd.gan_qual_r, bd.erm, bd.total, bd.total_d]
        self.rows.append(row)
        if self.path:
            with open(self.path, "a", newline="") as fh:
                csv.writer(fh).writerow([row[0]] + [f"{v:.8g}" for v in row[1:]])


def train(
    samples: dict,
    params: ModelParams,
    cfg: TrainConfig,
    epochs: int | None = None,
    out_dir=None,
    log=None,
    opt: OptStates | None = None,
    seed_offset: int = 0,
    progress=None,
) -> OptStates:
    """Train for ``epochs`` (default ``cfg.epochs``); checkpoint to ``out_dir/checkpoint.npz`` after every epoch."""
    epochs = cfg.epochs if epochs is None else epochs
    variant = Variant.from_config(cfg)
    dtype = np.dtype(cfg.dtype)
    samples = cast_samples(samples, dtype)
    opt = opt or OptStates()
    rng = np.random.default_rng([cfg.seed, 7919, seed_offset])
    log = log if isinstance(log, LossLog) else LossLog(log)
    step = opt.generator.step
    for epoch in range(epochs):
        ecfg = cfg.with_(lr=cfg.epoch_lr(epoch, epochs))
        for batch in iter_batches(samples, cfg.batch, rng, cfg.augment):
            bd = train_step(batch, params, opt, ecfg, variant)
            step += 1
            log.append(step, bd)
        if out_dir is not None:
            save_checkpoint(Path(out_dir) / "checkpoint.npz", params)
        if progress is not None:
            progress(epoch, log)
    params.zero_grad()
    return opt


# ---------------------------------------------------------------------------
# inference


def predict_stacks(stacks: np.ndarray, params: ModelParams, use_gem: bool = True, chunk: int = 8) -> np.ndarray:
    """Predicted B-scans ``(S, H, W)`` in [-1, 1] for input stacks ``(S, C, H, W)``."""
    dtype = params.encoder["map.w"].dtype
    out = []
    with no_grad():
        for start in range(0, stacks.shape[0], chunk):
            x = Tensor(np.ascontiguousarray(stacks[start : start + chunk], dtype=dtype))
            f = encoder_forward(x, params.encoder)
            if use_gem:
                f = gem_apply(f, params)
            out.append(decoder_forward(f, params.decoder).data[:, 0])
    return np.concatenate(out) if out else np.zeros((0,) + stacks.shape[-2:], dtype=dtype)
