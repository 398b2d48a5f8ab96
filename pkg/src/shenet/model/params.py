"""Learnable state of both generators, both discriminators and the projection head."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..diffcore import Tensor
from .config import ArchConfig

GENERATOR_GROUPS = ("encoder", "gem", "decoder", "projection_head")
DISCRIMINATOR_GROUPS = ("quality_disc", "pair_disc")


@dataclass
class ModelParams:
    config: ArchConfig
    encoder: dict = field(default_factory=dict)
    gem: dict = field(default_factory=dict)
    decoder: dict = field(default_factory=dict)
    projection_head: dict = field(default_factory=dict)
    quality_disc: dict = field(default_factory=dict)
    pair_disc: dict = field(default_factory=dict)

    def group(self, name: str) -> dict:
        return getattr(self, name)

    def named(self, groups=GENERATOR_GROUPS + DISCRIMINATOR_GROUPS):
        for g in groups:
            for k, t in self.group(g).items():
                yield f"{g}/{k}", t

    def generator_tensors(self) -> list:
        return [t for _, t in self.named(GENERATOR_GROUPS)]

    def discriminator_tensors(self) -> list:
        return [t for _, t in self.named(DISCRIMINATOR_GROUPS)]

    def set_trainable(self, groups, flag: bool) -> None:
        for _, t in self.named(groups):
            t.requires_grad = flag

    def zero_grad(self) -> None:
        for _, t in self.named():
            t.grad = None

    def checksum(self, groups=GENERATOR_GROUPS + DISCRIMINATOR_GROUPS) -> str:
        """SHA-256 over parameter names, shapes and raw bytes."""
        h = hashlib.sha256()
        for name, t in self.named(groups):
            h.update(name.encode())
            h.update(str(t.shape).encode())
            h.update(np.ascontiguousarray(t.data).tobytes())
        return h.hexdigest()

    def copy(self) -> "ModelParams":
        out = ModelParams(self.config)
        for g in GENERATOR_GROUPS + DISCRIMINATOR_GROUPS:
            setattr(out, g, {k: Tensor(t.data.copy(), requires_grad=t.requires_grad) for k, t in self.group(g).items()})
        return out

    def n_parameters(self) -> int:
        return sum(t.size for _, t in self.named())


def _he(rng, shape, fan_in):
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)


def _glorot(rng, shape, fan_in, fan_out):
    return rng.standard_normal(shape) * np.sqrt(2.0 / (fan_in + fan_out))


def init_params(cfg: ArchConfig, seed: int = 0, dtype=np.float64, init: str = "he") -> ModelParams:
    """Fresh parameters. ``init='he'`` (default) or ``'normal'`` (N(0, 0.02) weights).

    Biases start at zero. Draw order is fixed, so one seed gives one model.
    """
    rng = np.random.default_rng(seed)

    def w(shape, fan_in, fan_out=None):
        if init == "normal":
            arr = rng.standard_normal(shape) * 0.02
        elif fan_out is not None:
            arr = _glorot(rng, shape, fan_in, fan_out)
        else:
            arr = _he(rng, shape, fan_in)
        return Tensor(arr.astype(dtype), requires_grad=True)

    def zeros(n):
        return Tensor(np.zeros(n, dtype=dtype), requires_grad=True)

    p = ModelParams(cfg)
    c_prev = cfg.in_channels
    for i, c in enumerate(cfg.enc_channels):
        hid = cfg.cab_hidden(c)
        p.encoder[f"block{i}.conv1.w"] = w((c, c_prev, 3, 3), c_prev * 9)
        p.encoder[f"block{i}.conv1.b"] = zeros(c)
        p.encoder[f"block{i}.conv2.w"] = w((c, c, 3, 3), c * 9)
        p.encoder[f"block{i}.conv2.b"] = zeros(c)
        p.encoder[f"block{i}.cab.squeeze"] = w((hid, c), c)
        p.encoder[f"block{i}.cab.excite"] = w((c, hid), hid)
        c_prev = c
    gem = cfg.gem_channels
    p.encoder["map.w"] = w((gem[0], c_prev, 1, 1), c_prev)
    p.encoder["map.b"] = zeros(gem[0])

    d_prev = gem[0]
    for i, d in enumerate(gem):
        p.gem[f"gat{i}.w"] = w((cfg.heads, d, d_prev), d_prev, d)
        p.gem[f"gat{i}.a"] = w((cfg.heads, 2 * d), 2 * d, 1)
        d_prev = d

    c_prev = cfg.enc_channels[-1]
    p.decoder["map.w"] = w((c_prev, gem[-1], 1, 1), gem[-1])
    p.decoder["map.b"] = zeros(c_prev)
    for i, c in enumerate(cfg.dec_channels):
        # transposed-conv fan-in: each output pixel sees c_prev * (k/stride)^2 inputs
        p.decoder[f"block{i}.up.w"] = w((c_prev, c, 4, 4), c_prev * 4)
        p.decoder[f"block{i}.up.b"] = zeros(c)
        p.decoder[f"block{i}.conv1.w"] = w((c, c, 3, 3), c * 9)
        p.decoder[f"block{i}.conv1.b"] = zeros(c)
        p.decoder[f"block{i}.conv2.w"] = w((c, c, 3, 3), c * 9)
        p.decoder[f"block{i}.conv2.b"] = zeros(c)
        c_prev = c
    p.decoder["out.w"] = w((1, c_prev, 1, 1), c_prev, 1)
    p.decoder["out.b"] = zeros(1)

    d = gem[-1]
    p.projection_head["w1"] = w((d, d), d)
    p.projection_head["w2"] = w((cfg.proj_dim, d), d, cfg.proj_dim)

    for name, c_in in (("quality_disc", 1), ("pair_disc", 2)):
        group = p.group(name)
        prev = c_in
        widths = cfg.disc_channels + [1]
        for i, c in enumerate(widths):
            last = i == len(widths) - 1
            group[f"conv{i}.w"] = w((c, prev, 4, 4), prev * 16, 1) if last else w((c, prev, 4, 4), prev * 16)
            group[f"conv{i}.b"] = zeros(c)
            prev = c
    return p
