"""Architecture configuration."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ArchConfig:
    """Network sizes. Channel counts are full-scale; ``toy_scale`` divides them."""

    input_size: tuple = (512, 512)
    delta_s: int = 1
    enc_dims: tuple = (128, 256, 512, 1024, 2048)
    gem_dims: tuple = (1024, 1024, 1024)
    heads: int = 5
    toy_scale: int = 1
    cab_reduction: int = 16
    proj_dim: int = 128
    disc_dims: tuple = (64, 128, 256, 512)
    slope: float = 0.2
    gem_aggregate: str = "center"  # center: gamma W h_p as printed | neighbors: gamma W h_q

    def __post_init__(self):
        h, w = self.input_size
        f = 2 ** len(self.enc_dims)
        if h % f or w % f:
            raise ConfigError(f"input size {self.input_size} not divisible by 2^{len(self.enc_dims)}")
        if self.delta_s < 0 or self.heads < 1 or self.toy_scale < 1:
            raise ConfigError("delta_s must be >= 0, heads and toy_scale >= 1")
        if self.gem_aggregate not in ("neighbors", "center"):
            raise ConfigError(f"gem_aggregate must be neighbors or center, got {self.gem_aggregate!r}")
        if len(self.gem_dims) < 1:
            raise ConfigError("at least one GEM layer is required")

    @classmethod
    def toy(cls, **overrides) -> "ArchConfig":
        base = dict(input_size=(64, 64), toy_scale=16)
        base.update(overrides)
        return cls(**base)

    def _scaled(self, dims) -> list:
        return [max(1, d // self.toy_scale) for d in dims]

    @property
    def in_channels(self) -> int:
        return 2 * self.delta_s + 1

    @property
    def enc_channels(self) -> list:
        return self._scaled(self.enc_dims)

    @property
    def gem_channels(self) -> list:
        return self._scaled(self.gem_dims)

    @property
    def dec_channels(self) -> list:
        enc = self.enc_channels
        return enc[::-1][1:] + [enc[0]]

    @property
    def disc_channels(self) -> list:
        return self._scaled(self.disc_dims)

    @property
    def latent_size(self) -> tuple:
        f = 2 ** len(self.enc_dims)
        return (self.input_size[0] // f, self.input_size[1] // f)

    @property
    def n_vertices(self) -> int:
        h, w = self.latent_size
        return h * w

    def cab_hidden(self, channels: int) -> int:
        return max(1, channels // self.cab_reduction)

    def to_text(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if isinstance(v, (tuple, list)):
                v = ",".join(str(x) for x in v)
            lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ArchConfig":
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in types:
                raise ConfigError(f"unknown ArchConfig key {key!r}")
            default = getattr(cls, key)
            if isinstance(default, tuple):
                kw[key] = tuple(int(x) for x in val.split(","))
            elif isinstance(default, float):
                kw[key] = float(val)
            elif isinstance(default, str):
                kw[key] = val.strip()
            else:
                kw[key] = int(val)
        return cls(**kw)
