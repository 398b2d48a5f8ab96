"""Training and experiment configuration, stored as plain-text ``key=value`` lines."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from ..model import ArchConfig
from ..objective import LossWeights


class ConfigFileError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    lr_schedule: str = "linear"  # linear (to lr/epochs at the last epoch) | constant
    weight_decay: float = 0.1
    batch: int = 2
    epochs: int = 100
    delta_s: int = 1
    toy_scale: int = 1
    image_size: int = 512
    slices: int = 128
    seed: int = 0
    lam: float = 100.0
    mu: float = 10.0
    tau: float = 1.0
    use_gem: bool = True
    gem_aggregate: str = "center"  # or neighbors
    use_erm: bool = True
    use_recon: bool = True
    disc: str = "both"  # q | p | both
    augment: bool = True
    finetune_epochs: int = 5
    dtype: str = "float32"
    calibrate: bool = True  # LSUV rescale of fresh generator weights on the first training batch
    # data for experiment drivers
    synth_patients: int = 8
    synth_timepoints: int = 6
    synth_seed: int = 0
    raw_depth: int = 0  # 0: twice the image size
    n_folds: int = 5
    split_seed: int = 0
    register_shift: int = 3

    def __post_init__(self):
        if self.lr <= 0 or self.weight_decay < 0 or self.tau <= 0:
            raise ConfigFileError("lr and tau must be positive, weight_decay non-negative")
        if self.batch < 1 or self.epochs < 0 or self.finetune_epochs < 0:
            raise ConfigFileError("batch must be >= 1; epoch counts non-negative")
        if self.disc not in ("q", "p", "both"):
            raise ConfigFileError(f"disc must be q, p or both, got {self.disc!r}")
        if self.lr_schedule not in ("linear", "constant"):
            raise ConfigFileError(f"lr_schedule must be linear or constant, got {self.lr_schedule!r}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigFileError("dtype must be float32 or float64")

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.lam, self.mu, self.tau)

    @property
    def erm_active(self) -> bool:
        # the ERM positive comes from the reconstruction path's encoding of t2
        return self.use_erm and self.use_recon

    def epoch_lr(self, epoch: int, epochs: int) -> float:
        """Learning rate for 0-based ``epoch`` of a run of ``epochs``."""
        if self.lr_schedule == "constant" or epochs <= 1:
            return self.lr
        return self.lr * (1.0 - epoch / epochs)

    def arch(self) -> ArchConfig:
        return ArchConfig(
            input_size=(self.image_size, self.image_size), delta_s=self.delta_s, toy_scale=self.toy_scale, gem_aggregate=self.gem_aggregate
        )

    def with_(self, **kw) -> "TrainConfig":
        return replace(self, **kw)

    def to_text(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        types = {f.name: type(f.default) for f in fields(cls)}
        kw = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigFileError(f"line {n}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigFileError(f"line {n}: unknown key {key!r}")
            kw[key] = _parse(val, types[key], key)
        return cls(**kw)

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text())
        return path

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_text(Path(path).read_text())


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(val: str, typ, key: str):
    try:
        if typ is bool:
            low = val.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(val)
            return low in ("true", "1", "yes")
        return typ(val)
    except ValueError:
        raise ConfigFileError(f"{key}: cannot parse {val!r} as {typ.__name__}") from None


def toy_config(**kw) -> TrainConfig:
    """The desk-scale acceptance profile; see ``configs/toy_acceptance.cfg``."""
    base = dict(image_size=64, slices=16, toy_scale=16, epochs=30, synth_patients=8, synth_timepoints=6)
    base.update(kw)
    return TrainConfig(**base)
