"""Checkpoint archive: ``group/name`` -> little-endian float32 arrays plus the ArchConfig text."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..diffcore import Tensor
from .config import ArchConfig
from .params import DISCRIMINATOR_GROUPS, GENERATOR_GROUPS, ModelParams, init_params

_CONFIG_KEY = "__arch_config__"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: ModelParams) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {name: np.ascontiguousarray(t.data, dtype="<f4") for name, t in params.named()}
    arrays[_CONFIG_KEY] = np.frombuffer(params.config.to_text().encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path, dtype=np.float32) -> ModelParams:
    """Load and validate every parameter shape against the stored ArchConfig."""
    with np.load(Path(path), allow_pickle=False) as archive:
        if _CONFIG_KEY not in archive.files:
            raise CheckpointError(f"{path}: missing architecture config")
        cfg = ArchConfig.from_text(archive[_CONFIG_KEY].tobytes().decode())
        skeleton = init_params(cfg, seed=0, dtype=dtype)
        expected = dict(skeleton.named())
        stored = set(archive.files) - {_CONFIG_KEY}
        if stored != set(expected):
            missing = sorted(set(expected) - stored)
            extra = sorted(stored - set(expected))
            raise CheckpointError(f"{path}: parameter names differ (missing {missing[:3]}, unexpected {extra[:3]})")
        for name, ref in expected.items():
            arr = archive[name]
            if arr.shape != ref.shape:
                raise CheckpointError(f"{path}: {name} has shape {arr.shape}, expected {ref.shape}")
            group, key = name.split("/", 1)
            skeleton.group(group)[key] = Tensor(arr.astype(dtype), requires_grad=True)
    return skeleton
