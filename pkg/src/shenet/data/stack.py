"""Multi-B-scan input stacks, series pairs and augmentation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..preproc import Cube


def normalize(x) -> np.ndarray:
    """uint8 intensities to [-1, 1]."""
    return np.asarray(x, dtype=np.float64) / 127.5 - 1.0


def denormalize(x) -> np.ndarray:
    """[-1, 1] back to the 0-255 scale (float, clipped)."""
    return np.clip((np.asarray(x, dtype=np.float64) + 1.0) * 127.5, 0.0, 255.0)


def make_input_stack(cube: Cube, j: int, delta_s: int = 1, dtype=np.float64) -> np.ndarray:
    """Normalized B-scans ``j - delta_s .. j + delta_s`` (1-based ``j``) as ``(2 delta_s + 1, H, W)``.

    Neighbours outside the cube are all-zero channels.
    """
    if not 1 <= j <= cube.slices:
        raise IndexError(f"slice {j} outside 1..{cube.slices}")
    if delta_s < 0:
        raise ValueError("delta_s must be non-negative")
    out = np.zeros((2 * delta_s + 1, cube.depth, cube.width), dtype=dtype)
    for k, s in enumerate(range(j - delta_s, j + delta_s + 1)):
        if 1 <= s <= cube.slices:
            out[k] = normalize(cube.voxels[s - 1])
    return out


def cube_stacks(cube: Cube, delta_s: int = 1, dtype=np.float64) -> np.ndarray:
    """Every input stack of a cube at once: ``(slices, 2 delta_s + 1, H, W)``."""
    vol = normalize(cube.voxels).astype(dtype)
    padded = np.concatenate(
        [np.zeros((delta_s,) + vol.shape[1:], dtype=dtype), vol, np.zeros((delta_s,) + vol.shape[1:], dtype=dtype)]
    )
    idx = np.arange(cube.slices)[:, None] + np.arange(2 * delta_s + 1)[None, :]
    return padded[idx]


@dataclass
class SeriesPair:
    x_t1: Cube
    x_t2: Cube
    patient_id: str
    t1_index: int

    def __post_init__(self):
        if self.x_t1.voxels.shape != self.x_t2.voxels.shape:
            raise ValueError(f"pair {self.patient_id}@{self.t1_index}: cube shapes differ")
        for c in (self.x_t1, self.x_t2):
            if c.patient_id and c.patient_id != self.patient_id:
                raise ValueError(f"pair {self.patient_id}: cube belongs to {c.patient_id}")

    @property
    def t2_index(self) -> int:
        return self.t1_index + 1


def pair_samples(pair: SeriesPair, delta_s: int = 1, dtype=np.float64) -> dict:
    """Per-slice training arrays of a pair.

    ``stack_t1``/``stack_t2``: (S, C, H, W) inputs of the prediction and
    reconstruction paths; ``target_t2``/``center_t1``: (S, 1, H, W) B-scans.
    """
    s1 = cube_stacks(pair.x_t1, delta_s, dtype)
    s2 = cube_stacks(pair.x_t2, delta_s, dtype)
    return {
        "stack_t1": s1,
        "stack_t2": s2,
        "center_t1": s1[:, delta_s : delta_s + 1],
        "target_t2": s2[:, delta_s : delta_s + 1],
    }


def hflip(x: np.ndarray) -> np.ndarray:
    return x[..., ::-1]


def rotate(x: np.ndarray, degrees: float, fill: float = 0.0) -> np.ndarray:
    """Bilinear in-plane rotation about the image centre over the last two axes."""
    if degrees == 0:
        return x
    return ndimage.rotate(x, degrees, axes=(-1, -2), reshape=False, order=1, mode="constant", cval=fill)


def augment(arrays, seed=None, max_degrees: float = 5.0, fill: float = 0.0) -> tuple:
    """Apply one random flip/rotation identically to every array in ``arrays``.

    Flip with probability 1/2, then rotation by U(-max_degrees, max_degrees)
    with probability 1/2. ``seed`` may be an int or a ``numpy`` Generator.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    do_flip = rng.random() < 0.5
    do_rot = rng.random() < 0.5
    angle = rng.uniform(-max_degrees, max_degrees)
    out = []
    for a in arrays:
        if do_flip:
            a = hflip(a)
        if do_rot:
            a = rotate(a, angle, fill)
        out.append(np.ascontiguousarray(a))
    return tuple(out)
