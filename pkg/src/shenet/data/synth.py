"""Synthetic longitudinal OCT series with a shrinking lesion.

Each patient has a fixed retinal anatomy (curved BM, layered reflectivity
profile, an en-face vessel shadow pattern) and a hyperreflective half-ellipsoid
lesion resting on BM. At every follow-up the lesion height is multiplied by the
patient's response factor rho, so its B-scan cross-section and its volume decay
geometrically. Each acquisition adds a small en-face misalignment, a BM tilt
and unit-mean gamma speckle, which preprocessing must undo or tolerate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..preproc import Cube, SurfaceSet

# reflectivity profile by height above BM, in full-resolution rows (1024 per 2 mm)
_LAYERS = (
    (-1000, 45),  # deep choroid
    (-220, 95),  # choroid
    (-10, 225),  # RPE / BM complex
    (12, 125),  # outer segments
    (34, 195),  # IS/OS junction
    (50, 45),  # outer nuclear layer
    (150, 115),  # outer plexiform
    (185, 60),  # inner nuclear
    (235, 135),  # inner plexiform / ganglion cells
    (300, 170),  # nerve fibre layer
    (330, 6),  # vitreous
)
ISOS_HEIGHT = 42  # full-resolution rows between IS/OS and BM
LESION_INTENSITY = 205.0


class SynthSpecError(ValueError):
    pass


@dataclass(frozen=True)
class SynthPatient:
    """Generator parameters. Lengths are fractions of the cube extent unless noted."""

    patient_id: str
    rho: float = 0.7
    bm_level: float = 0.55  # BM depth at the centre, fraction of depth
    bm_curvature: float = 0.06
    lesion_center: tuple = (0.5, 0.5)  # (slice, width)
    lesion_size: tuple = (0.3, 0.25, 0.12)  # semi-axes (slice, width, height as fraction of depth)
    speckle_var: float = 0.04
    max_shift: int = 2  # en-face misalignment per acquisition, pixels
    max_tilt: float = 0.03  # BM tilt across the width, fraction of depth
    vessel_contrast: float = 0.45

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise SynthSpecError(f"rho must lie in (0, 1], got {self.rho}")
        if self.speckle_var < 0:
            raise SynthSpecError("speckle variance must be non-negative")


def make_patients(n: int, seed: int = 0, prefix: str = "P") -> list:
    """``n`` patients with varied response, anatomy and lesion placement."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        out.append(
            SynthPatient(
                patient_id=f"{prefix}{i:02d}",
                rho=float(rng.uniform(0.55, 0.9)),
                bm_level=float(rng.uniform(0.52, 0.6)),
                bm_curvature=float(rng.uniform(0.02, 0.08)),
                lesion_center=(float(rng.uniform(0.35, 0.65)), float(rng.uniform(0.35, 0.65))),
                lesion_size=(float(rng.uniform(0.22, 0.32)), float(rng.uniform(0.15, 0.28)), float(rng.uniform(0.08, 0.15))),
            )
        )
    return out


@dataclass
class _Geometry:
    shifts: np.ndarray  # (T, 2) en-face (dz, dx) per acquisition
    tilts: np.ndarray  # (T,)
    vessels: np.ndarray  # anatomical en-face field, padded by max_shift


def _geometry(pat: SynthPatient, n_timepoints: int, size, rng) -> _Geometry:
    depth, width, slices = size
    m = pat.max_shift
    shifts = rng.integers(-m, m + 1, size=(n_timepoints, 2)) if m else np.zeros((n_timepoints, 2), dtype=np.int64)
    shifts[0] = 0
    tilts = rng.uniform(-pat.max_tilt, pat.max_tilt, size=n_timepoints)
    noise = rng.standard_normal((slices + 2 * m, width + 2 * m))
    field = ndimage.gaussian_filter(noise, sigma=max(1.0, width / 24), mode="wrap")
    field /= field.std() + 1e-12
    vessels = np.exp(-((field / 0.35) ** 2))
    return _Geometry(shifts, tilts, vessels)


def _profile(depth: int):
    """Reflectivity as a function of height above BM (in this cube's rows)."""
    scale = 1024 / depth
    u = np.arange(-1200, 1200, dtype=np.float64)
    val = np.full_like(u, _LAYERS[0][1], dtype=np.float64)
    for start, v in _LAYERS:
        val[u >= start] = v
    val = ndimage.gaussian_filter1d(val, sigma=4.0)
    return lambda rows: np.interp(rows * scale, u, val)


def _enface_coords(pat, shift, width, slices):
    m = pat.max_shift
    ss = np.arange(slices)[:, None] + shift[0]
    cc = np.arange(width)[None, :] + shift[1]
    return ss, cc, ss + m, cc + m


def _surfaces_at(pat: SynthPatient, geo: _Geometry, t: int, size):
    depth, width, slices = size
    ss, cc, _, _ = _enface_coords(pat, geo.shifts[t], width, slices)
    xs = cc / width - 0.5
    zs = ss / max(slices, 1) - 0.5
    bm = depth * (pat.bm_level + pat.bm_curvature * (xs**2 + 0.5 * zs**2))
    bm = bm + depth * geo.tilts[t] * (np.arange(width)[None, :] / width - 0.5)
    bm = np.rint(np.broadcast_to(bm, (slices, width))).astype(np.int64)
    isos = bm - max(1, int(round(ISOS_HEIGHT * depth / 1024)))
    return bm, isos


def _lesion_mask(pat: SynthPatient, geo: _Geometry, t: int, size, bm: np.ndarray) -> np.ndarray:
    depth, width, slices = size
    ss, cc, _, _ = _enface_coords(pat, geo.shifts[t], width, slices)
    a_s, a_w, a_d = pat.lesion_size
    a_s, a_w = a_s * slices, a_w * width
    a_d = a_d * depth * pat.rho**t
    lateral = ((ss - pat.lesion_center[0] * slices) / a_s) ** 2 + ((cc - pat.lesion_center[1] * width) / a_w) ** 2
    height = bm[:, None, :] - np.arange(depth)[None, :, None]  # rows above BM
    # sample at pixel centres so the row count per column is unbiased
    return (height >= 0) & (((height + 0.5) / a_d) ** 2 + lateral[:, None, :] <= 1.0)


def _check(pat: SynthPatient, size):
    depth, width, slices = size
    a_s, a_w, a_d = pat.lesion_size
    c_s, c_w = pat.lesion_center
    if min(a_s, a_w, a_d) <= 0:
        raise SynthSpecError("lesion semi-axes must be positive")
    if c_s - a_s < 0 or c_s + a_s > 1 or c_w - a_w < 0 or c_w + a_w > 1:
        raise SynthSpecError(f"lesion of semi-axes {pat.lesion_size} at {pat.lesion_center} extends beyond the cube")
    if a_d >= pat.bm_level - pat.max_tilt:
        raise SynthSpecError("lesion taller than the retina above BM")
    if pat.bm_level + pat.bm_curvature * 0.375 + pat.max_tilt >= 1:
        raise SynthSpecError("BM below the bottom of the cube")


def synth_series(pat: SynthPatient, n_timepoints: int, size=(128, 64, 16), seed: int = 0, mm_extent=(2.0, 6.0, 6.0)) -> list:
    """``n_timepoints`` acquisitions as ``[(Cube, SurfaceSet), ...]``.

    ``size`` is (depth, width, slices). Output is a pure function of the arguments.
    """
    if n_timepoints < 2:
        raise SynthSpecError("a series needs at least two timepoints")
    size = tuple(int(v) for v in size)
    _check(pat, size)
    depth, width, slices = size
    rng = np.random.default_rng(seed)
    geo = _geometry(pat, n_timepoints, size, rng)
    profile = _profile(depth)
    out = []
    for t in range(n_timepoints):
        bm, isos = _surfaces_at(pat, geo, t, size)
        height = bm[:, None, :] - np.arange(depth)[None, :, None]
        vol = profile(height.astype(np.float64))
        _, _, si, ci = _enface_coords(pat, geo.shifts[t], width, slices)
        shade = 1.0 - pat.vessel_contrast * geo.vessels[si, ci]
        band = (height >= 0) & (height <= (bm - isos)[:, None, :] + 1)
        vol = np.where(band, vol * shade[:, None, :], vol)
        vol[_lesion_mask(pat, geo, t, size, bm)] = LESION_INTENSITY
        if pat.speckle_var > 0:
            k = 1.0 / pat.speckle_var
            vol = vol * rng.gamma(k, 1.0 / k, size=vol.shape)
        vox = np.clip(np.rint(vol), 0, 255).astype(np.uint8)
        out.append((Cube(vox, tuple(mm_extent), pat.patient_id, t), SurfaceSet(bm, isos)))
    return out


def lesion_masks(pat: SynthPatient, n_timepoints: int, size=(128, 64, 16), seed: int = 0) -> list:
    """Pre-noise lesion masks ``(slices, depth, width)`` matching :func:`synth_series` with the same seed."""
    size = tuple(int(v) for v in size)
    _check(pat, size)
    geo = _geometry(pat, n_timepoints, size, np.random.default_rng(seed))
    masks = []
    for t in range(n_timepoints):
        bm, _ = _surfaces_at(pat, geo, t, size)
        masks.append(_lesion_mask(pat, geo, t, size, bm))
    return masks


def misalignments(pat: SynthPatient, n_timepoints: int, size=(128, 64, 16), seed: int = 0) -> np.ndarray:
    """Per-acquisition en-face offsets (dz, dx): the shift that maps each cube back onto t=0."""
    geo = _geometry(pat, n_timepoints, tuple(int(v) for v in size), np.random.default_rng(seed))
    return geo.shifts.copy()
