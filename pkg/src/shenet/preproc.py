"""Serial alignment of OCT cubes.

Pipeline per patient: flatten every B-scan on Bruch's membrane (BM), crop a
fixed physical window around it, project an en-face fundus image between the
IS/OS junction and BM, register each cube's fundus to the first cube's and
apply the recovered in-plane transform to every depth plane.

Registration is an exhaustive normalized cross-correlation search over
integer translations (plus an optional small grid of rotations), standing in
for SIFT-flow.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from . import _kernels

FULL_DEPTH = 1024
DEFAULT_REF_ROW = 600
MM_ABOVE_BM = 0.75
MM_BELOW_BM = 0.25


class PreprocessingError(ValueError):
    pass


class SurfaceError(PreprocessingError):
    pass


class RegistrationError(PreprocessingError):
    pass


@dataclass
class Cube:
    """An OCT volume stored B-scan-major: ``voxels[slice, depth, width]`` (uint8)."""

    voxels: np.ndarray
    mm_extent: tuple = (2.0, 6.0, 6.0)
    patient_id: str = ""
    time_index: int = 0

    def __post_init__(self):
        if self.voxels.ndim != 3:
            raise ValueError(f"cube voxels must be 3-D, got {self.voxels.shape}")

    @property
    def slices(self) -> int:
        return self.voxels.shape[0]

    @property
    def depth(self) -> int:
        return self.voxels.shape[1]

    @property
    def width(self) -> int:
        return self.voxels.shape[2]

    @property
    def dims(self) -> tuple:
        """(depth, width, slices)."""
        return (self.depth, self.width, self.slices)

    def bscan(self, j: int) -> np.ndarray:
        return self.voxels[j]

    def label(self) -> str:
        return f"{self.patient_id}@t{self.time_index}"


@dataclass
class SurfaceSet:
    """Per-(slice, column) depth indices of BM and IS/OS."""

    bm: np.ndarray
    isos: np.ndarray

    def validate(self, depth: int | None = None) -> None:
        if self.bm.shape != self.isos.shape:
            raise SurfaceError("BM and IS/OS surfaces differ in shape")
        if np.any(self.isos < 0) or np.any(self.isos >= self.bm):
            raise SurfaceError("IS/OS must lie strictly above BM and inside the image")
        if depth is not None and np.any(self.bm >= depth):
            raise SurfaceError(f"BM beyond image depth {depth}")


@dataclass(frozen=True)
class RigidTransform2D:
    """In-plane transform of an en-face plane: ``dx`` along width, ``dz`` along slices, ``theta`` radians."""

    dx: int = 0
    dz: int = 0
    theta: float = 0.0

    def inverse(self) -> "RigidTransform2D":
        if self.theta:
            raise NotImplementedError("inverse is only provided for pure translations")
        return RigidTransform2D(-self.dx, -self.dz)


# ---------------------------------------------------------------------------
# flattening and cropping


def window_rows(depth: int = FULL_DEPTH, mm_depth: float = 2.0) -> tuple:
    """(rows above BM, rows below BM) of the crop window for this axial sampling."""
    per_mm = depth / mm_depth
    return int(round(MM_ABOVE_BM * per_mm)), int(round(MM_BELOW_BM * per_mm))


def default_ref_row(depth: int) -> int:
    return int(round(DEFAULT_REF_ROW * depth / FULL_DEPTH))


def flatten_bscan(bscan: np.ndarray, bm_row: np.ndarray, ref_row: int) -> np.ndarray:
    """Shift each column so BM sits on ``ref_row``; vacated pixels become zero."""
    depth = bscan.shape[0]
    if not 0 <= ref_row < depth:
        raise ValueError(f"ref_row {ref_row} outside [0, {depth})")
    bm_row = np.asarray(bm_row, dtype=np.int64)
    if np.any(bm_row < 0) or np.any(bm_row >= depth):
        raise SurfaceError("BM row outside the B-scan")
    return _kernels.shift_columns(np.ascontiguousarray(bscan), ref_row - bm_row)


def crop_window(flattened: np.ndarray, ref_row: int, above: int = 384, below: int = 128, where: str = "") -> np.ndarray:
    """Rows ``[ref_row - above, ref_row + below)`` of a flattened B-scan."""
    depth = flattened.shape[0]
    if ref_row - above < 0 or ref_row + below > depth:
        raise PreprocessingError(f"{where or 'B-scan'}: crop window [{ref_row - above}, {ref_row + below}) exceeds depth {depth}")
    return flattened[ref_row - above : ref_row + below]


def flatten_and_crop(cube: Cube, surfaces: SurfaceSet, ref_row: int | None = None):
    """Flatten and crop every B-scan. Returns the cropped cube and surfaces in its coordinates."""
    surfaces.validate(cube.depth)
    ref = default_ref_row(cube.depth) if ref_row is None else ref_row
    above, below = window_rows(cube.depth, cube.mm_extent[0])
    out = np.empty((cube.slices, above + below, cube.width), dtype=cube.voxels.dtype)
    for s in range(cube.slices):
        flat = flatten_bscan(cube.voxels[s], surfaces.bm[s], ref)
        out[s] = crop_window(flat, ref, above, below, where=f"cube {cube.label()} slice {s}")
    shift = ref - surfaces.bm
    new = SurfaceSet(
        bm=np.full_like(surfaces.bm, above),
        isos=np.clip(surfaces.isos + shift - (ref - above), 0, above - 1),
    )
    mm = (cube.mm_extent[0] * (above + below) / cube.depth,) + tuple(cube.mm_extent[1:])
    return Cube(out, mm, cube.patient_id, cube.time_index), new


# ---------------------------------------------------------------------------
# fundus projection and registration


def project_fundus(cube: Cube, surfaces: SurfaceSet) -> np.ndarray:
    """Mean intensity over depths ``isos..bm`` (inclusive) for each (slice, column)."""
    bm = np.asarray(surfaces.bm, dtype=np.int64)
    isos = np.asarray(surfaces.isos, dtype=np.int64)
    if bm.shape != (cube.slices, cube.width):
        raise SurfaceError(f"surfaces {bm.shape} do not match cube ({cube.slices}, {cube.width})")
    if np.any(isos >= bm):
        raise SurfaceError("empty projection interval: IS/OS must lie above BM")
    if np.any(isos < 0) or np.any(bm >= cube.depth):
        raise SurfaceError("surface outside the cube")
    cs = np.cumsum(cube.voxels.astype(np.float64), axis=1)
    cs = np.concatenate([np.zeros((cube.slices, 1, cube.width)), cs], axis=1)
    top = np.take_along_axis(cs, isos[:, None, :], axis=1)[:, 0]
    bottom = np.take_along_axis(cs, bm[:, None, :] + 1, axis=1)[:, 0]
    return (bottom - top) / (bm - isos + 1)


def _rotate_plane(img: np.ndarray, theta: float, order: int = 1, mode: str = "constant") -> np.ndarray:
    if theta == 0:
        return img
    c, s = np.cos(theta), np.sin(theta)
    mat = np.array([[c, -s], [s, c]])
    center = (np.array(img.shape[-2:]) - 1) / 2.0
    offset = center - mat @ center
    return ndimage.affine_transform(img.astype(np.float64), mat, offset=offset, order=order, mode=mode, cval=0.0)


def shift_plane(img: np.ndarray, dz: int, dx: int, fill: str = "zero") -> np.ndarray:
    """``out[r, c] = img[r - dz, c - dx]`` over the last two axes; zero (or edge) fill."""
    h, w = img.shape[-2:]
    if fill == "edge":
        r = np.clip(np.arange(h) - dz, 0, h - 1)
        c = np.clip(np.arange(w) - dx, 0, w - 1)
        return img[..., r[:, None], c[None, :]]
    out = np.zeros_like(img)
    r0, r1 = max(0, dz), min(h, h + dz)
    c0, c1 = max(0, dx), min(w, w + dx)
    if r1 > r0 and c1 > c0:
        out[..., r0:r1, c0:c1] = img[..., r0 - dz : r1 - dz, c0 - dx : c1 - dx]
    return out


def register_fundus(
    moving: np.ndarray,
    fixed: np.ndarray,
    max_shift: int = 16,
    thetas=(0.0,),
) -> RigidTransform2D:
    """Transform that best maps ``moving`` onto ``fixed`` by NCC.

    Searches integer translations within ``max_shift`` and every rotation in
    ``thetas`` (radians; e.g. ``np.deg2rad(np.arange(-2, 3))``).
    """
    moving = np.asarray(moving, dtype=np.float64)
    fixed = np.asarray(fixed, dtype=np.float64)
    if moving.shape != fixed.shape:
        raise RegistrationError(f"fundus shapes {moving.shape} and {fixed.shape} differ")
    if np.ptp(moving) == 0 or np.ptp(fixed) == 0:
        raise RegistrationError("constant fundus image: correlation undefined")
    m = min(max_shift, fixed.shape[0] - 2, fixed.shape[1] - 2)
    best, best_t = -np.inf, RigidTransform2D()
    for theta in sorted(thetas, key=abs):
        scores = _kernels.ncc_scores(np.ascontiguousarray(_rotate_plane(moving, theta)), fixed, m)
        i = int(np.argmax(scores))
        if scores.flat[i] > best + 1e-12:
            best = scores.flat[i]
            dz, dx = np.unravel_index(i, scores.shape)
            best_t = RigidTransform2D(int(dx) - m, int(dz) - m, float(theta))
    if not np.isfinite(best):
        raise RegistrationError("no overlap with non-zero variance")
    return best_t


def apply_transform_cube(cube: Cube, t: RigidTransform2D) -> Cube:
    """Rotate then translate every constant-depth plane (slices x width); depth is untouched."""
    vox = cube.voxels
    if t.theta:
        planes = np.moveaxis(vox, 1, 0)  # depth, slices, width
        rotated = np.stack([_rotate_plane(p, t.theta) for p in planes])
        vox = np.moveaxis(np.clip(np.rint(rotated), 0, 255).astype(cube.voxels.dtype), 0, 1)
    vox = shift_plane(np.moveaxis(vox, 1, 0), t.dz, t.dx)
    return replace(cube, voxels=np.ascontiguousarray(np.moveaxis(vox, 0, 1)))


def apply_transform_surfaces(surfaces: SurfaceSet, t: RigidTransform2D) -> SurfaceSet:
    """Move surfaces with the cube; regions shifted in from outside copy the nearest edge."""
    def move(a):
        if t.theta:
            a = np.rint(_rotate_plane(a.astype(np.float64), t.theta, order=1, mode="nearest")).astype(a.dtype)
        return shift_plane(a, t.dz, t.dx, fill="edge")

    return SurfaceSet(move(surfaces.bm), move(surfaces.isos))


@dataclass
class AlignedSeries:
    cubes: list
    surfaces: list
    transforms: list


def align_series(cubes, surfaces, ref_row: int | None = None, max_shift: int = 16, thetas=(0.0,)) -> AlignedSeries:
    """Flatten/crop each cube and register its fundus to the first cube of the series."""
    flat = [flatten_and_crop(c, s, ref_row) for c, s in zip(cubes, surfaces)]
    ref_fundus = project_fundus(*flat[0])
    out_c, out_s, out_t = [], [], []
    for cube, surf in flat:
        if not out_c:
            t = RigidTransform2D()
        else:
            t = register_fundus(project_fundus(cube, surf), ref_fundus, max_shift, thetas)
        out_c.append(apply_transform_cube(cube, t))
        out_s.append(apply_transform_surfaces(surf, t))
        out_t.append(t)
    return AlignedSeries(out_c, out_s, out_t)
