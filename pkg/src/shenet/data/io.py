"""Raw cube files, surface CSVs and the dataset manifest."""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..preproc import Cube, SurfaceSet


class CubeFormatError(ValueError):
    pass


class CorruptCubeError(CubeFormatError):
    pass


def header_path(cube_path) -> Path:
    return Path(str(cube_path) + ".hdr")


def save_cube(path, cube: Cube) -> Path:
    """Write ``cube`` as raw uint8 (B-scan 0 first, each row-major) plus a one-line header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    vox = np.ascontiguousarray(cube.voxels, dtype=np.uint8)
    path.write_bytes(vox.tobytes())
    mm = " ".join(f"{v:.10g}" for v in cube.mm_extent)
    header_path(path).write_text(f"{cube.depth} {cube.width} {cube.slices} {mm} {cube.patient_id or '-'} {cube.time_index}\n")
    return path


def read_header(path) -> dict:
    hp = header_path(path)
    if not hp.exists():
        raise CubeFormatError(f"{path}: missing header {hp.name}")
    fields = hp.read_text().split()
    if len(fields) != 8:
        raise CubeFormatError(f"{hp}: expected 8 fields, got {len(fields)}")
    try:
        depth, width, slices = (int(v) for v in fields[:3])
        mm = tuple(float(v) for v in fields[3:6])
        time_index = int(fields[7])
    except ValueError as exc:
        raise CubeFormatError(f"{hp}: {exc}") from None
    if min(depth, width, slices) < 1:
        raise CubeFormatError(f"{hp}: non-positive extent")
    pid = "" if fields[6] == "-" else fields[6]
    return dict(depth=depth, width=width, slices=slices, mm_extent=mm, patient_id=pid, time_index=time_index)


def load_cube(path) -> Cube:
    h = read_header(path)
    expected = h["depth"] * h["width"] * h["slices"]
    actual = os.path.getsize(path)
    if actual != expected:
        raise CorruptCubeError(f"{path}: {actual} bytes, header declares {expected}")
    vox = np.fromfile(path, dtype=np.uint8).reshape(h["slices"], h["depth"], h["width"])
    return Cube(vox, h["mm_extent"], h["patient_id"], h["time_index"])


def save_surfaces(prefix, surfaces: SurfaceSet) -> tuple:
    prefix = str(prefix)
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    out = []
    for name, arr in (("bm", surfaces.bm), ("isos", surfaces.isos)):
        p = Path(f"{prefix}.{name}.csv")
        np.savetxt(p, np.asarray(arr, dtype=np.int64), fmt="%d", delimiter=",")
        out.append(p)
    return tuple(out)


def _read_surface(path) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
    return arr


def load_surfaces(bm_path, isos_path=None) -> SurfaceSet:
    """``load_surfaces(prefix)`` or ``load_surfaces(bm_csv, isos_csv)``."""
    if isos_path is None:
        bm_path, isos_path = f"{bm_path}.bm.csv", f"{bm_path}.isos.csv"
    return SurfaceSet(_read_surface(bm_path), _read_surface(isos_path))


@dataclass
class ManifestEntry:
    patient_id: str
    time_index: int
    cube_path: str
    bm_path: str
    isos_path: str


def write_manifest(path, entries) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for e in entries:
            fh.write(f"{e.patient_id} {e.time_index} {e.cube_path} {e.bm_path} {e.isos_path}\n")
    return path


def read_manifest(path) -> list:
    """Entries sorted by (patient, time). Relative paths resolve against the manifest's directory."""
    path = Path(path)
    base = path.parent
    out = []
    for n, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 5:
            raise CubeFormatError(f"{path}:{n}: expected 5 fields")
        pid, t, *paths = parts
        paths = [str(p if Path(p).is_absolute() else base / p) for p in paths]
        out.append(ManifestEntry(pid, int(t), *paths))
    out.sort(key=lambda e: (e.patient_id, e.time_index))
    seen = set()
    for e in out:
        if (e.patient_id, e.time_index) in seen:
            raise CubeFormatError(f"{path}: duplicate entry {e.patient_id} t={e.time_index}")
        seen.add((e.patient_id, e.time_index))
    return out


def group_by_patient(entries) -> dict:
    groups = {}
    for e in entries:
        groups.setdefault(e.patient_id, []).append(e)
    for pid, es in groups.items():
        times = [e.time_index for e in es]
        if times != sorted(set(times)):
            raise CubeFormatError(f"patient {pid}: time indices must strictly increase")
    return groups
