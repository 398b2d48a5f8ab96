"""CSV summary tables and PNG comparison grids."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from PIL import Image

from ..metrics import FIELDS, MetricsReport

TABLE_HEADER = ("scheme", "fold", "PSNR", "SSIM", "1-LPIPS", "L1")


def _writable(out_dir) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"report directory {out} is not writable: {exc}") from None
    return out


def _row(scheme, fold, st) -> list:
    return [scheme, fold] + [f"{st[f]:.6f}" for f in FIELDS]


def scheme_tables(metrics: MetricsReport, out_dir) -> list:
    """One ``<scheme>_table.csv`` per scheme: a row per fold plus the overall mean."""
    out = _writable(out_dir)
    per_fold = metrics.per_fold()
    paths = []
    for scheme, overall in sorted(metrics.per_split().items()):
        path = out / f"{scheme}_table.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TABLE_HEADER)
            for (s, fold), st in sorted(per_fold.items()):
                if s == scheme:
                    w.writerow(_row(scheme, fold, st))
            w.writerow(_row(scheme, "mean", overall))
        paths.append(path)
    return paths


def ablation_table(variants: dict, out_dir, name: str = "ablation.csv") -> Path:
    """``variants`` maps a variant label to its MetricsReport."""
    out = _writable(out_dir)
    path = out / name
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("variant",) + TABLE_HEADER)
        for label, rep in variants.items():
            for scheme, st in sorted(rep.per_split().items()):
                w.writerow([label] + _row(scheme, "mean", st))
    return path


def comparison_grid(inputs, preds, truths, path, gap: int = 2) -> Path:
    """Rows of ``input | prediction | truth`` for each given slice (uint8 arrays (S, H, W))."""
    inputs, preds, truths = (np.asarray(a, dtype=np.uint8) for a in (inputs, preds, truths))
    s, h, w = inputs.shape
    canvas = np.full((s * h + (s - 1) * gap, 3 * w + 2 * gap), 255, dtype=np.uint8)
    for i in range(s):
        r = i * (h + gap)
        for j, img in enumerate((inputs[i], preds[i], truths[i])):
            c = j * (w + gap)
            canvas[r : r + h, c : c + w] = img
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(canvas, mode="L").save(path)
    return path


def report(metrics: MetricsReport, out_dir, cubes=None, n_slices: int = 4, variants: dict | None = None) -> list:
    """Write all artefacts of an evaluation.

    ``cubes`` optionally maps a label to ``(input, prediction, truth)`` uint8
    volumes ``(S, H, W)``; ``n_slices`` evenly spaced slices of each go into a grid.
    """
    if not metrics.per_bscan:
        raise ValueError("empty metrics report")
    out = _writable(out_dir)
    paths = [metrics.write_csv(out / "bscans.csv")]
    paths += scheme_tables(metrics, out)
    for label, (x, p, t) in (cubes or {}).items():
        idx = np.unique(np.linspace(0, x.shape[0] - 1, n_slices).round().astype(int))
        paths.append(comparison_grid(x[idx], p[idx], t[idx], out / f"grid_{label}.png"))
    if variants and len(variants) > 1:
        paths.append(ablation_table(variants, out))
    return paths
