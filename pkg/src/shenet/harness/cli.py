"""Command-line entry point: ``shenet <command> ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .. import preproc
from ..data import (
    ManifestEntry,
    SplitPlan,
    group_by_patient,
    load_cube,
    load_surfaces,
    make_patients,
    make_split,
    read_manifest,
    save_cube,
    save_surfaces,
    synth_series,
    write_manifest,
)
from ..metrics import MetricsReport, score_bscans
from ..model import load_checkpoint
from .config import TrainConfig
from .experiment import predict_cube, prepare_synthetic, run_experiment
from .report import report

log = logging.getLogger("shenet")


def _cube_name(pid: str, t: int) -> str:
    return f"{pid}_t{t:02d}"


def cmd_synth(a) -> int:
    out = Path(a.out)
    depth = a.depth or 2 * a.size
    entries = []
    for i, pat in enumerate(make_patients(a.patients, seed=a.seed)):
        for cube, surf in synth_series(pat, a.timepoints, size=(depth, a.size, a.slices), seed=a.seed * 1000 + i):
            name = _cube_name(pat.patient_id, cube.time_index)
            save_cube(out / f"{name}.raw", cube)
            bm, isos = save_surfaces(out / name, surf)
            entries.append(ManifestEntry(pat.patient_id, cube.time_index, f"{name}.raw", bm.name, isos.name))
    write_manifest(out / "manifest.txt", entries)
    log.info("wrote %d cubes to %s", len(entries), out)
    return 0


def _ref_row(a, depth):
    return a.ref_row if a.ref_row is not None else preproc.default_ref_row(depth)


def cmd_preprocess(a) -> int:
    out = Path(a.out)
    if a.cube:
        if not a.surfaces:
            raise SystemExit("--cube needs --surfaces PREFIX")
        cube = load_cube(a.cube)
        flat, surf = preproc.flatten_and_crop(cube, load_surfaces(a.surfaces), _ref_row(a, cube.depth))
        name = Path(a.cube).stem
        save_cube(out / f"{name}.raw", flat)
        save_surfaces(out / name, surf)
        return 0
    if not a.manifest:
        raise SystemExit("preprocess needs --manifest or --cube")
    entries = []
    thetas = np.deg2rad(np.arange(-2, 3)) if a.rotations else (0.0,)
    for pid, es in group_by_patient(read_manifest(a.manifest)).items():
        cubes = [load_cube(e.cube_path) for e in es]
        surfs = [load_surfaces(e.bm_path, e.isos_path) for e in es]
        aligned = preproc.align_series(cubes, surfs, _ref_row(a, cubes[0].depth), a.max_shift, thetas)
        for e, c, s, t in zip(es, aligned.cubes, aligned.surfaces, aligned.transforms):
            name = _cube_name(pid, e.time_index)
            save_cube(out / f"{name}.raw", c)
            bm, isos = save_surfaces(out / name, s)
            entries.append(ManifestEntry(pid, e.time_index, f"{name}.raw", bm.name, isos.name))
            log.info("%s t=%d aligned by dx=%d dz=%d theta=%.4f", pid, e.time_index, t.dx, t.dz, t.theta)
    write_manifest(out / "manifest.txt", entries)
    return 0


def _series_from_manifest(path) -> dict:
    return {pid: [load_cube(e.cube_path) for e in es] for pid, es in group_by_patient(read_manifest(path)).items()}


def cmd_split(a) -> int:
    groups = group_by_patient(read_manifest(a.manifest))
    plan = make_split(sorted(groups), a.scheme, a.folds, a.seed, {p: len(es) for p, es in groups.items()})
    plan.save(a.out)
    return 0


def _train_config(a) -> TrainConfig:
    cfg = TrainConfig.load(a.config) if a.config else TrainConfig()
    over = {}
    for key, attr in (("delta_s", "delta_s"), ("lam", "lambda_"), ("mu", "mu"), ("tau", "tau"), ("epochs", "epochs"), ("seed", "seed"), ("disc", "disc")):
        v = getattr(a, attr, None)
        if v is not None:
            over[key] = v
    if getattr(a, "no_gem", False):
        over["use_gem"] = False
    if getattr(a, "no_erm", False):
        over["use_erm"] = False
    if getattr(a, "no_recon", False):
        over["use_recon"] = False
    return cfg.with_(**over)


def _finish(result, series, out: Path) -> None:
    cubes = {}
    for (pid, t1), pred in list(result.predictions.items())[:4]:
        cubes[f"{pid}_t{t1 + 1:02d}"] = (series[pid][t1].voxels, pred.voxels, series[pid][t1 + 1].voxels)
    report(result.report, out / "report", cubes=cubes, variants={"model": result.report, "identity": result.baseline})
    for (pid, t1), pred in result.predictions.items():
        save_cube(out / "predictions" / f"{_cube_name(pid, t1 + 1)}.raw", pred)
    for name, rep in (("model", result.report), ("identity", result.baseline)):
        print(name, " ".join(f"{m}={rep.mean(m):.4f}" for m in ("psnr", "ssim", "one_minus_lpips", "l1")))


def cmd_train(a) -> int:
    cfg = _train_config(a)
    series = _series_from_manifest(a.manifest)
    plan = SplitPlan.load(a.plan)
    out = Path(a.out)
    cfg.save(out / "train.cfg")
    result = run_experiment(series, plan.scheme, cfg, out_dir=out, plan=plan, p0_dir=a.p0)
    _finish(result, series, out)
    return 0


def cmd_experiment(a) -> int:
    cfg = _train_config(a)
    out = Path(a.out)
    cfg.save(out / "train.cfg")
    series = prepare_synthetic(cfg)
    result = run_experiment(series, a.scheme, cfg, out_dir=out, p0_dir=a.p0)
    _finish(result, series, out)
    return 0


def cmd_predict(a) -> int:
    params = load_checkpoint(a.ckpt)
    cube = load_cube(a.cube)
    pred = predict_cube(cube, params, a.delta_s, use_gem=not a.no_gem)
    out = Path(a.out)
    save_cube(out if out.suffix else out.with_suffix(".raw"), pred)
    return 0


def cmd_eval(a) -> int:
    pred_dir, truth_dir = Path(a.pred), Path(a.truth)
    rep = MetricsReport()
    cubes = {}
    files = sorted(pred_dir.glob("*.raw"))
    if not files:
        raise SystemExit(f"no predicted cubes in {pred_dir}")
    for p in files:
        t = truth_dir / p.name
        if not t.exists():
            raise SystemExit(f"no ground truth for {p.name} in {truth_dir}")
        pc, tc = load_cube(p), load_cube(t)
        rep.extend(score_bscans(pc.voxels, tc.voxels, scheme=a.scheme, patient_id=tc.patient_id, time_index=tc.time_index))
        if a.input:
            cubes[p.stem] = (load_cube(Path(a.input) / p.name).voxels, pc.voxels, tc.voxels)
    report(rep, a.out, cubes=cubes)
    print(" ".join(f"{m}={rep.mean(m):.4f}" for m in ("psnr", "ssim", "one_minus_lpips", "l1")))
    return 0


def _add_train_flags(p) -> None:
    p.add_argument("--config", help="plain-text key=value TrainConfig")
    p.add_argument("--delta-s", dest="delta_s", type=int)
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-gem", action="store_true")
    p.add_argument("--no-erm", action="store_true")
    p.add_argument("--no-recon", action="store_true")
    p.add_argument("--disc", choices=("q", "p", "both"))
    p.add_argument("--p0", help="P0 experiment directory (for P1 fine-tuning)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shenet", description="single-horizon OCT evolution prediction")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic cohort")
    p.add_argument("--patients", type=int, default=8)
    p.add_argument("--timepoints", type=int, default=6)
    p.add_argument("--size", type=int, default=64, help="B-scan width and cropped height")
    p.add_argument("--slices", type=int, default=16)
    p.add_argument("--depth", type=int, default=0, help="raw depth (default 2 x size)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="flatten, crop and register cubes")
    p.add_argument("--manifest")
    p.add_argument("--cube")
    p.add_argument("--surfaces", help="surface prefix (<prefix>.bm.csv, <prefix>.isos.csv)")
    p.add_argument("--ref-row", dest="ref_row", type=int)
    p.add_argument("--max-shift", dest="max_shift", type=int, default=16)
    p.add_argument("--rotations", action="store_true", help="also search -2..2 degrees")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("split", help="write a cross-validation plan")
    p.add_argument("--manifest", required=True)
    p.add_argument("--scheme", type=str.upper, choices=("P0", "P1", "PM"), required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train and test on a preprocessed manifest under a plan")
    p.add_argument("--manifest", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("experiment", help="synthesize, align, train and test in one go")
    p.add_argument("--scheme", type=str.upper, choices=("P0", "P1", "PM"), default="PM")
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("predict", help="predict the next cube")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--cube", required=True)
    p.add_argument("--delta-s", dest="delta_s", type=int)
    p.add_argument("--no-gem", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predicted cubes against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--input", help="directory of input cubes, for comparison grids")
    p.add_argument("--scheme", default="eval")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return a.func(a)


if __name__ == "__main__":
    sys.exit(main())
