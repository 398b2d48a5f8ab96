"""Protocol drivers: data preparation, per-fold training, cube prediction and scoring."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import preproc
from ..data import SeriesPair, SplitPlan, make_patients, make_split, pair_samples, synth_series
from ..data.stack import cube_stacks, denormalize
from ..metrics import MetricsReport, score_bscans
from ..model import CheckpointError, ModelParams, init_params, load_checkpoint, lsuv_calibrate, save_checkpoint
from .config import TrainConfig
from .train import LossLog, OptStates, concat_samples, predict_stacks, train

CALIBRATION_BATCH = 8  # stacks used to fit the LSUV scales


class ProtocolError(RuntimeError):
    pass


def predict_cube(cube_t1: preproc.Cube, params: ModelParams, delta_s: int | None = None, use_gem: bool = True) -> preproc.Cube:
    """Slide over every slice of ``cube_t1`` and decode one B-scan each (uint8 output)."""
    ds = params.config.delta_s if delta_s is None else delta_s
    if 2 * ds + 1 != params.config.in_channels:
        raise ValueError(f"delta_s={ds} does not match the model's {params.config.in_channels} input channels")
    pred = predict_stacks(cube_stacks(cube_t1, ds), params, use_gem)
    vox = np.rint(denormalize(pred)).astype(np.uint8)
    return preproc.Cube(vox, cube_t1.mm_extent, cube_t1.patient_id, cube_t1.time_index + 1)


def prepare_synthetic(cfg: TrainConfig) -> dict:
    """Generate and align the synthetic cohort: ``{patient: [aligned Cube, ...]}``."""
    depth = cfg.raw_depth or 2 * cfg.image_size
    size = (depth, cfg.image_size, cfg.slices)
    series = {}
    for i, pat in enumerate(make_patients(cfg.synth_patients, seed=cfg.synth_seed)):
        acq = synth_series(pat, cfg.synth_timepoints, size=size, seed=cfg.synth_seed * 1000 + i)
        aligned = preproc.align_series([c for c, _ in acq], [s for _, s in acq], max_shift=cfg.register_shift)
        series[pat.patient_id] = aligned.cubes
    return series


def series_pair(series: dict, patient: str, t1: int) -> SeriesPair:
    cubes = series[patient]
    if t1 + 1 >= len(cubes):
        raise ProtocolError(f"{patient}: no cube after position {t1}")
    return SeriesPair(cubes[t1], cubes[t1 + 1], patient, t1)


def samples_for(series: dict, pairs, delta_s: int) -> dict:
    if not pairs:
        raise ProtocolError("no training pairs")
    return concat_samples([pair_samples(series_pair(series, p, t), delta_s) for p, t in pairs])


@dataclass
class ExperimentResult:
    scheme: str
    report: MetricsReport
    baseline: MetricsReport
    predictions: dict = field(default_factory=dict)  # (patient, t1) -> predicted Cube
    checksums: dict = field(default_factory=dict)  # fold -> parameter checksum
    params: dict = field(default_factory=dict)  # fold -> ModelParams (last trained)


def _score(result: ExperimentResult, series, scheme, fold, patient, t1, params, cfg) -> None:
    pair = series_pair(series, patient, t1)
    pred = predict_cube(pair.x_t1, params, cfg.delta_s, cfg.use_gem)
    truth = pair.x_t2.voxels
    result.predictions[(patient, t1)] = pred
    meta = dict(scheme=scheme, fold=fold, patient_id=patient, time_index=t1 + 1)
    result.report.extend(score_bscans(pred.voxels, truth, **meta))
    result.baseline.extend(score_bscans(pair.x_t1.voxels, truth, **{**meta, "scheme": scheme + "-identity"}))


def run_experiment(series: dict, scheme: str, cfg: TrainConfig, out_dir=None, plan: SplitPlan | None = None, p0_dir=None, progress=None) -> ExperimentResult:
    """Train and test under ``scheme`` following ``plan`` (built from ``cfg`` if absent).

    P1 needs the P0 fold checkpoints in ``p0_dir/fold{k}/checkpoint.npz``.
    """
    scheme = scheme.upper().replace("-", "")
    counts = {p: len(c) for p, c in series.items()}
    if plan is None:
        plan = make_split(sorted(series), scheme, cfg.n_folds, cfg.split_seed, counts)
    if plan.scheme != scheme:
        raise ProtocolError(f"plan is for {plan.scheme}, not {scheme}")
    out_dir = Path(out_dir) if out_dir else None
    dtype = np.dtype(cfg.dtype)
    result = ExperimentResult(scheme, MetricsReport(), MetricsReport())
    for k in plan.fold_ids():
        fold_dir = out_dir / f"fold{k}" if out_dir else None
        if scheme == "P1":
            if p0_dir is None:
                raise ProtocolError("P1 needs the P0 checkpoint directory")
            ckpt = Path(p0_dir) / f"fold{k}" / "checkpoint.npz"
            if not ckpt.exists():
                raise ProtocolError(f"missing P0 checkpoint {ckpt}")
            try:
                base = load_checkpoint(ckpt, dtype=dtype)
            except CheckpointError as exc:
                raise ProtocolError(str(exc)) from None
            for i, (patient, t1) in enumerate(plan.pairs(k, "finetune")):
                params = base.copy()
                samples = samples_for(series, [(patient, t1)], cfg.delta_s)
                log = fold_dir / f"loss_{patient}.csv" if fold_dir else None
                train(samples, params, cfg, epochs=cfg.finetune_epochs, log=log, seed_offset=1000 * (k + 1) + i, progress=progress)
                if fold_dir:
                    save_checkpoint(fold_dir / f"{patient}.npz", params)
                for p, t in plan.pairs(k, "test"):
                    if p == patient:
                        _score(result, series, scheme, k, p, t, params, cfg)
                result.checksums[(k, patient)] = params.checksum()
            continue
        params = init_params(cfg.arch(), seed=cfg.seed, dtype=dtype)
        samples = samples_for(series, plan.pairs(k, "train"), cfg.delta_s)
        if cfg.calibrate:
            lsuv_calibrate(params, samples["stack_t1"][:CALIBRATION_BATCH], use_gem=cfg.use_gem)
        log = LossLog(fold_dir / "loss.csv" if fold_dir else None)
        train(samples, params, cfg, out_dir=fold_dir, log=log, seed_offset=k, progress=progress)
        result.checksums[k] = params.checksum()
        result.params[k] = params
        for p, t in plan.pairs(k, "test"):
            _score(result, series, scheme, k, p, t, params, cfg)
    return result
