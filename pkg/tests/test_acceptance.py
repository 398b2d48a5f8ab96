"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records one PASS/FAIL line (printed live and again in the
session summary). Criteria 7, 8 and 10 train the committed toy profile
``configs/toy_acceptance.cfg``; runs are shared between criteria so each
(variant, seed) trains once per session.

    pytest tests/test_acceptance.py -v -s
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from acceptance_log import record
from gradcases import CASES, REQUIRED_GROUPS, flat_cases
from shenet.data import make_split
from shenet.diffcore import Tensor, grad_check, no_grad
from shenet.harness import TrainConfig, predict_cube, prepare_synthetic, run_experiment
from shenet.metrics import psnr
from shenet.model import (
    ArchConfig,
    decoder_forward,
    encoder_forward,
    gat_attention,
    gat_layer_forward,
    gcn_propagate,
    gem_forward,
    init_params,
    normalized_adjacency,
)
from shenet.objective import erm_loss, erm_loss_logform, gan_pair_losses, gan_quality_losses
from shenet.preproc import Cube, SurfaceSet, flatten_and_crop, register_fundus, shift_plane

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "toy_acceptance.cfg"
SEEDS = (0, 1, 2)
VARIANTS = {
    "full": {},
    "no_gem": {"use_gem": False},
    "disc_q": {"disc": "q"},
    "disc_p": {"disc": "p"},
}


def _check(number, passed, detail):
    record(number, passed, detail)
    assert passed, detail


# --- shared toy runs ----------------------------------------------------------


class ToyRuns:
    def __init__(self, root: Path):
        self.root = root
        self.base = TrainConfig.load(CONFIG)
        self.series = None
        self.cache = {}

    def get(self, variant: str, seed: int, tag: str = ""):
        key = (variant, seed, tag)
        if key not in self.cache:
            if self.series is None:
                self.series = prepare_synthetic(self.base)
            cfg = self.base.with_(seed=seed, **VARIANTS[variant])
            out = self.root / f"{variant}_s{seed}{tag}"
            t0 = time.perf_counter()
            res = run_experiment(self.series, "PM", cfg, out_dir=out)
            elapsed = time.perf_counter() - t0
            csv_path = res.report.write_csv(out / "bscans.csv")
            self.cache[key] = (res, elapsed, csv_path)
        return self.cache[key]


@pytest.fixture(scope="session")
def toy_runs(tmp_path_factory):
    return ToyRuns(tmp_path_factory.mktemp("acceptance"))


# --- 1 ------------------------------------------------------------------------


def test_criterion_01_reported_values_not_reproducible(toy_runs):
    # absolute numbers depend on private clinical data and a pretrained perceptual net;
    # the criterion is met by the directional checks of 7 and 8, which this reports alongside
    res, _, _ = toy_runs.get("full", 0)
    rep = res.report
    vals = {m: rep.mean(m) for m in ("psnr", "ssim", "one_minus_lpips")}
    ok = all(math.isfinite(v) for v in vals.values()) and len(rep.per_bscan) > 0
    _check(1, ok, "absolute values not reproducible by design; toy PM "
           + " ".join(f"{k}={v:.4f}" for k, v in vals.items()) + " (directional checks: criteria 7, 8)")


# --- 2 ------------------------------------------------------------------------


def test_criterion_02_gradient_integrity():
    t0 = time.perf_counter()
    worst, failures = 0.0, []
    for case_id, fn, inputs in flat_cases():
        rep = grad_check(fn, [np.array(x, dtype=np.float64) for x in inputs], eps=1e-4, tol=1e-4)
        worst = max(worst, rep.max_rel_error)
        if not rep.passed:
            failures.append(f"{case_id}={rep.max_rel_error:.2e}")
    elapsed = time.perf_counter() - t0
    shapes = {}
    for name, _, variants in CASES:
        base = name.split("[")[0]
        shapes[base] = shapes.get(base, 0) + len(variants)
    thin = [g for g, ops in REQUIRED_GROUPS.items() if any(shapes.get(op, 0) < 3 for op in ops)]
    ok = not failures and not thin and elapsed < 120
    _check(2, ok, f"{len(flat_cases())} cases, max rel err {worst:.2e} (tol 1e-4), {elapsed:.1f}s (< 120s)"
           + (f"; failures {failures}" if failures else "") + (f"; <3 shapes: {thin}" if thin else ""))


# --- 3 ------------------------------------------------------------------------


def test_criterion_03_closed_form_oracles():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((3, 8, 32))
    z /= np.linalg.norm(z, axis=-1, keepdims=True)
    sim = lambda a, b: np.sum(a * b, axis=-1)  # noqa: E731  unit vectors
    errs = {}
    for tau in (0.5, 1.0, 2.0):
        want = np.mean((sim(z[0], z[2]) - sim(z[0], z[1])) / tau)
        errs[f"erm tau={tau}"] = abs(float(erm_loss(*map(Tensor, z), tau=tau).data) - want)
        errs[f"erm logform tau={tau}"] = abs(float(erm_loss_logform(*map(Tensor, z), tau=tau).data) - want)
    for shape in ((1, 1, 6, 6), (2, 1, 62, 62)):
        for fn in (gan_pair_losses, gan_quality_losses):
            d, _ = fn(Tensor(np.full(shape, 0.5)), Tensor(np.full(shape, 0.5)))
            errs[f"D(0.5) {fn.__name__} {shape}"] = abs(float(d.data) - 2 * math.log(2))
    tol_ok = all(v <= 1e-9 for v in errs.values())
    img = rng.uniform(0, 245, (64, 64))
    p = psnr(img, img + 10)
    psnr_ok = abs(p - 28.1308) <= 1e-4
    adj_ok = all(np.all(normalized_adjacency(n) == 1.0 / n) for n in (1, 2, 3, 4, 7, 16, 100, 256))
    _check(3, tol_ok and psnr_ok and adj_ok,
           f"max loss oracle err {max(errs.values()):.1e} (tol 1e-9); PSNR {p:.6f} vs 28.1308 (tol 1e-4); adjacency uniform 1/P: {adj_ok}")


# --- 4 ------------------------------------------------------------------------


def test_criterion_04_attention_properties():
    rng = np.random.default_rng(1)
    row_err = 0.0
    for p in (1, 2, 4, 9, 16, 256):
        h = Tensor(rng.standard_normal((p, 8)) * 2)
        g = gat_attention(h, Tensor(rng.standard_normal((6, 8))), Tensor(rng.standard_normal(12))).data
        row_err = max(row_err, float(np.abs(g.sum(axis=1) - 1).max()))
    ident_err = 0.0
    for heads in (1, 3, 5):
        h = np.tile(rng.standard_normal(6), (4, 1))
        w, a = rng.standard_normal((heads, 6, 6)), rng.standard_normal((heads, 12))
        gat = gat_layer_forward(Tensor(h), Tensor(w), Tensor(a)).data
        gcn = gcn_propagate(Tensor(h), Tensor(w.mean(axis=0).T), 4).data
        ident_err = max(ident_err, float(np.abs(gat - gcn).max()))
    params = init_params(ArchConfig.toy(), seed=0)
    f = rng.standard_normal((64, 2, 2))
    out = gem_forward(Tensor(f), params.gem).data.reshape(64, 4)
    perm_err = 0.0
    for _ in range(6):
        perm = rng.permutation(4)
        op = gem_forward(Tensor(f.reshape(64, 4)[:, perm].reshape(64, 2, 2)), params.gem).data.reshape(64, 4)
        perm_err = max(perm_err, float(np.abs(op - out[:, perm]).max()))
    ok = row_err <= 1e-9 and ident_err <= 1e-9 and perm_err <= 1e-9
    _check(4, ok, f"row-sum err {row_err:.1e}, identical-vertex vs gcn err {ident_err:.1e}, permutation err {perm_err:.1e} (tol 1e-9)")


# --- 5 ------------------------------------------------------------------------


def test_criterion_05_shape_contracts():
    details, ok = [], True
    full = ArchConfig()
    full_p = init_params(full, seed=0, dtype=np.float32)
    # full channel widths: parameter shapes fix the 2048-channel latent
    ok &= full_p.encoder["block4.conv2.w"].shape[0] == 2048 and full.latent_size == (16, 16)
    # full spatial size through a real forward pass; channel widths divided by 64 to fit in memory
    thin = init_params(ArchConfig(toy_scale=64), seed=0, dtype=np.float32)
    with no_grad():
        f = encoder_forward(Tensor(np.zeros((1, 3, 512, 512), np.float32)), thin.encoder)
        rec = decoder_forward(gem_forward(f, thin.gem), thin.decoder)
    ok &= f.shape[-2:] == (16, 16) and rec.shape[-2:] == (512, 512)
    details.append(f"full: latent {f.shape[-2]}x{f.shape[-1]}x{full_p.encoder['block4.conv2.w'].shape[0]}, decoded {rec.shape[-2]}x{rec.shape[-1]}")
    cube = Cube(np.random.default_rng(0).integers(0, 256, (128, 512, 512)).astype(np.uint8))
    n_full = predict_cube(cube, thin).slices
    ok &= n_full == 128
    toy = init_params(ArchConfig.toy(), seed=0)
    with no_grad():
        ft = encoder_forward(Tensor(np.zeros((1, 3, 64, 64))), toy.encoder)
        rt = decoder_forward(gem_forward(ft, toy.gem), toy.decoder)
    n_toy = predict_cube(Cube(np.zeros((16, 64, 64), np.uint8)), toy).slices
    ok &= ft.shape[-2:] == (2, 2) and rt.shape[-2:] == (64, 64) and n_toy == 16
    details.append(f"predict_cube {n_full} B-scans; toy latent {ft.shape[-2]}x{ft.shape[-1]}, decoded {rt.shape[-1]}, {n_toy} B-scans")
    _check(5, ok, "; ".join(details))


# --- 6 ------------------------------------------------------------------------


def test_criterion_06_preprocessing():
    from scipy import ndimage

    t0 = time.perf_counter()
    slices, depth, width = 4, 1024, 512
    bm = np.tile(500 + np.arange(width) // 8, (slices, 1))
    vox = np.full((slices, depth, width), 40, np.uint8)
    for s in range(slices):
        vox[s, bm[s], np.arange(width)] = 250
    out, surf = flatten_and_crop(Cube(vox), SurfaceSet(bm, bm - 40), ref_row=600)
    flat_ok = out.depth == 512 and np.all(out.voxels[:, 384] == 250) and np.all(surf.bm == 384)
    rng = np.random.default_rng(0)
    moving = ndimage.gaussian_filter(rng.uniform(0, 255, (128, 512)), 2.0)
    fixed = shift_plane(moving, dz=-2, dx=3)
    t = register_fundus(moving, fixed, max_shift=6)
    exact = (t.dx, t.dz) == (3, -2)
    noisy_ok = True
    for seed in range(5):
        noisy = fixed + np.random.default_rng(seed).standard_normal(fixed.shape) * 0.05 * np.ptp(moving)
        tn = register_fundus(moving, noisy, max_shift=6)
        noisy_ok &= abs(tn.dx - 3) <= 1 and abs(tn.dz + 2) <= 1
    elapsed = time.perf_counter() - t0
    _check(6, flat_ok and exact and noisy_ok and elapsed < 30,
           f"BM on row 384 of 512: {flat_ok}; noise-free ({t.dx},{t.dz}) vs (3,-2); 5% noise within 1px: {noisy_ok}; {elapsed:.1f}s")


# --- 7 ------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_07_toy_training_beats_identity(toy_runs):
    res, elapsed, _ = toy_runs.get("full", 0)
    l1_m, l1_b = res.report.mean("l1"), res.baseline.mean("l1")
    lp_m, lp_b = res.report.mean("one_minus_lpips"), res.baseline.mean("one_minus_lpips")
    gain = 1 - l1_m / l1_b
    ok = gain >= 0.10 and lp_m > lp_b and elapsed <= 1800
    _check(7, ok, f"L1 {l1_m:.4f} vs identity {l1_b:.4f} ({100 * gain:.1f}% better, need >= 10%); "
           f"1-LPIPS {lp_m:.4f} vs {lp_b:.4f}; {elapsed / 60:.1f} min (<= 30)")


# --- 8 ------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_08_ablation_direction(toy_runs):
    means = {}
    for v in VARIANTS:
        means[v] = float(np.mean([toy_runs.get(v, s)[0].report.mean("one_minus_lpips") for s in SEEDS]))
    gem_ok = means["full"] > means["no_gem"]
    disc_ok = means["full"] > means["disc_q"] and means["full"] > means["disc_p"]
    _check(8, gem_ok and disc_ok, "mean 1-LPIPS over seeds " + ", ".join(f"{k}={v:.4f}" for k, v in means.items())
           + f"; full > no-GEM: {gem_ok}; both D > each single D: {disc_ok} (ties fail)")


# --- 9 ------------------------------------------------------------------------


def test_criterion_09_protocol_integrity():
    t0 = time.perf_counter()
    ids = [f"S{i:02d}" for i in range(22)]
    p0 = make_split(ids, "P0", 5, seed=0, n_timepoints=6)
    sizes = sorted((len(f) for f in p0.folds), reverse=True)
    leaks = 0
    for k in p0.fold_ids():
        train_patients = {p for p, _ in p0.pairs(k, "train")}
        leaks += len({p for p, _ in p0.pairs(k, "test")} & train_patients)
    tested = sorted(p for k in p0.fold_ids() for p, _ in p0.pairs(k, "test"))
    pm = make_split(ids, "PM", n_timepoints=6)
    held_ok = all(
        (p, 4) in pm.pairs(0, "test") and all(t + 1 < 4 for q, t in pm.pairs(0, "train") if q == p) for p in ids
    ) and len(pm.pairs(0, "test")) == 22
    elapsed = (time.perf_counter() - t0) * 1e3
    ok = sizes == [5, 5, 4, 4, 4] and leaks == 0 and tested == ids and held_ok
    _check(9, ok, f"fold sizes {sizes}; P0 leakage {leaks}; PM holds out last two cubes: {held_ok}; {elapsed:.1f} ms")


# --- 10 -----------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_10_determinism(toy_runs):
    a, _, csv_a = toy_runs.get("full", 0)
    b, _, csv_b = toy_runs.get("full", 0, tag="_rerun")
    same_params = a.checksums == b.checksums
    same_csv = Path(csv_a).read_bytes() == Path(csv_b).read_bytes()
    _check(10, same_params and same_csv, f"checksums equal: {same_params} ({a.checksums[0][:12]}...); MetricsReport CSVs identical: {same_csv}")
