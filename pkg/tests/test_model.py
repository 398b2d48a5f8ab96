import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shenet.diffcore import Tensor, grad_check, no_grad
from shenet.diffcore import ops as F
from shenet.model import (
    ArchConfig,
    CheckpointError,
    ConfigError,
    cab_forward,
    decoder_forward,
    discriminator_forward,
    enc_block_forward,
    encoder_forward,
    gat_attention,
    gat_layer_forward,
    gcn_propagate,
    gem_forward,
    generator_predict,
    generator_reconstruct,
    init_params,
    load_checkpoint,
    normalized_adjacency,
    projection_head,
    save_checkpoint,
)
from shenet.model.params import DISCRIMINATOR_GROUPS, GENERATOR_GROUPS


def mish(x):
    return x * np.tanh(np.log1p(np.exp(x)))


@pytest.fixture(scope="module")
def toy():
    cfg = ArchConfig.toy()
    return cfg, init_params(cfg, seed=3)


# --- config -----------------------------------------------------------------


def test_config_defaults_and_invariants():
    cfg = ArchConfig()
    assert cfg.enc_dims == (128, 256, 512, 1024, 2048)
    assert cfg.gem_dims == (1024, 1024, 1024)
    assert cfg.heads == 5 and cfg.in_channels == 3
    assert cfg.latent_size == (16, 16) and cfg.n_vertices == 256
    with pytest.raises(ConfigError):
        ArchConfig(input_size=(100, 100))
    toy = ArchConfig.toy()
    assert toy.enc_channels == [8, 16, 32, 64, 128] and toy.gem_channels == [64, 64, 64]
    assert toy.n_vertices == 4


def test_config_text_round_trip():
    cfg = ArchConfig.toy(delta_s=2, heads=3)
    assert ArchConfig.from_text(cfg.to_text()) == cfg
    with pytest.raises(ConfigError):
        ArchConfig.from_text("bogus=1")


# --- CAB / blocks -------------------------------------------------------------


def test_cab_zero_weights_halve_input(rng):
    f = rng.standard_normal((4, 3, 3))
    out = cab_forward(Tensor(f), Tensor(np.zeros((1, 4))), Tensor(np.zeros((4, 1))))
    np.testing.assert_allclose(out.data, f / 2, atol=1e-15)


@given(st.integers(0, 10_000))
def test_cab_scales_in_open_unit_interval(seed):
    r = np.random.default_rng(seed)
    f = np.abs(r.standard_normal((1, 3, 2, 2))) + 0.1
    out = cab_forward(Tensor(f), Tensor(r.standard_normal((2, 3))), Tensor(r.standard_normal((3, 2))))
    s = out.data / f
    assert np.all(s > 0) and np.all(s < 1)


def test_cab_two_channel_scalar_oracle():
    f = np.array([[[1.0, 3.0]], [[2.0, -2.0]]])  # C=2, 1x2
    ws = np.array([[0.5, -1.0]])
    we = np.array([[2.0], [-1.0]])
    gap = np.array([2.0, 0.0])
    hidden = max(0.0, 0.5 * gap[0] - 1.0 * gap[1])
    s = [1 / (1 + math.exp(-2.0 * hidden)), 1 / (1 + math.exp(1.0 * hidden))]
    out = cab_forward(Tensor(f), Tensor(ws), Tensor(we)).data
    np.testing.assert_allclose(out[0], f[0] * s[0], atol=1e-15)
    np.testing.assert_allclose(out[1], f[1] * s[1], atol=1e-15)


def test_enc_block_shape_and_zero_input(toy):
    cfg, p = toy
    x = Tensor(np.random.default_rng(0).standard_normal((3, 64, 64)))
    assert enc_block_forward(x, p.encoder, "block0").shape == (8, 32, 32)
    zero_bias = {k: (Tensor(np.zeros_like(v.data)) if k.endswith(".b") else v) for k, v in p.encoder.items()}
    assert np.all(enc_block_forward(Tensor(np.zeros((3, 64, 64))), zero_bias, "block0").data == 0)


def test_enc_block_grad_check_tiny(rng):
    p = {
        "b.conv1.w": rng.standard_normal((2, 2, 3, 3)) * 0.5, "b.conv1.b": rng.standard_normal(2) * 0.1,
        "b.conv2.w": rng.standard_normal((2, 2, 3, 3)) * 0.5, "b.conv2.b": rng.standard_normal(2) * 0.1,
        "b.cab.squeeze": rng.standard_normal((1, 2)), "b.cab.excite": rng.standard_normal((2, 1)),
    }
    names = list(p)
    rep = grad_check(lambda x, *w: enc_block_forward(x, dict(zip(names, w)), "b"),
                     [rng.standard_normal((2, 8, 8))] + [p[k] for k in names], eps=1e-4, max_elements=40)
    assert rep.passed, rep.max_rel_error


# --- encoder / decoder -----------------------------------------------------


def test_toy_encoder_decoder_shapes(toy):
    cfg, p = toy
    x = Tensor(np.random.default_rng(1).uniform(-1, 1, (3, 64, 64)))
    f = encoder_forward(x, p.encoder)
    assert f.shape == (64, 2, 2)
    out = decoder_forward(gem_forward(f, p.gem), p.decoder)
    assert out.shape == (1, 64, 64)
    assert np.all(np.abs(out.data) <= 1)


def test_encoder_rejects_indivisible_size(toy):
    _, p = toy
    with pytest.raises(ConfigError):
        encoder_forward(Tensor(np.zeros((3, 48, 40))), p.encoder)


def test_decoder_rejects_width_mismatch(toy):
    _, p = toy
    with pytest.raises(ConfigError):
        decoder_forward(Tensor(np.zeros((32, 2, 2))), p.decoder)


def test_full_scale_parameter_shapes():
    cfg = ArchConfig()
    p = init_params(cfg, seed=0, dtype=np.float32)
    assert p.encoder["block4.conv2.w"].shape == (2048, 2048, 3, 3)
    assert p.encoder["map.w"].shape == (1024, 2048, 1, 1)
    assert p.gem["gat2.w"].shape == (5, 1024, 1024)
    assert p.decoder["map.w"].shape == (2048, 1024, 1, 1)
    assert p.decoder["out.w"].shape == (1, 128, 1, 1)
    assert p.quality_disc["conv0.w"].shape == (64, 1, 4, 4)
    assert p.pair_disc["conv0.w"].shape == (64, 2, 4, 4)
    assert p.quality_disc["conv4.w"].shape == (1, 512, 4, 4)


def test_full_scale_spatial_contract_with_thin_channels():
    # spatial arithmetic depends only on input size and depth, so thin channels suffice
    cfg = ArchConfig(toy_scale=64)
    p = init_params(cfg, seed=0)
    with no_grad():
        f = encoder_forward(Tensor(np.zeros((1, 3, 512, 512))), p.encoder)
        assert f.shape == (1, 16, 16, 16)
        assert p.encoder["block4.conv2.w"].shape[0] == 2048 // 64
        out = decoder_forward(gem_forward(f, p.gem), p.decoder)
        assert out.shape == (1, 1, 512, 512)
        assert discriminator_forward(Tensor(np.zeros((1, 1, 512, 512))), p.quality_disc).shape == (1, 1, 62, 62)


def test_toy_discriminator_shapes_and_range(toy):
    _, p = toy
    x = Tensor(np.random.default_rng(2).uniform(-1, 1, (2, 1, 64, 64)))
    d = discriminator_forward(x, p.quality_disc)
    assert d.shape == (2, 1, 6, 6)
    assert np.all((d.data > 0) & (d.data < 1))
    pair = Tensor(np.random.default_rng(3).uniform(-1, 1, (2, 64, 64)))
    assert discriminator_forward(pair, p.pair_disc).shape == (1, 6, 6)


# --- graph operators ------------------------------------------------------


def test_normalized_adjacency_uniform():
    assert normalized_adjacency(1).tolist() == [[1.0]]
    np.testing.assert_array_equal(normalized_adjacency(4), np.full((4, 4), 0.25))
    for p in (2, 3, 7, 256):
        a = normalized_adjacency(p)
        assert np.all(a == 1.0 / p)
        np.testing.assert_allclose(a.sum(axis=1), 1.0, atol=1e-12)


def test_gcn_propagate_examples():
    v = np.array([0.3, -1.2, 2.0])
    out = gcn_propagate(Tensor(np.tile(v, (4, 1))), Tensor(np.eye(3)))
    np.testing.assert_allclose(out.data, np.tile(mish(v), (4, 1)), atol=1e-12)
    out = gcn_propagate(Tensor(np.eye(2)), Tensor(np.eye(2)), 2)
    np.testing.assert_allclose(out.data, np.tile(mish(np.array([0.5, 0.5])), (2, 1)), atol=1e-12)


def test_gat_attention_examples(rng):
    h = np.tile(rng.standard_normal(3), (5, 1))
    g = gat_attention(Tensor(h), Tensor(rng.standard_normal((4, 3))), Tensor(rng.standard_normal(8)))
    np.testing.assert_allclose(g.data, 0.2, atol=1e-12)
    g1 = gat_attention(Tensor(rng.standard_normal((1, 3))), Tensor(rng.standard_normal((2, 3))), Tensor(rng.standard_normal(4)))
    assert g1.data.tolist() == [[1.0]]
    # P=2, W=I, a=[1,0,...]: e_pq = lrelu(h_p[0]) independent of q -> uniform rows
    h2 = np.array([[0.7, -0.3], [-1.5, 2.0]])
    a = np.array([1.0, 0.0, 0.0, 0.0])
    g2 = gat_attention(Tensor(h2), Tensor(np.eye(2)), Tensor(a)).data
    np.testing.assert_allclose(g2, 0.5, atol=1e-12)
    # a on the neighbour half: e_pq = lrelu(h_q[0])
    a = np.array([0.0, 0.0, 1.0, 0.0])
    e = [0.7, -0.2 * 1.5]
    exp = np.exp(e) / np.exp(e).sum()
    g3 = gat_attention(Tensor(h2), Tensor(np.eye(2)), Tensor(a)).data
    np.testing.assert_allclose(g3, np.tile(exp, (2, 1)), atol=1e-10)


@given(st.integers(0, 10_000), st.integers(1, 9), st.integers(1, 4))
def test_gat_rows_sum_to_one(seed, p, heads):
    r = np.random.default_rng(seed)
    h = Tensor(r.standard_normal((p, 3)) * 3)
    for g in range(heads):
        gamma = gat_attention(h, Tensor(r.standard_normal((4, 3))), Tensor(r.standard_normal(8))).data
        np.testing.assert_allclose(gamma.sum(axis=1), 1.0, atol=1e-9)


def test_gat_layer_identical_vertices(rng):
    v = rng.standard_normal(3)
    h = Tensor(np.tile(v, (4, 1)))
    out = gat_layer_forward(h, Tensor(np.eye(3)[None]), Tensor(rng.standard_normal((1, 6))))
    np.testing.assert_allclose(out.data, np.tile(mish(v), (4, 1)), atol=1e-12)


def test_gat_layer_reduces_to_gcn_for_identical_vertices(rng):
    h = np.tile(rng.standard_normal(6), (4, 1))
    w = rng.standard_normal((5, 6, 6))
    a = rng.standard_normal((5, 12))
    gat = gat_layer_forward(Tensor(h), Tensor(w), Tensor(a)).data
    w_mean = w.mean(axis=0).T  # heads averaged; gcn takes (d_in, d_out)
    gcn = gcn_propagate(Tensor(h), Tensor(w_mean), 4).data
    np.testing.assert_allclose(gat, gcn, atol=1e-9)


def test_gat_layer_grad_check(rng):
    rep = grad_check(lambda h, w, a: gat_layer_forward(h, w, a),
                     [rng.standard_normal((4, 3)), rng.standard_normal((2, 3, 3)), rng.standard_normal((2, 6))], eps=1e-4)
    assert rep.passed


def test_gat_center_aggregation_is_per_vertex_map(rng):
    h = rng.standard_normal((5, 4))
    w = rng.standard_normal((3, 6, 4))
    a = rng.standard_normal((3, 12)) * 3
    out = gat_layer_forward(Tensor(h), Tensor(w), Tensor(a), aggregate="center").data
    # attention rows sum to one, so only the head-averaged projection of h_p remains
    np.testing.assert_allclose(out, mish(h @ w.mean(axis=0).T), atol=1e-12)
    # attention vector has no influence on the output
    other = gat_layer_forward(Tensor(h), Tensor(w), Tensor(-a), aggregate="center").data
    np.testing.assert_allclose(other, out, atol=1e-12)


def test_gat_aggregations_agree_on_identical_vertices(rng):
    h = Tensor(np.tile(rng.standard_normal(4), (6, 1)))
    w, a = Tensor(rng.standard_normal((2, 4, 4))), Tensor(rng.standard_normal((2, 8)))
    np.testing.assert_allclose(
        gat_layer_forward(h, w, a, aggregate="center").data, gat_layer_forward(h, w, a, aggregate="neighbors").data, atol=1e-12
    )
    with pytest.raises(ValueError):
        gat_layer_forward(h, w, a, aggregate="self")
    with pytest.raises(ConfigError):
        ArchConfig.toy(gem_aggregate="self")


def test_gat_center_grad_check(rng):
    rep = grad_check(lambda h, w, a: gat_layer_forward(h, w, a, aggregate="center"),
                     [rng.standard_normal((4, 3)), rng.standard_normal((2, 3, 3)), rng.standard_normal((2, 6))], eps=1e-4)
    assert rep.passed


def test_neighbor_aggregation_erases_vertex_contrast(rng):
    # one linear LeakyReLU regime: the query term cancels in the softmax, so every row is identical
    h = rng.uniform(0.5, 1.0, (4, 3))
    w = np.eye(3)[None]
    a = np.ones((1, 6))
    gamma = gat_attention(Tensor(h), Tensor(w[0]), Tensor(a[0])).data
    np.testing.assert_allclose(gamma, np.tile(gamma[:1], (4, 1)), atol=1e-12)
    out = gat_layer_forward(Tensor(h), Tensor(w), Tensor(a)).data
    assert np.ptp(out, axis=0).max() < 1e-12
    keep = gat_layer_forward(Tensor(h), Tensor(w), Tensor(a), aggregate="center").data
    np.testing.assert_allclose(keep, mish(h), atol=1e-12)


@pytest.mark.parametrize("aggregate", ["neighbors", "center"])
def test_gem_equivariance_both_aggregations(rng, aggregate):
    cfg = ArchConfig.toy(gem_aggregate=aggregate)
    p = init_params(cfg, seed=2)
    f = rng.standard_normal((64, 2, 2))
    out = gem_forward(Tensor(f), p.gem, aggregate=aggregate).data.reshape(64, 4)
    perm = [2, 0, 3, 1]
    op = gem_forward(Tensor(f.reshape(64, 4)[:, perm].reshape(64, 2, 2)), p.gem, aggregate=aggregate).data.reshape(64, 4)
    np.testing.assert_allclose(op[:, np.argsort(perm)], out, atol=1e-9)


def test_gem_shape_and_permutation_equivariance(toy, rng):
    _, p = toy
    f = rng.standard_normal((64, 2, 2))
    out = gem_forward(Tensor(f), p.gem).data
    assert out.shape == f.shape
    v = f.reshape(64, 4)
    for perm in ([1, 0, 3, 2], [3, 1, 2, 0], [2, 3, 0, 1]):
        fp = v[:, perm].reshape(64, 2, 2)
        op = gem_forward(Tensor(fp), p.gem).data.reshape(64, 4)
        np.testing.assert_allclose(op[:, np.argsort(perm)], out.reshape(64, 4), atol=1e-9)
    np.testing.assert_array_equal(gem_forward(Tensor(f), p.gem).data, out)


def test_projection_head_examples(rng):
    z = projection_head(Tensor(np.ones((3, 2, 2))), Tensor(np.eye(3)), Tensor(np.eye(3)))
    np.testing.assert_array_equal(z.data, 1.0)
    z0 = projection_head(Tensor(np.zeros((3, 2, 2))), Tensor(rng.standard_normal((4, 3))), Tensor(rng.standard_normal((2, 4))))
    np.testing.assert_array_equal(z0.data, 0.0)
    f = rng.standard_normal((2, 3, 4, 4))
    w1, w2 = rng.standard_normal((5, 3)), rng.standard_normal((2, 5))
    oracle = np.maximum(f.mean(axis=(2, 3)) @ w1.T, 0) @ w2.T
    np.testing.assert_allclose(projection_head(Tensor(f), Tensor(w1), Tensor(w2)).data, oracle, atol=1e-12)


# --- generators ------------------------------------------------------------


def test_generator_shape_contract(toy):
    _, p = toy
    x = Tensor(np.random.default_rng(5).uniform(-1, 1, (3, 64, 64)))
    pred, f_in, f_pred = generator_predict(x, p)
    assert pred.shape == (1, 64, 64) and f_in.shape == (64, 2, 2) and f_pred.shape == (64, 2, 2)
    rec, f = generator_reconstruct(x, p)
    assert rec.shape == (1, 64, 64) and f.shape == (64, 2, 2)
    np.testing.assert_array_equal(generator_predict(x, p)[0].data, pred.data)


def test_predict_without_gem_equals_reconstruct(toy):
    _, p = toy
    x = Tensor(np.random.default_rng(6).uniform(-1, 1, (2, 3, 64, 64)))
    np.testing.assert_array_equal(generator_predict(x, p, use_gem=False)[0].data, generator_reconstruct(x, p)[0].data)


def test_encoder_weights_shared_by_both_generators(toy):
    _, p0 = toy
    p = p0.copy()
    x = Tensor(np.random.default_rng(7).uniform(-1, 1, (3, 64, 64)))
    before = generator_predict(x, p)[0].data.copy(), generator_reconstruct(x, p)[0].data.copy()
    p.encoder["block0.conv1.w"].data += 0.5
    after = generator_predict(x, p)[0].data, generator_reconstruct(x, p)[0].data
    assert not np.array_equal(before[0], after[0]) and not np.array_equal(before[1], after[1])


def test_reconstruct_overfits_single_image():
    from shenet.harness.optim import AdamState, adam_step
    from shenet.diffcore import backward

    cfg = ArchConfig.toy()
    p = init_params(cfg, seed=0)
    r = np.random.default_rng(0)
    yy, xx = np.mgrid[0:64, 0:64]
    target = np.where((yy > 30) & (yy < 40), 0.8, -0.6) + 0.2 * np.sin(xx / 5.0)
    stack = np.stack([target] * 3)[None]
    named = dict(p.named(("encoder", "decoder")))
    state = AdamState()
    for _ in range(150):
        for t in named.values():
            t.grad = None
        rec, _ = generator_reconstruct(Tensor(stack), p)
        loss = F.mean(F.abs(rec - Tensor(target[None, None])))
        backward(loss)
        adam_step(named, {k: t.grad for k, t in named.items()}, state, 2e-3)
    with no_grad():
        rec, _ = generator_reconstruct(Tensor(stack), p)
    # L1 as a fraction of the [-1, 1] dynamic range
    assert np.mean(np.abs(rec.data[0, 0] - target)) / 2.0 < 0.05


# --- params / checkpoint --------------------------------------------------


def test_param_groups_disjoint_and_counts(toy):
    _, p = toy
    g = {n for n, _ in p.named(GENERATOR_GROUPS)}
    d = {n for n, _ in p.named(DISCRIMINATOR_GROUPS)}
    assert g and d and not (g & d)
    assert p.n_parameters() == sum(t.size for t in p.generator_tensors() + p.discriminator_tensors())


def test_init_is_seeded(toy):
    cfg, p = toy
    assert init_params(cfg, seed=3).checksum() == p.checksum()
    assert init_params(cfg, seed=4).checksum() != p.checksum()
    normal = init_params(cfg, seed=3, init="normal")
    assert abs(normal.encoder["block2.conv1.w"].data.std() - 0.02) < 0.002


def test_checkpoint_round_trip(tmp_path, toy):
    cfg, p = toy
    p32 = init_params(cfg, seed=3, dtype=np.float32)
    path = save_checkpoint(tmp_path / "c.npz", p32)
    q = load_checkpoint(path)
    assert q.config == cfg and q.checksum() == p32.checksum()


def test_checkpoint_rejects_bad_shapes(tmp_path, toy):
    cfg, p = toy
    path = save_checkpoint(tmp_path / "c.npz", p)
    with np.load(path) as z:
        arrays = {k: z[k] for k in z.files}
    arrays["encoder/map.w"] = arrays["encoder/map.w"][:, :-1]
    np.savez(tmp_path / "bad.npz", **arrays)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "bad.npz")
    del arrays["encoder/map.w"]
    np.savez(tmp_path / "missing.npz", **arrays)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.npz")


# --- LSUV calibration ---------------------------------------------------------


def _pre_activation_rms(params, x, use_gem):
    """RMS of every conv / GAT pre-activation along the generator path, recomputed from scratch."""
    from shenet.model.networks import gat_pre_activation

    rms = lambda t: float(np.sqrt(np.mean(t.data.astype(np.float64) ** 2)))  # noqa: E731
    out = []
    with no_grad():
        enc, y = params.encoder, Tensor(x)
        for i in range(len(params.config.enc_channels)):
            b = f"block{i}"
            z = F.conv2d(y, enc[f"{b}.conv1.w"], enc[f"{b}.conv1.b"], padding=1)
            out.append(rms(z))
            z = F.conv2d(F.relu(z), enc[f"{b}.conv2.w"], enc[f"{b}.conv2.b"], padding=1)
            out.append(rms(z))
            y = F.maxpool2d(cab_forward(F.relu(z), enc[f"{b}.cab.squeeze"], enc[f"{b}.cab.excite"]), 2)
        f = F.conv2d(y, enc["map.w"], enc["map.b"])
        out.append(rms(f))
        if use_gem:
            n, d, hh, ww = f.shape
            v = F.transpose(F.reshape(f, (n, d, hh * ww)), (0, 2, 1))
            for i in range(len(params.config.gem_channels)):
                z = gat_pre_activation(v, params.gem[f"gat{i}.w"], params.gem[f"gat{i}.a"], params.config.slope, params.config.gem_aggregate)
                out.append(rms(z))
                v = F.mish(z)
            f = F.reshape(F.transpose(v, (0, 2, 1)), (n, v.shape[-1], hh, ww))
        dec = params.decoder
        y = F.conv2d(f, dec["map.w"], dec["map.b"])
        out.append(rms(y))
        for i in range(len(params.config.dec_channels)):
            b = f"block{i}"
            y = F.conv_transpose2d(y, dec[f"{b}.up.w"], dec[f"{b}.up.b"], stride=2)
            out.append(rms(y))
            for c in ("conv1", "conv2"):
                y = F.conv2d(F.relu(y), dec[f"{b}.{c}.w"], dec[f"{b}.{c}.b"], padding=1)
                out.append(rms(y))
            y = F.relu(y)
        final = rms(F.conv2d(y, dec["out.w"], dec["out.b"]))
    return out, final


@pytest.mark.parametrize("use_gem", [True, False])
def test_lsuv_calibration_hits_target_rms(use_gem):
    from shenet.model import lsuv_calibrate

    cfg = ArchConfig.toy()
    params = init_params(cfg, seed=5)
    x = np.random.default_rng(0).uniform(-1, 1, (4, cfg.in_channels) + cfg.input_size)
    before, _ = _pre_activation_rms(params, x, use_gem)
    assert min(before) < 0.1  # plain He init lets the signal shrink
    lsuv_calibrate(params, x, use_gem=use_gem, tol=1e-3, iters=20)
    after, final = _pre_activation_rms(params, x, use_gem)
    np.testing.assert_allclose(after, 1.0, rtol=2e-3)
    assert final == pytest.approx(0.5, rel=2e-3)


def test_lsuv_leaves_discriminators_and_head_untouched():
    from shenet.model import lsuv_calibrate

    cfg = ArchConfig.toy()
    params = init_params(cfg, seed=5)
    ref = params.copy()
    x = np.random.default_rng(1).uniform(-1, 1, (2, cfg.in_channels) + cfg.input_size)
    lsuv_calibrate(params, x)
    untouched = DISCRIMINATOR_GROUPS + ("projection_head",)
    assert params.checksum(untouched) == ref.checksum(untouched)
    assert params.checksum(("encoder",)) != ref.checksum(("encoder",))
    # biases stay zero and only the scale of each weight tensor changes
    for name, t in params.named(("encoder", "gem", "decoder")):
        r = dict(ref.named(("encoder", "gem", "decoder")))[name]
        if name.endswith(".b"):
            assert not t.data.any()
        elif not name.endswith((".a", "squeeze", "excite")):
            ratio = t.data / r.data
            assert np.all(ratio > 0) and np.ptp(ratio) < 1e-9 * ratio.max()
    again = ref.copy()
    lsuv_calibrate(again, x)
    assert again.checksum() == params.checksum()
