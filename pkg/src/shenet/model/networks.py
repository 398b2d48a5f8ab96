"""Encoder, graph evolution module, decoder, projection head and PatchGAN discriminators.

All forward functions take a batch ``(N, C, H, W)`` (a single ``(C, H, W)``
item also works) and a flat ``{name: Tensor}`` parameter map.
"""
from __future__ import annotations

import numpy as np

from ..diffcore import Tensor
from ..diffcore import ops as F
from .config import ArchConfig


# ---------------------------------------------------------------------------
# building blocks


def cab_forward(f: Tensor, w_squeeze: Tensor, w_excite: Tensor) -> Tensor:
    """Squeeze-and-excitation channel attention: ``f * sigmoid(We relu(Ws GAP(f)))``."""
    single = f.ndim == 3
    if single:
        f = F.reshape(f, (1,) + f.shape)
    s = F.global_avg_pool(f)
    s = F.sigmoid(F.linear(F.relu(F.linear(s, w_squeeze)), w_excite))
    out = F.channel_scale(f, s)
    return F.reshape(out, out.shape[1:]) if single else out


def enc_block_forward(x: Tensor, p: dict, prefix: str) -> Tensor:
    y = F.relu(F.conv2d(x, p[f"{prefix}.conv1.w"], p[f"{prefix}.conv1.b"], padding=1))
    y = F.relu(F.conv2d(y, p[f"{prefix}.conv2.w"], p[f"{prefix}.conv2.b"], padding=1))
    y = cab_forward(y, p[f"{prefix}.cab.squeeze"], p[f"{prefix}.cab.excite"])
    return F.maxpool2d(y, 2)


def dec_block_forward(x: Tensor, p: dict, prefix: str) -> Tensor:
    y = F.relu(F.conv_transpose2d(x, p[f"{prefix}.up.w"], p[f"{prefix}.up.b"], stride=2))
    y = F.relu(F.conv2d(y, p[f"{prefix}.conv1.w"], p[f"{prefix}.conv1.b"], padding=1))
    return F.relu(F.conv2d(y, p[f"{prefix}.conv2.w"], p[f"{prefix}.conv2.b"], padding=1))


def encoder_forward(x: Tensor, p: dict) -> Tensor:
    n_blocks = sum(1 for k in p if k.endswith(".conv1.w"))
    h, w = x.shape[-2:]
    if h % (2**n_blocks) or w % (2**n_blocks):
        from .config import ConfigError

        raise ConfigError(f"input {(h, w)} not divisible by 2^{n_blocks}")
    y = x
    for i in range(n_blocks):
        y = enc_block_forward(y, p, f"block{i}")
    return F.conv2d(y, p["map.w"], p["map.b"])


def decoder_forward(f: Tensor, p: dict) -> Tensor:
    if f.shape[-3] != p["map.w"].shape[1]:
        from .config import ConfigError

        raise ConfigError(f"decoder expects {p['map.w'].shape[1]} channels, got {f.shape[-3]}")
    n_blocks = sum(1 for k in p if k.endswith(".up.w"))
    y = F.conv2d(f, p["map.w"], p["map.b"])
    for i in range(n_blocks):
        y = dec_block_forward(y, p, f"block{i}")
    return F.tanh(F.conv2d(y, p["out.w"], p["out.b"]))


def projection_head(f: Tensor, w1: Tensor, w2: Tensor) -> Tensor:
    """``W2 relu(W1 GAP(f))`` without biases."""
    return F.linear(F.relu(F.linear(F.global_avg_pool(f), w1)), w2)


# ---------------------------------------------------------------------------
# graph operators


def normalized_adjacency(n_vertices: int) -> np.ndarray:
    """``D^-1/2 (A + I) D^-1/2`` for the fully-connected graph on ``n_vertices``."""
    if n_vertices < 1:
        raise ValueError("graph needs at least one vertex")
    a_hat = np.ones((n_vertices, n_vertices))  # A + I with every pair connected
    d = a_hat.sum(axis=1)
    # one sqrt of the degree product keeps the fully-connected case exactly 1/P
    return a_hat / np.sqrt(d[:, None] * d[None, :])


def gcn_propagate(h: Tensor, w: Tensor, n_vertices: int | None = None) -> Tensor:
    """``mish(A_norm H W)`` with the fully-connected normalized adjacency."""
    n = h.shape[-2] if n_vertices is None else n_vertices
    adj = Tensor(normalized_adjacency(n).astype(h.dtype))
    return F.mish(F.matmul(adj, F.matmul(h, w)))


def _gat_heads(h: Tensor, w: Tensor, a: Tensor, slope: float):
    """Per-head projections ``(N, G, P, d)`` and attention ``(N, G, P, P)``."""
    g, d_out, _ = w.shape
    hb = F.reshape(h, (h.shape[0], 1) + h.shape[1:])
    wh = F.matmul(hb, F.transpose(w, (0, 2, 1)))
    a_src = F.reshape(a[:, :d_out], (g, d_out, 1))
    a_dst = F.reshape(a[:, d_out:], (g, d_out, 1))
    s_src = F.reshape(F.matmul(wh, a_src), wh.shape[:-1])
    s_dst = F.reshape(F.matmul(wh, a_dst), wh.shape[:-1])
    scores = F.leaky_relu(F.outer_sum(s_src, s_dst), slope)
    return wh, F.softmax(scores, axis=-1)


def gat_attention(h: Tensor, w: Tensor, a: Tensor, slope: float = 0.2) -> Tensor:
    """Single-head attention matrix ``gamma[p, q]`` over the fully-connected graph."""
    _, gamma = _gat_heads(F.reshape(h, (1,) + h.shape), F.reshape(w, (1,) + w.shape), F.reshape(a, (1,) + a.shape), slope)
    return F.reshape(gamma, gamma.shape[-2:])


def gat_layer_forward(h: Tensor, w: Tensor, a: Tensor, slope: float = 0.2, aggregate: str = "neighbors") -> Tensor:
    """Multi-head GAT layer, heads averaged, Mish output.

    ``h`` is ``(P, d_in)`` or ``(N, P, d_in)``; ``w`` is ``(G, d_out, d_in)`` and
    ``a`` is ``(G, 2 d_out)``. ``aggregate='neighbors'`` sums ``gamma_pq W h_q``
    (standard GAT); ``'center'`` sums ``gamma_pq W h_p`` over q, which keeps
    each vertex's own features since every attention row sums to one.
    """
    single = h.ndim == 2
    if single:
        h = F.reshape(h, (1,) + h.shape)
    out = F.mish(gat_pre_activation(h, w, a, slope, aggregate))
    return F.reshape(out, out.shape[1:]) if single else out


def gat_pre_activation(h: Tensor, w: Tensor, a: Tensor, slope: float = 0.2, aggregate: str = "neighbors") -> Tensor:
    """Head-averaged aggregate ``(N, P, d_out)`` before the Mish."""
    wh, gamma = _gat_heads(h, w, a, slope)
    if aggregate == "neighbors":
        agg = F.matmul(gamma, wh)
    elif aggregate == "center":
        rows = F.sum(gamma, axis=-1, keepdims=True)  # (N, G, P, 1), each entry 1 up to rounding
        ones = Tensor(np.ones((1, wh.shape[-1]), dtype=wh.dtype))
        agg = F.mul(F.matmul(rows, ones), wh)
    else:
        raise ValueError(f"aggregate must be 'neighbors' or 'center', got {aggregate!r}")
    return F.mean(agg, axis=1)


def gem_forward(f: Tensor, p: dict, slope: float = 0.2, aggregate: str = "neighbors") -> Tensor:
    """Graph evolution over the spatial positions of ``f``; shape is preserved."""
    single = f.ndim == 3
    if single:
        f = F.reshape(f, (1,) + f.shape)
    n, d, hh, ww = f.shape
    v = F.transpose(F.reshape(f, (n, d, hh * ww)), (0, 2, 1))
    n_layers = sum(1 for k in p if k.endswith(".w"))
    for i in range(n_layers):
        v = gat_layer_forward(v, p[f"gat{i}.w"], p[f"gat{i}.a"], slope, aggregate)
    out = F.reshape(F.transpose(v, (0, 2, 1)), (n, v.shape[-1], hh, ww))
    return F.reshape(out, out.shape[1:]) if single else out


def gem_apply(f: Tensor, params) -> Tensor:
    """``gem_forward`` with the slope and aggregation of ``params.config``."""
    return gem_forward(f, params.gem, params.config.slope, params.config.gem_aggregate)


# ---------------------------------------------------------------------------
# discriminator


def discriminator_forward(img: Tensor, p: dict, slope: float = 0.2) -> Tensor:
    """PatchGAN: stride-2 4x4 convs, then two stride-1 4x4 convs, sigmoid patch map."""
    n_layers = sum(1 for k in p if k.endswith(".w"))
    y = img
    for i in range(n_layers):
        stride = 2 if i < n_layers - 2 else 1
        y = F.conv2d(y, p[f"conv{i}.w"], p[f"conv{i}.b"], stride=stride, padding=1)
        if i < n_layers - 1:
            y = F.leaky_relu(y, slope)
    return F.sigmoid(y)


# ---------------------------------------------------------------------------
# generators


def generator_predict(x_stack: Tensor, params, use_gem: bool = True):
    """Prediction path: encode, evolve the latent graph, decode.

    Returns ``(prediction, encoded_features, evolved_features)``.
    """
    f_in = encoder_forward(x_stack, params.encoder)
    f_pred = gem_apply(f_in, params) if use_gem else f_in
    return decoder_forward(f_pred, params.decoder), f_in, f_pred


def generator_reconstruct(x_stack: Tensor, params):
    """Reconstruction path: the same encoder and decoder without graph evolution."""
    f = encoder_forward(x_stack, params.encoder)
    return decoder_forward(f, params.decoder), f
