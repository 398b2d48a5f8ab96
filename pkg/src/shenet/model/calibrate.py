"""Layer-sequential unit-variance (LSUV) rescaling of generator weights.

He/Glorot init keeps variance per layer only approximately: CAB gates near
0.5, head averaging and attention pooling in the GEM and Mish all shrink the
signal, so after a dozen layers the activations are ~1e-4 and zero-bias ReLU
units die within a few hundred Adam steps. Walking the generator in forward
order on a real batch and scaling each weight so its pre-activation RMS hits
a target removes that drift. Biases are zero at init, so one pass is exact
for convolutions; the GAT layers get a few fixed-point iterations.
"""
from __future__ import annotations

import numpy as np

from ..diffcore import Tensor, no_grad
from ..diffcore import ops as F
from .networks import cab_forward, gat_pre_activation
from .params import ModelParams


def _rms(t: Tensor) -> float:
    return float(np.sqrt(np.mean(np.square(t.data, dtype=np.float64))))


def _fit(w: Tensor, measure, target: float, iters: int, tol: float) -> None:
    for _ in range(iters):
        r = measure()
        if r <= 0.0 or abs(r / target - 1.0) < tol:
            return
        w.data *= np.asarray(target / r, dtype=w.data.dtype)


def lsuv_calibrate(
    params: ModelParams,
    stacks: np.ndarray,
    use_gem: bool = True,
    target: float = 1.0,
    out_rms: float = 0.5,
    iters: int = 5,
    tol: float = 0.02,
) -> ModelParams:
    """Rescale encoder, GEM and decoder weights in place from a probe batch ``stacks`` (N, C, H, W).

    Each conv / GAT pre-activation gets RMS ``target``; the pre-tanh output
    gets ``out_rms``. Projection head and discriminators are untouched.
    """
    slope = params.config.slope
    kw = dict(iters=iters, tol=tol)
    with no_grad():
        enc = params.encoder
        y = Tensor(np.asarray(stacks, dtype=enc["map.w"].data.dtype))
        n_blocks = sum(1 for k in enc if k.endswith(".conv1.w"))
        for i in range(n_blocks):
            b = f"block{i}"
            _fit(enc[f"{b}.conv1.w"], lambda: _rms(F.conv2d(y, enc[f"{b}.conv1.w"], enc[f"{b}.conv1.b"], padding=1)), target, **kw)
            a = F.relu(F.conv2d(y, enc[f"{b}.conv1.w"], enc[f"{b}.conv1.b"], padding=1))
            _fit(enc[f"{b}.conv2.w"], lambda: _rms(F.conv2d(a, enc[f"{b}.conv2.w"], enc[f"{b}.conv2.b"], padding=1)), target, **kw)
            a = F.relu(F.conv2d(a, enc[f"{b}.conv2.w"], enc[f"{b}.conv2.b"], padding=1))
            y = F.maxpool2d(cab_forward(a, enc[f"{b}.cab.squeeze"], enc[f"{b}.cab.excite"]), 2)
        _fit(enc["map.w"], lambda: _rms(F.conv2d(y, enc["map.w"], enc["map.b"])), target, **kw)
        f = F.conv2d(y, enc["map.w"], enc["map.b"])

        if use_gem:
            n, d, hh, ww = f.shape
            v = F.transpose(F.reshape(f, (n, d, hh * ww)), (0, 2, 1))
            gem = params.gem
            for i in range(sum(1 for k in gem if k.endswith(".w"))):
                w, att = gem[f"gat{i}.w"], gem[f"gat{i}.a"]

                def pre(v=v, w=w, att=att):
                    return gat_pre_activation(v, w, att, slope, params.config.gem_aggregate)

                _fit(w, lambda: _rms(pre()), target, **kw)
                v = F.mish(pre())
            f = F.reshape(F.transpose(v, (0, 2, 1)), (n, v.shape[-1], hh, ww))

        dec = params.decoder
        _fit(dec["map.w"], lambda: _rms(F.conv2d(f, dec["map.w"], dec["map.b"])), target, **kw)
        y = F.conv2d(f, dec["map.w"], dec["map.b"])
        for i in range(sum(1 for k in dec if k.endswith(".up.w"))):
            b = f"block{i}"
            _fit(dec[f"{b}.up.w"], lambda: _rms(F.conv_transpose2d(y, dec[f"{b}.up.w"], dec[f"{b}.up.b"], stride=2)), target, **kw)
            y = F.relu(F.conv_transpose2d(y, dec[f"{b}.up.w"], dec[f"{b}.up.b"], stride=2))
            for c in ("conv1", "conv2"):
                _fit(dec[f"{b}.{c}.w"], lambda: _rms(F.conv2d(y, dec[f"{b}.{c}.w"], dec[f"{b}.{c}.b"], padding=1)), target, **kw)
                y = F.relu(F.conv2d(y, dec[f"{b}.{c}.w"], dec[f"{b}.{c}.b"], padding=1))
        _fit(dec["out.w"], lambda: _rms(F.conv2d(y, dec["out.w"], dec["out.b"])), out_rms, **kw)
    return params
