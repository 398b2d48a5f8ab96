"""Time the hot kernels under the numba and numpy backends.

    python benchmarks/bench_kernels.py [--repeat N]

Each backend runs in its own interpreter because the backend is fixed at
import time by SHENET_DISABLE_NUMBA.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit


def _cases():
    import numpy as np

    from shenet import _kernels as K

    rng = np.random.default_rng(0)
    xp = rng.standard_normal((4, 16, 66, 66)).astype(np.float32)
    cols = K.im2col(xp, 3, 1, 64, 64)
    pool_in = rng.standard_normal((4, 32, 64, 64)).astype(np.float32)
    _, idx = K.maxpool_forward(pool_in, 2)
    g = rng.standard_normal((4, 32, 32, 32)).astype(np.float32)
    fixed = rng.standard_normal((16, 64))
    moving = np.roll(fixed, 2, axis=1)
    bscan = rng.integers(0, 256, (1024, 512)).astype(np.uint8)
    shifts = rng.integers(-100, 100, 512)
    return {
        "im2col 4x16x66x66 k3": lambda: K.im2col(xp, 3, 1, 64, 64),
        "col2im 4x16x66x66 k3": lambda: K.col2im(cols, 66, 66, 1),
        "maxpool_forward 4x32x64x64": lambda: K.maxpool_forward(pool_in, 2),
        "maxpool_backward 4x32x64x64": lambda: K.maxpool_backward(g, idx, 2),
        "ncc_scores 16x64 m=3": lambda: K.ncc_scores(moving, fixed, 3),
        "shift_columns 1024x512": lambda: K.shift_columns(bscan, shifts),
    }


def child(repeat):
    from shenet import _kernels

    out = {}
    for name, fn in _cases().items():
        fn()  # warm-up (includes numba compilation)
        number = 5
        out[name] = min(timeit.repeat(fn, number=number, repeat=repeat)) / number
    print(json.dumps({"backend": _kernels.BACKEND, "times": out}))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    a = ap.parse_args()
    if a.child:
        child(a.repeat)
        return
    results = {}
    for flag in ("0", "1"):
        env = dict(os.environ, SHENET_DISABLE_NUMBA=flag)
        p = subprocess.run([sys.executable, __file__, "--child", "--repeat", str(a.repeat)], env=env, capture_output=True, text=True, check=True)
        r = json.loads(p.stdout.strip().splitlines()[-1])
        results[r["backend"]] = r["times"]
    names = list(next(iter(results.values())))
    nb, np_ = results.get("numba"), results["numpy"]
    print(f"{'kernel':32s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for n in names:
        t_np = np_[n] * 1e3
        if nb is None:
            print(f"{n:32s} {'n/a':>10s} {t_np:10.3f}")
        else:
            t_nb = nb[n] * 1e3
            print(f"{n:32s} {t_nb:10.3f} {t_np:10.3f} {t_np / t_nb:8.2f}x")


if __name__ == "__main__":
    main()
