"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times each raw kernel, a conv forward/backward on a 32x32 batch, one
de-block training step and a whole-image de-block pass, per backend.
"""

import argparse
import time

import numpy as np

from patchcs import kernels, models, nn


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    xp = rng.normal(size=(16, 32, 38, 38))
    col = np.empty(0)

    def im2col():
        nonlocal col
        col = kernels.im2col(xp, 7, 0, 32)

    def col2im():
        dxp = np.zeros_like(xp)
        kernels.col2im_add(col, dxp, 7, 0, 32)

    z = rng.normal(size=(1, 7, 7, 16, 38, 38))
    g = rng.normal(size=(1, 16, 32, 32))

    def shift_sum():
        kernels.shift_sum(z, np.zeros((1, 16, 32, 32)))

    def shift_spread():
        kernels.shift_spread(g, np.empty_like(z))

    d = models.build_descriptor("deblock-resconv", 32)
    net = models.init_weights(d, models.InitSpec({s: 0.03 for s in d.stage_names()}, 1))
    x = rng.uniform(size=(128, 32, 32))
    t = rng.uniform(size=(128, 32, 32))
    layer = nn.ConvLayer(net.params["conv0.weight"], net.params["conv0.bias"], True)
    xb = x[:16, None]

    def conv_fb():
        out, cache = nn.conv2d_forward(xb, layer)
        nn.conv2d_backward(np.ones_like(out), cache)

    def train_step():
        for i in range(0, 128, 16):
            net.loss_and_grads(x[i : i + 16], t[i : i + 16])

    image = rng.uniform(size=(256, 256))

    def deblock_image():
        models.forward(net, image)

    col = kernels.im2col(xp, 7, 0, 32)
    return {
        "im2col 7x7 (16x32x32x32)": im2col,
        "col2im_add 7x7": col2im,
        "shift_sum 7x7": shift_sum,
        "shift_spread 7x7": shift_spread,
        "conv 11x11 fwd+bwd, batch 16": conv_fb,
        "de-block step, batch 128": train_step,
        "de-block 256x256 image": deblock_image,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = kernels.available_backends()
    results = {}
    for name in backends:
        kernels.use_backend(name)
        for case, fn in cases().items():
            results[case, name] = best_of(fn, args.repeat)
    width = max(len(c) for c, _ in results)
    print(f"{'case'.ljust(width)}  " + "  ".join(f"{b:>10}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for case in dict.fromkeys(c for c, _ in results):
        row = [results[case, b] for b in backends]
        line = f"{case.ljust(width)}  " + "  ".join(f"{v * 1e3:8.2f}ms" for v in row)
        if len(backends) > 1:
            line += f"  {results[case, 'python'] / results[case, 'cython']:9.2f}x"
        print(line)
    if len(backends) == 1:
        print("compiled kernels not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
