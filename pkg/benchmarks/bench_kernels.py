"""Time one SGD epoch with the compiled kernel and with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Both kernels get the same data, permutation and starting parameters; the
script also reports how far apart the resulting parameters end up.
"""

import argparse
import time

import numpy as np

from obfuskit import _pykernels
from obfuskit.models import ModelSpec, init_model

try:
    from obfuskit import _kernels
except ImportError:
    _kernels = None

# (label, spec, samples, batch size)
CASES = [
    ("softmax 64->5, batch 20", ModelSpec.softmax(64, 5, reg_weight=0.001), 500, 20),
    ("mlp 64-32-5 relu, batch 20", ModelSpec.mlp(64, 5, 32), 500, 20),
    ("mlp 16-32-2 relu, batch 20", ModelSpec.mlp(16, 2, 32), 200, 20),
    ("mlp 64-32-5 sigmoid, batch 1", ModelSpec.mlp(64, 5, 32, activation="sigmoid"), 500, 1),
    ("mlp 784-128-10 relu, batch 32", ModelSpec.mlp(784, 10, 128), 1000, 32),
]


def _epoch_args(spec, n, batch, seed=0):
    rng = np.random.default_rng(seed)
    Z = rng.uniform(0, 1, (n, spec.input_dim))
    y = rng.integers(0, spec.num_classes, n).astype(np.int64)
    order = rng.permutation(n).astype(np.int64)
    act = 0 if spec.activation == "relu" else 1
    return (Z, y, order, spec.input_dim, spec.hidden_width, spec.num_classes, act, 0.1,
            spec.reg_weight, batch, np.zeros(0), 0.0)


def _time(kernel, theta0, args, repeat):
    best = np.inf
    for _ in range(repeat):
        theta = theta0.copy()
        start = time.perf_counter()
        kernel.sgd_epoch(theta, *args)
        best = min(best, time.perf_counter() - start)
    return best, theta


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5, help="timed runs per kernel; the best is kept")
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation` first")
        return 1
    print(f"{'case':32} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8} {'max |diff|':>11}")
    for label, spec, n, batch in CASES:
        theta0 = init_model(spec, 0).theta
        epoch = _epoch_args(spec, n, batch)
        t_py, th_py = _time(_pykernels, theta0, epoch, args.repeat)
        t_c, th_c = _time(_kernels, theta0, epoch, args.repeat)
        print(f"{label:32} {1e3 * t_py:10.2f} {1e3 * t_c:10.2f} {t_py / t_c:7.1f}x "
              f"{np.abs(th_py - th_c).max():11.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
