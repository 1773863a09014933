"""Benchmark of the compiled kernels against the numpy fallback.

Run with ``python -m wpedl.kernels.bench``. Times the convolution and
pooling primitives at CNN-training-shaped workloads and reports per-call
wall time for whichever backends are available.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import _conv_np

try:
    from . import _conv_cy
except ImportError:
    _conv_cy = None


def _time_call(fn, *args, repeat: int) -> float:
    fn(*args)  # warm up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def run(repeat: int = 5, batch: int = 32) -> list[dict]:
    rng = np.random.default_rng(0)
    cases = [
        ("conv 3->8 k3 32x32", (batch, 3, 32, 32), (8, 3, 3, 3)),
        ("conv 8->16 k3 15x15", (batch, 8, 15, 15), (16, 8, 3, 3)),
    ]
    backends = [("numpy", _conv_np)]
    if _conv_cy is not None:
        backends.append(("cython", _conv_cy))

    rows = []
    for name, x_shape, w_shape in cases:
        x = rng.standard_normal(x_shape)
        w = rng.standard_normal(w_shape)
        b = rng.standard_normal(w_shape[0])
        go = _conv_np.conv2d_forward(x, w, b)
        for backend_name, impl in backends:
            rows.append(
                {
                    "case": name + " forward",
                    "backend": backend_name,
                    "seconds": _time_call(impl.conv2d_forward, x, w, b, repeat=repeat),
                }
            )
            rows.append(
                {
                    "case": name + " backward",
                    "backend": backend_name,
                    "seconds": _time_call(impl.conv2d_backward, x, w, go, repeat=repeat),
                }
            )

    x = rng.standard_normal((batch, 8, 30, 30))
    for backend_name, impl in backends:
        rows.append(
            {
                "case": "maxpool k2 30x30",
                "backend": backend_name,
                "seconds": _time_call(impl.maxpool2d_forward, x, 2, repeat=repeat),
            }
        )
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--batch", type=int, default=32)
    args = parser.parse_args(argv)

    rows = run(repeat=args.repeat, batch=args.batch)
    if _conv_cy is None:
        print("compiled extension not available; timing numpy fallback only")

    by_case: dict[str, dict[str, float]] = {}
    for row in rows:
        by_case.setdefault(row["case"], {})[row["backend"]] = row["seconds"]

    width = max(len(c) for c in by_case)
    print(f"{'case':<{width}}  {'numpy':>10}  {'cython':>10}  {'ratio':>7}")
    for case, times in by_case.items():
        np_t = times.get("numpy")
        cy_t = times.get("cython")
        ratio = f"{np_t / cy_t:7.2f}" if cy_t else "      -"
        cy_s = f"{cy_t * 1e3:8.3f}ms" if cy_t else "         -"
        print(f"{case:<{width}}  {np_t * 1e3:8.3f}ms  {cy_s}  {ratio}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
