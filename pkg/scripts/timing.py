"""Wall-clock timings for the RFN loop and the denoiser engines.

    python scripts/timing.py --size 1024 --repeat 3
"""
import argparse
import time

import numpy as np

from btb.engines import parse_engine
from btb.vortice import VorticeConfig, speckle_focused_run, vortice_run


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=1024)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    y = np.random.default_rng(0).random((args.size, args.size))
    one = VorticeConfig(max_iters=1, delta=0.0, keep_iterates=False)
    five = VorticeConfig(max_iters=5, delta=0.0, keep_iterates=False)
    rows = [
        ("vortice, 1 iteration", lambda: vortice_run(y, one)),
        ("vortice, 5 iterations", lambda: vortice_run(y, five)),
        ("focused, 5 iterations", lambda: speckle_focused_run(y, five)),
    ]
    z = y * 255
    for spec in ("gaussian:std=1.5", "median:r=1", "nlm:patch=1,search=5,h=10"):
        f = parse_engine(spec)
        rows.append((f"{spec}, 1 call", lambda f=f: f(z)))
    print(f"image {args.size}x{args.size}, best of {args.repeat}")
    for name, fn in rows:
        print(f"  {name:<36} {best_of(fn, args.repeat) * 1000:8.1f} ms")


if __name__ == "__main__":
    main()
