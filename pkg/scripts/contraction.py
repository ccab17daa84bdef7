"""Empirical contraction factor of each engine on AWGN, and along BTB traces.

Two numbers per engine: the one-shot noise ratio ||f(x + w) - x|| / ||w||
averaged over seeds, and the per-iteration ratios ||x_{t+1} - x|| / ||x_t - x||
of a simple-mode run, where x is the clean image.

    python scripts/contraction.py --image data/corpus/camera.pgm --seeds 20
"""
import argparse
from pathlib import Path

import numpy as np

from btb.engines import parse_engine
from btb.image import load_image
from btb.iteration import IterationConfig, btb_run
from btb.metrics import contraction_report
from btb.noise import add_awgn

ENGINES = ["gaussian:std=1", "median:r=1", "nlm:patch=1,search=5,h=10"]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--image", default=str(Path(__file__).resolve().parents[1] / "data" / "corpus" / "camera.pgm"))
    ap.add_argument("--engines", nargs="+", default=ENGINES)
    ap.add_argument("--sigma", type=float, default=25.0)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--iters", type=int, default=10)
    ap.add_argument("--mu", type=float, default=0.8)
    args = ap.parse_args(argv)

    clean = load_image(args.image)
    for spec in args.engines:
        f = parse_engine(spec)
        q = [
            np.linalg.norm(f(n.data) - clean.data) / np.linalg.norm(n.data - clean.data)
            for n in (add_awgn(clean, args.sigma, s) for s in range(args.seeds))
        ]
        trace = btb_run(add_awgn(clean, args.sigma, 0), f, IterationConfig(mu=args.mu, max_iters=args.iters, delta=0.0))
        rep = contraction_report(trace, clean)
        ratios = " ".join(f"{r:.3f}" for r in rep.ratios)
        print(f"{f.spec():<28} one-shot q = {np.mean(q):.3f} +- {np.std(q):.3f}")
        print(f"{'':<28} trace ratios: {ratios}  (monotone={rep.monotone})")


if __name__ == "__main__":
    main()
