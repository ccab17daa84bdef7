"""Table-style AWGN benchmark of the fixed-point iteration over an image directory.

For each noise level and update rule, runs ``btb bench`` and prints the
averages row, so the iteration count and gain can be compared across
settings. Per-image CSVs go to --out-dir.

    python scripts/awgn_benchmark.py --dir data/corpus --sigmas 10 15 25
"""
import argparse
import csv
from pathlib import Path

from btb.cli import main as btb_main


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dir", default=str(Path(__file__).resolve().parents[1] / "data" / "corpus"))
    ap.add_argument("--sigmas", type=float, nargs="+", default=[10, 15, 25])
    ap.add_argument("--modes", nargs="+", default=["successive", "simple", "anchored"])
    ap.add_argument("--engine", default="nlm:patch=1,search=5,h=10")
    ap.add_argument("--delta", default="rms:1", help="stopping rule passed to btb bench")
    ap.add_argument("--max-iters", type=int, default=50)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", default="bench_out")
    args = ap.parse_args(argv)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    print(f"{'sigma':>5} {'mode':<11} {'psnr_in':>8} {'psnr_out':>8} {'ssim_out':>8} {'T':>5}")
    for sigma in args.sigmas:
        for mode in args.modes:
            out = out_dir / f"awgn{sigma:g}_{mode}.csv"
            argv = [
                "bench", "--dir", args.dir, "--noise", f"awgn:{sigma:g}", "--method", f"btb:{mode}",
                "--engine", args.engine, "--delta", args.delta, "--max-iters", str(args.max_iters),
                "--seed", str(args.seed), "--out", str(out),
            ]
            if args.workers:
                argv += ["--workers", str(args.workers)]
            if btb_main(argv) != 0:
                raise SystemExit(1)
            avg = list(csv.DictReader(open(out)))[-1]
            print(
                f"{sigma:5g} {mode:<11} {float(avg['psnr_in']):8.2f} {float(avg['psnr_out']):8.2f} "
                f"{float(avg['ssim_out']):8.4f} {float(avg['iters']):5.1f}"
            )


if __name__ == "__main__":
    main()
