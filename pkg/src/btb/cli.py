"""Command-line front end: ``btb {synth,btb,despeckle,rfn,eval,bench} ...``.

Exit status is 0 on success, 1 when processing fails and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .engines import parse_engine
from .errors import BtbError, ConfigError
from .image import Image, color_transform, load_image, load_planes, save_image, save_planes
from .iteration import IterationConfig, btb_run
from .metrics import psnr, ssim
from .noise import NoiseSpec, SceneConfig, load_scene, synth_tomogram
from .rfn import RfnConfig, parse_window, rfn_normalize
from .vortice import VorticeConfig, speckle_focused_run, speckle_level, vortice_run

BENCH_COLUMNS = ["image", "method", "psnr_in", "ssim_in", "psnr_out", "ssim_out", "iters", "ms"]
IMAGE_SUFFIXES = {".pgm", ".png", ".btbf", ".raw"}


# ---------------------------------------------------------------------------
# argument helpers


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _mu(text: str):
    parts = [float(p) for p in text.split(",") if p.strip()]
    if not parts:
        raise argparse.ArgumentTypeError("empty step-size list")
    return parts[0] if len(parts) == 1 else tuple(parts)


def resolve_delta(text: str, shape, peak: float) -> float | None:
    """``auto`` -> None (library default), ``rms:X`` -> X * sqrt(n) * peak / 255, else a number."""
    t = str(text).strip().lower()
    if t == "auto":
        return None
    if t.startswith("rms:"):
        return float(t[4:]) * math.sqrt(int(np.prod(shape))) * peak / 255.0
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"bad --delta {text!r}: use auto, rms:<grey levels> or a number") from None


def _add_btb_options(p, beta_default=0.0):
    p.add_argument("--engine", default="nlm:patch=1,search=5,h=10", help="denoiser, e.g. gaussian:std=1.5, median:r=1")
    p.add_argument("--mode", default="simple", choices=["successive", "simple", "anchored", "langevin"])
    p.add_argument("--mu", type=_mu, default=0.8, help="step size or comma-separated schedule")
    p.add_argument("--beta", type=float, default=beta_default, help="Langevin noise scale (bench: also the focused pull-back)")
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--delta", default="auto", help="auto, rms:<grey levels per pixel>, or absolute norm")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)


def _add_despeckle_options(p):
    p.add_argument("--alpha", type=float, default=0.4)
    p.add_argument("--beta", type=float, default=0.4)
    p.add_argument("--window", default="gaussian:15")
    p.add_argument("--tau", type=float, default=0.25)
    p.add_argument("--signed", type=_bool, default=False)
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--delta", default="auto")


def _iteration_config(args, shape, peak) -> IterationConfig:
    return IterationConfig(
        mode=args.mode,
        mu=args.mu,
        beta=args.beta,
        delta=resolve_delta(args.delta, shape, peak),
        max_iters=args.max_iters,
        epsilon=args.epsilon,
        seed=args.seed,
        keep_iterates=False,
    )


def _vortice_config(args, shape) -> VorticeConfig:
    rfn = RfnConfig(parse_window(args.window, 2), tau=args.tau, signed_variant=args.signed)
    return VorticeConfig(
        rfn=rfn,
        alpha=args.alpha,
        beta=args.beta,
        delta=resolve_delta(args.delta, shape, 1.0),
        max_iters=args.iters,
        keep_iterates=True,
    )


def _write_csv(path, header, rows):
    if path in (None, "-"):
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.6f}"
    return v


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    if args.kind == "tomogram":
        scene = load_scene(args.scene) if args.scene else SceneConfig()
        speckled, clean = synth_tomogram(scene, args.seed)
        save_image(speckled, args.paths[0])
        if len(args.paths) > 1:
            save_image(clean, args.paths[1])
        return 0
    if len(args.paths) != 2:
        raise ConfigError(f"synth {args.kind} needs INPUT and OUTPUT paths")
    spec = NoiseSpec(args.kind, args.sigma, args.seed)
    save_image(spec.apply(load_image(args.paths[0])), args.paths[1])
    return 0


def _denoise_planes(planes, engine, cfg_for, all_channels):
    """Run the iteration on one grey plane, or on Y (or all of YCbCr) of a colour image."""
    if len(planes) == 1:
        trace = btb_run(planes[0], engine, cfg_for(planes[0]))
        return [planes[0].with_data(trace.final)], trace
    ycc = color_transform(planes, "rgb->ycbcr")
    first_trace = None
    out = list(ycc)
    for i in range(3 if all_channels else 1):
        trace = btb_run(ycc[i], engine, cfg_for(ycc[i]))
        out[i] = ycc[i].with_data(trace.final)
        first_trace = first_trace or trace
    return color_transform(out, "ycbcr->rgb"), first_trace


def cmd_btb(args):
    planes = load_planes(args.input)
    engine = parse_engine(args.engine)
    ref = load_planes(args.ref) if args.ref else None
    cfg_for = lambda img: _iteration_config(args, img.shape, img.peak)  # noqa: E731
    if args.trace:
        cfg_for = lambda img: IterationConfig(**{**asdict(_iteration_config(args, img.shape, img.peak)), "keep_iterates": True})  # noqa: E731
    out, trace = _denoise_planes(planes, engine, cfg_for, args.all_channels)
    save_planes(out, args.output)
    if args.trace:
        ref_plane = None
        if ref is not None:
            ref_plane = ref[0] if len(ref) == 1 else color_transform(ref, "rgb->ycbcr")[0]
        rows = []
        for t, step in enumerate(trace.step_norms, 1):
            p = psnr(ref_plane, trace.iterates[t], peak=ref_plane.peak) if ref_plane is not None else ""
            rows.append([t, _fmt(step), _fmt(p)])
        _write_csv(args.trace, ["iter", "step_norm", "psnr"], rows)
    print(f"iterations={trace.iters_run} stopped_by={trace.stopped_by}", file=sys.stderr)
    return 0


def _to_unit(img: Image) -> Image:
    return img if img.peak == 1.0 else Image(img.data / img.peak, 1.0)


def cmd_despeckle(args):
    img = load_image(args.input)
    y = _to_unit(img)
    cfg = _vortice_config(args, y.shape)
    run = vortice_run if args.algo == "vortice" else speckle_focused_run
    trace = run(y, cfg)
    save_image(Image(trace.final * img.peak, img.peak), args.output)
    if args.trace:
        ref = _to_unit(load_image(args.ref)) if args.ref else None
        rows = []
        for t, step in enumerate(trace.step_norms, 1):
            x = trace.iterates[t]
            p = psnr(ref, x, peak=1.0) if ref is not None else ""
            rows.append([t, _fmt(step), _fmt(speckle_level(x, cfg.rfn)), _fmt(p)])
        _write_csv(args.trace, ["iter", "step_norm", "speckle_level", "psnr"], rows)
    return 0


def cmd_rfn(args):
    img = _to_unit(load_image(args.input))
    cfg = RfnConfig(parse_window(args.window, 2), tau=args.tau, signed_variant=args.signed)
    vn = rfn_normalize(img, cfg)
    base = np.sign(img.data) if args.signed else 1.0
    save_image(Image(np.abs(vn.data - base), 1.0), args.output)
    return 0


def cmd_eval(args):
    ref, test = load_image(args.ref), load_image(args.test)
    metrics = [m.strip().lower() for m in args.metrics.split(",") if m.strip()]
    values = []
    for m in metrics:
        if m == "psnr":
            values.append(psnr(ref, test, peak=ref.peak, quantize_first=args.quantize_metrics))
        elif m == "ssim":
            values.append(ssim(ref, test, peak=ref.peak, quantize_first=args.quantize_metrics))
        else:
            raise ConfigError(f"unknown metric {m!r}")
    if args.csv:
        _write_csv(None, metrics, [[_fmt(v) for v in values]])
    else:
        print(" ".join(f"{m}={_fmt(v)}" for m, v in zip(metrics, values)))
    return 0


# ---------------------------------------------------------------------------
# bench


@dataclass
class BenchmarkRow:
    image: str
    method: str
    psnr_in: float
    ssim_in: float
    psnr_out: float
    ssim_out: float
    iters: float
    ms: float

    def __post_init__(self):
        if self.iters < 1:
            raise ValueError("iterations must be >= 1")

    def as_list(self):
        return [_fmt(getattr(self, c)) for c in BENCH_COLUMNS]


def image_seed(base: int, image_id: str) -> list[int]:
    """Per-image noise seed, independent of directory order and worker count."""
    return [int(base), zlib.crc32(image_id.encode("utf-8"))]


def _method_label(args) -> str:
    kind, _, mode = args.method.partition(":")
    if kind == "btb":
        return f"btb-{mode or args.mode}[{parse_engine(args.engine).spec()}]"
    if kind == "denoise":
        return f"denoise[{parse_engine(args.engine).spec()}]"
    if kind in ("vortice", "focused"):
        return f"{kind}[{args.window},tau={args.tau:g},alpha={args.alpha:g}" + (
            f",beta={args.beta:g}]" if kind == "focused" else "]"
        )
    return kind


def _bench_one(path: str, args) -> BenchmarkRow:
    image_id = Path(path).stem
    clean = load_image(path)
    noise = NoiseSpec.parse(args.noise, seed=0)
    noise = NoiseSpec(noise.kind, noise.sigma, image_seed(args.seed, image_id))
    noisy = noise.apply(clean)
    kind, _, mode = args.method.partition(":")
    t0 = time.perf_counter()
    if kind == "btb":
        if mode:
            args = argparse.Namespace(**{**vars(args), "mode": mode})
        trace = btb_run(noisy, parse_engine(args.engine), _iteration_config(args, noisy.shape, noisy.peak))
        out, iters = trace.final, trace.iters_run
    elif kind == "denoise":
        out, iters = parse_engine(args.engine)(noisy.data), 1
    elif kind in ("vortice", "focused"):
        unit = _to_unit(noisy)
        cfg = _vortice_config(args, unit.shape)
        cfg = VorticeConfig(cfg.rfn, cfg.alpha, cfg.beta, cfg.delta, cfg.max_iters, keep_iterates=False)
        trace = (vortice_run if kind == "vortice" else speckle_focused_run)(unit, cfg)
        out, iters = trace.final * noisy.peak, trace.iters_run
    elif kind == "none":
        out, iters = noisy.data, 1
    else:
        raise ConfigError(f"unknown bench method {args.method!r}")
    ms = (time.perf_counter() - t0) * 1000.0
    return BenchmarkRow(
        image_id,
        _method_label(args),
        psnr(clean, noisy),
        ssim(clean, noisy),
        psnr(clean, out, peak=clean.peak),
        ssim(clean, out, peak=clean.peak),
        iters,
        ms,
    )


def _average_row(rows: list[BenchmarkRow]) -> BenchmarkRow:
    mean = {c: float(np.mean([getattr(r, c) for r in rows])) for c in BENCH_COLUMNS[2:]}
    return BenchmarkRow("average", rows[0].method, **mean)


def worker_count(requested: int | None) -> int:
    cap = os.environ.get("BTB_THREADS")
    n = requested if requested else (int(cap) if cap else 1)
    if cap:
        n = min(n, int(cap))
    return max(1, n)


def run_bench(args) -> list[BenchmarkRow]:
    if args.beta is None:
        # unset --beta means no Langevin noise for btb and 0.4 for the focused loop
        args.beta = 0.4 if args.method.startswith("focused") else 0.0
    directory = Path(args.dir)
    if not directory.is_dir():
        raise FileNotFoundError(f"benchmark directory not found: {directory}")
    paths = sorted(str(p) for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise ConfigError(f"no images in {directory}")
    workers = worker_count(args.workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_one, paths, [args] * len(paths)))
    else:
        rows = [_bench_one(p, args) for p in paths]
    rows.sort(key=lambda r: r.image)
    return rows


def cmd_bench(args):
    rows = run_bench(args)
    table = [r.as_list() for r in rows] + [_average_row(rows).as_list()]
    _write_csv(args.out, BENCH_COLUMNS, table)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="btb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="add noise to an image or simulate an OCT tomogram")
    p.add_argument("kind", choices=["awgn", "poisson", "speckle", "tomogram"])
    p.add_argument("paths", nargs="+", metavar="PATH", help="INPUT OUTPUT, or SPECKLED [CLEAN] for tomogram")
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scene", help="scene file (key = value) for tomogram")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("btb", help="fixed-point iterative denoising")
    p.add_argument("input")
    p.add_argument("output")
    _add_btb_options(p)
    p.add_argument("--trace", help="write per-iteration CSV here")
    p.add_argument("--ref", help="clean reference for PSNR in the trace")
    p.add_argument("--all-channels", action="store_true", help="colour input: iterate on Cb and Cr too")
    p.set_defaults(func=cmd_btb)

    p = sub.add_parser("despeckle", help="RFN-based speckle suppression")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--algo", choices=["vortice", "focused"], default="vortice")
    _add_despeckle_options(p)
    p.add_argument("--trace")
    p.add_argument("--ref")
    p.set_defaults(func=cmd_despeckle)

    p = sub.add_parser("rfn", help="write |normalised - 1| to visualise speckle zero crossings")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--window", default="gaussian:15")
    p.add_argument("--tau", type=float, default=0.25)
    p.add_argument("--signed", type=_bool, default=False)
    p.set_defaults(func=cmd_rfn)

    p = sub.add_parser("eval", help="compare a test image against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--metrics", default="psnr,ssim")
    p.add_argument("--csv", action="store_true")
    p.add_argument("--quantize-metrics", action="store_true", help="measure on 8-bit quantised images")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="noise + method over a directory, CSV out")
    p.add_argument("--dir", required=True)
    p.add_argument("--noise", default="awgn:25", help="awgn:<sigma>, poisson, speckle or none")
    p.add_argument("--method", default="btb", help="btb[:mode], denoise, vortice, focused or none")
    _add_btb_options(p, beta_default=None)
    p.add_argument("--alpha", type=float, default=0.4)
    p.add_argument("--window", default="gaussian:15")
    p.add_argument("--tau", type=float, default=0.25)
    p.add_argument("--signed", type=_bool, default=False)
    p.add_argument("--iters", type=int, default=5, help="iterations for vortice/focused")
    p.add_argument("--workers", type=int, default=None, help="parallel workers (capped by BTB_THREADS)")
    p.add_argument("--out", default="-", help="CSV path, - for stdout")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (BtbError, OSError, ValueError) as exc:
        print(f"btb {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
