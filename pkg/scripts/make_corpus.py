"""Regenerate data/corpus/ from the sample images shipped with scikit-image.

Each picture is converted to grey (BT.601 luma), reduced by 2x2 block
averaging where it is at least 512 px on the short side, centre-cropped to 256 x 256 and
written as 8-bit PGM. Needs scikit-image, which the library itself does not.
"""
import argparse
from pathlib import Path

import numpy as np
import skimage.data

from btb.image import Image, color_transform, save_image

NAMES = ["camera", "astronaut", "coffee", "chelsea", "coins", "moon", "clock", "rocket"]


def grey(a):
    if a.ndim == 3:
        y, _, _ = color_transform([a[..., c].astype(float) for c in range(3)])
        return y
    return a.astype(float)


def shrink(a, size=256):
    if min(a.shape) >= 512:
        h, w = a.shape[0] // 2 * 2, a.shape[1] // 2 * 2
        a = a[:h, :w].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))
    top, left = (a.shape[0] - size) // 2, (a.shape[1] - size) // 2
    return a[top : top + size, left : left + size]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=Path(__file__).resolve().parents[1] / "data" / "corpus", type=Path)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name in NAMES:
        a = shrink(grey(getattr(skimage.data, name)()))
        save_image(Image(np.clip(a, 0, 255)), args.out / f"{name}.pgm")
        print(name, a.shape)


if __name__ == "__main__":
    main()
