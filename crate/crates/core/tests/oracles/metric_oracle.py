# Vectorized numpy reference for the four image metrics.
#
#   python3 metric_oracle.py generate <dir>   writes the synthetic corpus
#   python3 metric_oracle.py score <dir>      prints golden CSV to stdout
#
# The corpus is 20 small PNGs covering color casts, gradients, noise, flat
# regions, black pixels and sizes that do not divide evenly into the 10x10
# block grid.
import csv
import sys
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import minimum_filter

K1 = K2 = 10
ALPHA = 0.1
UIQM_W = (0.0282, 0.2953, 3.5753)
UICM_C = (-0.0268, 0.1586)
UCIQE_W = (0.4680, 0.2745, 0.2576)
PCT = 0.01
CCF_W = (0.17593, 0.61759, -0.33988)
CCF_M = 0.3
RADIUS = 7
LUMA = (0.299, 0.587, 0.114)
M = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)


def corpus():
    rng = np.random.default_rng(20240611)
    sizes = [(32, 24), (40, 30), (57, 43), (20, 20), (64, 48)]
    images = []
    for i in range(20):
        w, h = sizes[(i + i // 5) % len(sizes)]
        yy, xx = np.mgrid[0:h, 0:w]
        kind = i % 5
        if kind == 0:  # blue-green cast with noise
            base = np.stack([20 + 0 * xx, 90 + xx, 120 + yy], axis=-1)
            img = base + rng.normal(0, 12, (h, w, 3))
        elif kind == 1:  # smooth gradient
            img = np.stack([xx * 255 / w, yy * 255 / h, (xx + yy) * 128 / (w + h)], axis=-1)
        elif kind == 2:  # uniform noise
            img = rng.uniform(0, 256, (h, w, 3))
        elif kind == 3:  # flat patches with black corner
            img = np.zeros((h, w, 3))
            img[:, :, 0] = 40 + 60 * ((xx // 7 + yy // 5) % 2)
            img[:, :, 1] = 110
            img[:, :, 2] = 150 + 30 * (xx // 9 % 2)
            img[: h // 4, : w // 4] = 0
        else:  # hazy low-contrast scene
            img = 150 + 20 * np.sin(xx / 3.0)[..., None] + rng.normal(0, 4, (h, w, 3))
            img[..., 0] -= 60
        images.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))
    return images


def gray(img):
    f = img.astype(float)
    return LUMA[0] * f[..., 0] + LUMA[1] * f[..., 1] + LUMA[2] * f[..., 2]


def blocks(plane):
    h, w = plane.shape
    bw, bh = w // K1, h // K2
    for j in range(K2):
        for i in range(K1):
            yield plane[j * bh : (j + 1) * bh, i * bw : (i + 1) * bw]


def uicm(img):
    f = img.astype(float)
    rg = (f[..., 0] - f[..., 1]).ravel()
    yb = ((f[..., 0] + f[..., 1]) / 2 - f[..., 2]).ravel()

    def trimmed(x):
        s = np.sort(x)
        t = int(np.floor(ALPHA * len(s)))
        return s[t : len(s) - t].mean()

    mu_rg, mu_yb = trimmed(rg), trimmed(yb)
    var_rg = np.mean((rg - mu_rg) ** 2)
    var_yb = np.mean((yb - mu_yb) ** 2)
    return UICM_C[0] * np.hypot(mu_rg, mu_yb) + UICM_C[1] * np.sqrt(var_rg + var_yb)


def eme(plane):
    total = 0.0
    for b in blocks(plane):
        lo, hi = b.min(), b.max()
        if lo > 0:
            total += np.log(hi / lo)
    return 2.0 / (K1 * K2) * total


def uism(img):
    total = 0.0
    for c in range(3):
        ch = img[..., c].astype(float)
        p = np.pad(ch, 1, mode="edge")
        gx = (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])
        gy = (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])
        total += LUMA[c] * eme(np.sqrt(gx**2 + gy**2) * ch)
    return total


def uiconm(img):
    total = 0.0
    for b in blocks(gray(img)):
        lo, hi = b.min(), b.max()
        if hi - lo > 0 and hi + lo > 0:
            m = (hi - lo) / (hi + lo)
            total += m * np.log(m)
    return -total / (K1 * K2)


def uiqm(img):
    return UIQM_W[0] * uicm(img) + UIQM_W[1] * uism(img) + UIQM_W[2] * uiconm(img)


def lab(img):
    c = img.astype(float) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ M.T / M.sum(axis=1)
    d = 6.0 / 29.0
    f = np.where(xyz > d**3, np.cbrt(xyz), xyz / (3 * d * d) + 4.0 / 29.0)
    L = np.clip(116 * f[..., 1] - 16, 0, 100)
    return L, 500 * (f[..., 0] - f[..., 1]), 200 * (f[..., 1] - f[..., 2])


def uciqe(img):
    L, a, b = lab(img)
    L, a, b = L.ravel() / 100, a.ravel() / 100, b.ravel() / 100
    chroma = np.hypot(a, b)
    lit = L >= 1e-6
    sat = np.mean(chroma[lit] / L[lit])
    con = np.quantile(L, 1 - PCT) - np.quantile(L, PCT)
    return UCIQE_W[0] * chroma.std() + UCIQE_W[1] * con + UCIQE_W[2] * sat


def ccf(img):
    f = img.astype(float)
    rg = f[..., 0] - f[..., 1]
    yb = (f[..., 0] + f[..., 1]) / 2 - f[..., 2]
    color = np.sqrt(rg.var() + yb.var()) + CCF_M * np.hypot(rg.mean(), yb.mean())
    contrast = np.mean([b.std() for b in blocks(gray(img))])
    dark = minimum_filter(img.min(axis=-1), size=2 * RADIUS + 1, mode="nearest")
    fog = 100.0 * dark.astype(float).mean() / 255.0
    return CCF_W[0] * color + CCF_W[1] * contrast + CCF_W[2] * fog


def entropy(img):
    levels = np.floor(gray(img) + 0.5).clip(0, 255).astype(int)
    p = np.bincount(levels.ravel(), minlength=256) / levels.size
    p = p[p > 0]
    return max(0.0, float(-(p * np.log2(p)).sum()))


def main():
    mode, root = sys.argv[1], Path(sys.argv[2])
    if mode == "generate":
        root.mkdir(parents=True, exist_ok=True)
        for i, img in enumerate(corpus()):
            Image.fromarray(img, "RGB").save(root / f"img{i:02}.png")
        return
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["file", "uiqm", "uciqe", "ccf", "entropy"])
    for path in sorted(root.glob("*.png")):
        img = np.asarray(Image.open(path).convert("RGB"))
        out.writerow([path.name] + ["%.15e" % fn(img) for fn in (uiqm, uciqe, ccf, entropy)])


if __name__ == "__main__":
    main()
