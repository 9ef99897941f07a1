# Step-by-step reference for the Q-index fusion, written independently of the
# Rust implementation. Usage: python3 qindex_oracle.py metrics.csv > golden.csv
#
#   1. per model and metric: flag |v - median| > 3*MAD (MAD scaled by
#      -1/(sqrt(2)*erfcinv(3/2)); MAD == 0 flags every v != median)
#   2. replace high outliers with the max of the kept values, low ones with the min
#   3. global min/max per metric over all models after replacement
#   4. rescale, clamp to [0, 1], average the four metrics
import csv
import sys

import numpy as np
from scipy.special import erfcinv

METRICS = ["uiqm", "uciqe", "ccf", "entropy"]
C = -1.0 / (np.sqrt(2.0) * erfcinv(1.5))


def replace(values):
    v = np.asarray(values, dtype=float)
    med = np.median(v)
    mad = C * np.median(np.abs(v - med))
    if mad == 0.0:
        flagged = v != med
    else:
        flagged = np.abs(v - med) > 3.0 * mad
    kept = v[~flagged]
    out = v.copy()
    out[flagged & (v > med)] = kept.max()
    out[flagged & (v < med)] = kept.min()
    return out, int(flagged.sum())


def main(path):
    rows = list(csv.DictReader(open(path)))
    models = list(dict.fromkeys(r["model"] for r in rows))
    images = list(dict.fromkeys(r["image_id"] for r in rows if r["model"] == models[0]))
    cube = {m: {k: [] for k in METRICS} for m in models}
    for m in models:
        for img in images:
            r = next(r for r in rows if r["model"] == m and r["image_id"] == img)
            for k in METRICS:
                cube[m][k].append(float(r[k]))
    for m in models:
        for k in METRICS:
            cube[m][k], _ = replace(cube[m][k])
    q = {m: np.zeros(len(images)) for m in models}
    for k in METRICS:
        pooled = np.concatenate([cube[m][k] for m in models])
        lo, hi = pooled.min(), pooled.max()
        for m in models:
            q[m] += np.clip((cube[m][k] - lo) / (hi - lo), 0.0, 1.0)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["model", "image_id", "q"])
    for m in models:
        for i, img in enumerate(images):
            w.writerow([m, img, "%.12f" % (q[m][i] / len(METRICS))])


if __name__ == "__main__":
    main(sys.argv[1])
