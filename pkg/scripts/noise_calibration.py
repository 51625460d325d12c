"""Realized noise level against epsilon for a stored far-field archive.

Usage: python3 scripts/noise_calibration.py runs/penny/F.ffm [--seeds 100]
"""
import argparse

import numpy as np

from fracfm.inversion import calibrate_noise
from fracfm.pipeline import read_archive


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("archive")
    ap.add_argument("--seeds", type=int, default=100)
    args = ap.parse_args()
    F, _, role = read_archive(args.archive)
    eps = np.array([1e-3, 2e-3, 5e-3, 1e-2, 2e-2])
    delta = calibrate_noise(F, eps, n_seeds=args.seeds)
    print(f"{role}: mean realized delta over {args.seeds} seeds")
    for e, d in zip(eps, delta):
        print(f"  eps {e:.0e}  delta {d:.4f}")


if __name__ == "__main__":
    main()
