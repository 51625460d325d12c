"""Localization statistics on the penny preset over several noise seeds.

Usage: python3 scripts/localization_study.py [--seeds 5] [--method tikhonov] [--N-P 100]
"""
import argparse
import time
import warnings

import numpy as np

from fracfm.fracture import Scene, measured_far_matrix
from fracfm.inversion import (differential_matrix, f_sharp, indicator_map, noise_for_target,
                              scattering_matrix, threshold)
from fracfm.presets import (build_background, build_crack, build_grid, build_sampling,
                            build_wave_numbers, preset, truth_mask)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--method", choices=("tikhonov", "picard"), default="tikhonov")
    ap.add_argument("--N-P", type=int, default=None)
    ap.add_argument("--noise", type=float, default=0.05)
    args = ap.parse_args()

    p = preset("penny-homogeneous")
    wn, grid, bg, s = build_wave_numbers(p), build_grid(p), build_background(p), build_sampling(p)
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        F_b = bg.far_matrix(grid, wn)
        F = measured_far_matrix(Scene(bg, build_crack(p, bg)), grid, wn, F_b=F_b)
    print(f"forward solve {time.perf_counter() - t0:.1f} s")
    on = truth_mask(p, s)
    dilated = truth_mask(p, s, dilation=4.0 / 30)
    for seed in range(args.seeds):
        ss = np.random.SeedSequence(seed).spawn(2)
        Fd, delta, _ = noise_for_target(F, args.noise, ss[0])
        Fbd, _, _ = noise_for_target(F_b, args.noise, ss[1])
        S_b = scattering_matrix(Fbd, wn)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            _, eig = f_sharp(differential_matrix(Fd, Fbd), S_b)
        im = threshold(indicator_map(eig, s, bg, wn, S_b, args.method, delta, args.N_P), p.tau)
        ratio = im.values[on].mean() / im.values[~on].mean()
        jac = (im.mask & dilated).sum() / (im.mask | dilated).sum()
        print(f"seed {seed}: delta {delta:.4f}  on/off ratio {ratio:7.2f}  Jaccard {jac:.3f}")


if __name__ == "__main__":
    main()
