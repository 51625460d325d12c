"""Acceptance criteria 1 to 9, each checked at its stated tolerance."""
import json
import time
import warnings

import numpy as np

from fracfm import pipeline as pl
from fracfm.inversion import (differential_matrix, f_sharp, indicator_map, noise_for_target,
                              scattering_matrix, threshold)
from fracfm.pipeline import config_from_dict, read_archive, run
from fracfm.presets import build_background, build_sampling, build_wave_numbers, preset, preset_to_dict, truth_mask

ARCHIVES = ("F_b.ffm", "F.ffm", "F_delta.ffm", "F_b_delta.ffm")


def test_criterion_1_kernel_correctness():
    t0 = time.perf_counter()
    checks = pl.suite_kernels(seed=0)
    elapsed = time.perf_counter() - t0
    by = {c.name: c for c in checks}
    assert by["navier_residual_max"].value < 1e-6
    assert by["far_field_reciprocity_max"].value <= 1e-12
    assert elapsed < 10.0


def test_criterion_2_mixed_reciprocity():
    t0 = time.perf_counter()
    coarse = pl.mrp_residuals(250)
    fine = pl.mrp_residuals(500)
    elapsed = time.perf_counter() - t0
    print(f"MRP max {coarse.max():.4g} -> {fine.max():.4g}, {elapsed:.1f} s")
    assert coarse.max() <= 2e-2
    assert fine.max() <= 2e-2
    assert fine.max() < coarse.max()
    assert elapsed < 300.0


def test_criterion_3_scattering_operator():
    r = pl.scattering_checks(n_nodes=250, grid=(12, 16))
    print({k: np.max(v) for k, v in r.items()})
    assert r["unitarity"] <= 5e-2
    assert r["identity"].max() <= 2e-2
    assert r["unitarity_homogeneous"] <= 1e-12
    assert r["identity_homogeneous"].max() <= 1e-12


def test_criterion_4_factorization_oracle():
    t0 = time.perf_counter()
    (c,) = pl.suite_factorization(refinement=3)
    elapsed = time.perf_counter() - t0
    print(c.line())
    assert c.value <= 5e-2
    assert elapsed < 600.0


def test_criterion_5_forward_oracles():
    r = pl.forward_checks()
    print(r)
    assert r["static_normal"] <= 2e-2
    assert r["static_shear"] <= 2e-2
    assert r["welded_ratio"] <= 1e-2
    assert r["block_reciprocity"] <= 1e-2


def test_criterion_6_regularization_oracles():
    r = pl.regularization_checks(seed=0, n_systems=100)
    print(r)
    assert r["discrepancy"] <= 1e-8
    assert r["identity_alpha"] <= 1e-12
    assert r["picard"] <= 1e-10


def test_criterion_7_end_to_end_localization(penny_runs):
    p = preset("penny-homogeneous")
    res = penny_runs[0]
    F, _, _ = read_archive(res.out / "F.ffm")
    F_b, _, _ = read_archive(res.out / "F_b.ffm")
    wn = build_wave_numbers(p)
    bg = build_background(p)
    s = build_sampling(p)
    cell = 2 * 2.0 / 30
    on = truth_mask(p, s)
    dilated = truth_mask(p, s, dilation=cell)
    forward_time = res.manifest["timings"]["forward"]
    for seed in range(5):
        t0 = time.perf_counter()
        ss = np.random.SeedSequence(seed).spawn(2)
        Fd, delta, _ = noise_for_target(F, 0.05, ss[0])
        Fbd, _, _ = noise_for_target(F_b, 0.05, ss[1])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            _, eig = f_sharp(differential_matrix(Fd, Fbd), scattering_matrix(Fbd, wn))
        im = threshold(indicator_map(eig, s, bg, wn, scattering_matrix(Fbd, wn), "tikhonov", delta), 0.1)
        elapsed = time.perf_counter() - t0 + forward_time
        ratio = im.values[on].mean() / im.values[~on].mean()
        jac = (im.mask & dilated).sum() / (im.mask | dilated).sum()
        print(f"seed {seed}: ratio {ratio:.2f}, Jaccard {jac:.3f}, {elapsed:.1f} s")
        assert ratio >= 5.0
        assert jac >= 0.5
        assert elapsed < 600.0


def test_criterion_8_determinism(penny_runs):
    a, b = penny_runs
    for name in ARCHIVES + ("indicator.csv",):
        assert (a.out / name).read_bytes() == (b.out / name).read_bytes(), name


def test_criterion_9_scale(penny_runs, tmp_path):
    scene = preset_to_dict(preset("penny-homogeneous"))
    scene["sampling"][0]["count"] = [25, 40]
    cfg = config_from_dict({"seed": 2, "scene": scene, "out": str(tmp_path / "scale"),
                            "stages": {"forward": False, "invert": True,
                                       "archive_in": str(penny_runs[0].out)}})
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = run(cfg)
    total = time.perf_counter() - t0
    man = json.loads((res.out / "manifest.json").read_text())
    assert man["scene"]["N"] == 200 and man["scene"]["M"] == 1000
    invert = man["timings"]["invert"]
    print(f"600x600, M = 1000: invert stage {invert:.1f} s, pipeline without forward {total:.1f} s")
    assert invert < 30.0
    assert total < 600.0
