import json
import warnings

import numpy as np
import pytest

from fracfm.geometry import direction_grid
from fracfm.inversion import FarFieldMatrix
from fracfm.pipeline import (ConfigError, PipelineError, archive_bytes, config_from_dict, emit_config,
                             parse_config, read_archive, resolve_threads, run, validate, write_archive)
from fracfm.presets import preset, preset_to_dict
from fracfm.wavecore import ValidationError


def tiny_scene():
    d = preset_to_dict(preset("penny-homogeneous"))
    d.update(name="tiny", grid=[4, 6])
    d["crack"]["refinement"] = 1
    d["sampling"][0]["count"] = [5, 5]
    return d


def tiny_config(out, **kw):
    d = {"seed": 5, "scene": tiny_scene(), "out": str(out)}
    d.update(kw)
    return config_from_dict(d)


def quiet_run(cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return run(cfg)


def test_missing_seed_names_field():
    with pytest.raises(ConfigError) as exc:
        parse_config("scene: penny-homogeneous\n")
    assert ("config.seed", "required field is missing") in exc.value.errors


def test_unknown_keys_rejected_with_paths():
    with pytest.raises(ConfigError) as exc:
        parse_config("seed: 1\nscene: penny-homogeneous\nnoise: {delt: 0.1}\nmethd: picard\n")
    paths = [p for p, _ in exc.value.errors]
    assert "config.noise.delt" in paths and "config.methd" in paths


def test_bad_version_rejected():
    with pytest.raises(ConfigError, match="version"):
        parse_config("version: 2\nseed: 1\nscene: penny-homogeneous\n")


def test_preset_reference_expands():
    cfg = parse_config("seed: 1\nscene: composite1\n")
    assert cfg.scene_ref == "composite1"
    assert cfg.scene.media[2] == [0.6, 0.4, 1.5]
    assert cfg.noise["delta"] == 0.05 and cfg.tau == 0.1


@pytest.mark.parametrize("text", [
    "seed: 1\nscene: penny-homogeneous\n",
    "seed: 3\nscene: composite2\nmethod: picard\npicard: {N_P: 40}\ntau: 0.2\nthreads: 2\n",
])
def test_emit_parse_round_trip(text):
    cfg = parse_config(text)
    again = parse_config(emit_config(cfg))
    assert again == cfg
    assert emit_config(again) == emit_config(cfg)


def test_invert_only_needs_existing_archive(tmp_path):
    with pytest.raises(ConfigError, match="archive"):
        parse_config(f"seed: 1\nscene: penny-homogeneous\nstages: {{forward: false, invert: true, "
                     f"archive_in: {tmp_path}}}\n")


def test_archive_round_trip_and_checksum(tmp_path, rng):
    g = direction_grid(3, 4)
    F = FarFieldMatrix(g, 4.0, rng.normal(size=(36, 36)) + 1j * rng.normal(size=(36, 36)), "F")
    path = tmp_path / "F.ffm"
    write_archive(path, F, [[1.5, 1.0, 1.0]], "F")
    G, media, role = read_archive(path)
    assert role == "F" and media == [[1.5, 1.0, 1.0]]
    assert G.data.tobytes() == F.data.tobytes()
    raw = bytearray(path.read_bytes())
    assert raw[:4] == b"FFM1"
    assert len(raw) == 4 + 2 + 4 + 4 + 8 + 4 + 24 + 2 + 16 * 36 * 36 + 8
    raw[100] ^= 1
    path.write_bytes(bytes(raw))
    with pytest.raises(ValidationError, match="checksum"):
        read_archive(path)


def test_archive_refuses_grid_mismatch(tmp_path, rng):
    g = direction_grid(3, 4)
    F = FarFieldMatrix(g, 4.0, np.zeros((36, 36)), "F")
    write_archive(tmp_path / "F.ffm", F, [[1.5, 1.0, 1.0]], "F")
    with pytest.raises(ValidationError, match="grid"):
        read_archive(tmp_path / "F.ffm", direction_grid(4, 4))


def test_archive_is_little_endian_row_major(rng):
    g = direction_grid(2, 2)
    data = np.arange(144).reshape(12, 12) + 1j
    b = archive_bytes(FarFieldMatrix(g, 1.0, data, "F"), [[1.5, 1.0, 1.0]], "F")
    off = 4 + 2 + 4 + 4 + 8 + 4 + 24 + 2
    re, im = np.frombuffer(b[off:off + 32], "<f8")[[0, 2]], np.frombuffer(b[off:off + 32], "<f8")[[1, 3]]
    assert list(re) == [0.0, 1.0] and list(im) == [1.0, 1.0]


def test_run_writes_artifacts(tmp_path):
    res = quiet_run(tiny_config(tmp_path / "r"))
    out = res.out
    for name in ("F_b.ffm", "F.ffm", "F_delta.ffm", "F_b_delta.ffm", "eigen.json", "indicator.csv",
                 "manifest.json"):
        assert (out / name).is_file()
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok"
    assert man["noise"]["delta"] == pytest.approx(0.05)
    assert man["rng"]["algorithm"] == "PCG64"
    assert set(man["timings"]) == {"setup", "forward", "noise", "invert"}
    lines = (out / "indicator.csv").read_text().splitlines()
    assert lines[0] == "index,x,y,z,nx,ny,nz,indicator,alpha_or_Np,truncated"
    assert len(lines) == 26


def test_staged_run_matches_full_run(tmp_path):
    full = quiet_run(tiny_config(tmp_path / "full"))
    quiet_run(tiny_config(tmp_path / "fwd", stages={"forward": True, "invert": False}))
    inv = quiet_run(tiny_config(tmp_path / "inv", stages={"forward": False, "invert": True,
                                                          "archive_in": str(tmp_path / "fwd")}))
    assert (full.out / "indicator.csv").read_bytes() == (inv.out / "indicator.csv").read_bytes()


def test_invert_refuses_mismatched_archive(tmp_path):
    quiet_run(tiny_config(tmp_path / "fwd", stages={"forward": True, "invert": False}))
    d = tiny_scene()
    d["grid"] = [4, 8]
    cfg = config_from_dict({"seed": 5, "scene": d, "out": str(tmp_path / "inv"),
                            "stages": {"forward": False, "invert": True, "archive_in": str(tmp_path / "fwd")}})
    with pytest.raises(PipelineError) as exc:
        quiet_run(cfg)
    assert exc.value.stage == "load"
    man = json.loads((tmp_path / "inv" / "manifest.json").read_text())
    assert man["status"] == "failed" and man["failed_stage"] == "load"


def test_stage_failure_keeps_partial_artifacts(tmp_path):
    cfg = tiny_config(tmp_path / "r", method="picard", picard={"N_P": 10 ** 6})
    with pytest.raises(PipelineError) as exc:
        quiet_run(cfg)
    assert exc.value.stage == "invert"
    assert (tmp_path / "r" / "F.ffm").is_file() and (tmp_path / "r" / "F_delta.ffm").is_file()
    assert json.loads((tmp_path / "r" / "manifest.json").read_text())["failed_stage"] == "invert"


def test_threads_flag_beats_environment(monkeypatch):
    monkeypatch.setenv("FRACFM_THREADS", "3")
    assert resolve_threads(None, 1) == 3
    assert resolve_threads(2, 1) == 2
    monkeypatch.delenv("FRACFM_THREADS")
    assert resolve_threads(None, 1) == 1


def test_validate_quick_suites():
    for suite in ("kernels", "regularization", "eigen"):
        assert all(c.passed for c in validate(suite))
    with pytest.raises(ValidationError):
        validate("nope")
