import subprocess
import sys

import yaml

from fracfm.cli import main
from fracfm.presets import load_preset


def test_preset_dump_loads_back(capsys):
    assert main(["preset-dump", "composite2"]) == 0
    p = load_preset(capsys.readouterr().out)
    assert p.name == "composite2"


def test_missing_seed_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("scene: penny-homogeneous\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert "config.seed" in capsys.readouterr().err


def test_validate_exit_code(capsys):
    assert main(["validate", "regularization"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_flags_override_config(tmp_path):
    from fracfm.cli import _config, build_parser

    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"seed": 1, "scene": "penny-homogeneous", "tau": 0.3}))
    args = build_parser().parse_args(["forward", "--config", str(cfg), "--seed", "9", "--noise", "2",
                                      "--tau", "0.2", "--method", "picard", "--threads", "1"])
    c = _config(args, "forward")
    assert c.seed == 9 and c.tau == 0.2 and c.method == "picard" and c.threads == 1
    assert c.noise["delta"] == 0.02 and c.stages["invert"] is False


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "fracfm", "preset-dump", "penny-homogeneous"],
                       capture_output=True, text=True, check=True)
    assert "penny-homogeneous" in r.stdout
