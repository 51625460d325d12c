import numpy as np
import pytest

from fracfm.presets import (build_background, build_crack, build_sampling, dump_preset, load_preset,
                            preset, preset_names, preset_to_dict, truth_mask)
from fracfm.wavecore import ElasticMedium, ValidationError, check_monotonicity


@pytest.mark.parametrize("name", preset_names())
def test_round_trip(name):
    p = preset(name)
    text = dump_preset(p)
    assert dump_preset(load_preset(text)) == text
    assert preset_to_dict(load_preset(text)) == preset_to_dict(p)


@pytest.mark.parametrize("name", preset_names())
def test_monotonicity_on_every_interface(name):
    p = preset(name)
    for itf in p.interfaces:
        a, b = ElasticMedium(*p.media[itf["inside"]]), ElasticMedium(*p.media[itf["outside"]])
        assert check_monotonicity(a, b)


def test_unknown_preset_lists_names():
    with pytest.raises(ValidationError, match="penny-homogeneous"):
        preset("nope")


def test_penny_parameters():
    p = preset("penny-homogeneous")
    assert p.grid == [20, 10]
    assert p.noise == {"delta": 0.05, "delta_b": 0.05}
    assert p.tau == 0.1
    assert not p.best_effort


def test_composites_values():
    c1 = preset("composite1")
    assert c1.media[1] == [0.4, 0.2, 0.75] and c1.media[2] == [0.6, 0.4, 1.5]
    assert sum(s["count"] for s in c1.sampling) == 2225
    assert c1.best_effort
    c2 = preset("composite2")
    K = [np.asarray(q["stiffness"]) for q in c2.crack["patches"]]
    assert np.all(K[0] == 0) and np.all(K[1] == 2 * np.eye(3))
    assert [s["count"] for s in c2.sampling] == [900, 200, 150]


def test_inclusion_validation_builds():
    p = preset("inclusion-validation")
    bg = build_background(p)
    cr = build_crack(p, bg)
    s = build_sampling(p)
    t = truth_mask(p, s)
    assert cr.n_nodes > 0 and 0 < t.sum() < s.M
    assert np.all(s.points[t][:, 2] > 0.25)


def test_load_rejects_unknown_key():
    text = dump_preset(preset("penny-homogeneous")) + "extra: 1\n"
    with pytest.raises(ValidationError, match="extra"):
        load_preset(text)
