import warnings

import numpy as np
import pytest

from fracfm.pipeline import config_from_dict, run
from fracfm.wavecore import ElasticMedium, wave_numbers


@pytest.fixture(scope="session")
def exterior():
    return ElasticMedium(1.5, 1.0, 1.0)


@pytest.fixture(scope="session")
def wn4(exterior):
    return wave_numbers(4.0, exterior)


@pytest.fixture(scope="session")
def penny_runs(tmp_path_factory):
    """Two full pipeline runs of the penny preset with the same seed."""
    outs = []
    for tag in ("a", "b"):
        out = tmp_path_factory.mktemp(f"penny_{tag}")
        cfg = config_from_dict({"seed": 11, "scene": "penny-homogeneous", "out": str(out)})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            outs.append(run(cfg))
    return outs


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
