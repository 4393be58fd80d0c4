import json

import numpy as np
import pytest

from ccsb.errors import ConfigurationError
from ccsb.series import TimeSeries


def test_csv_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    t = np.arange(6) * 0.1
    ts = TimeSeries(t, {"norm": rng.random(6), "ccf": rng.random(6) + 1j * rng.random(6)},
                    {"seed": 3})
    path = ts.write(tmp_path / "run.csv", {"extra": True})
    header = path.read_text().splitlines()[0]
    assert header == "t,norm,ccf_re,ccf_im"
    back = TimeSeries.from_csv(path)
    assert np.array_equal(back.t, t)
    assert np.array_equal(back["norm"], ts["norm"])
    assert np.array_equal(back["ccf"], ts["ccf"])
    meta = json.loads((tmp_path / "run.json").read_text())
    assert meta["seed"] == 3 and meta["extra"] is True and meta["columns"] == ["norm", "ccf"]


def test_column_map(tmp_path):
    ts = TimeSeries([0.0, 1.0], {"variance": [0.5, 0.6]})
    ts.to_csv(tmp_path / "a.csv")
    back = TimeSeries.from_csv(tmp_path / "a.csv", {"variance": "var"})
    assert list(back.columns) == ["var"]


def test_validation():
    with pytest.raises(ConfigurationError):
        TimeSeries([0.0, 0.0], {})
    with pytest.raises(ConfigurationError):
        TimeSeries([0.0, 1.0], {"x": [1.0]})


def test_uniform_and_spacing():
    assert TimeSeries(np.arange(5) * 0.25).uniform
    assert TimeSeries(np.arange(5) * 0.25).spacing == 0.25
    assert not TimeSeries([0.0, 0.1, 0.3]).uniform
