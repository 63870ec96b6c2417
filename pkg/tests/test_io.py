import json

import numpy as np
import pytest

from lpvss.core import ModelError
from lpvss.io import load_model, loads_strict, model_from_dict, model_to_dict, save_model
from lpvss.models import random_model


def _same(a, b):
    pts = [[-1.0], [-0.3], [0.0], [0.8]]
    for p in pts:
        for Ma, Mb in zip(a.matrices(p), b.matrices(p)):
            assert Ma.tobytes() == Mb.tobytes()
    for name in ("Q", "S", "R"):
        assert getattr(a.noise, name).tobytes() == getattr(b.noise, name).tobytes()


def test_roundtrip_file(tmp_path, two_state):
    path = tmp_path / "m.json"
    save_model(two_state, path)
    _same(two_state, load_model(path))


@pytest.mark.parametrize("seed", range(5))
def test_roundtrip_random(seed):
    m = random_model(np.random.default_rng(seed), nx=3, ny=2, nu=2)
    d = json.loads(json.dumps(model_to_dict(m)))
    _same(m, model_from_dict(d))


def test_dict_layout(two_state):
    d = model_to_dict(two_state)
    assert d["dims"] == {"nx": 2, "nu": 1, "ny": 2, "np": 1}
    assert set(d["matrices"]) == {"A", "B", "C", "D", "G", "H"}
    assert d["scheduling_set"] == {"min": [-1.0], "max": [1.0]}


def test_nan_rejected():
    with pytest.raises(ModelError, match="NaN"):
        loads_strict('{"a": NaN}')


def test_missing_noise(two_state):
    d = model_to_dict(two_state)
    del d["noise"]
    with pytest.raises(ModelError, match="noise"):
        model_from_dict(d)


def test_wrong_shape(two_state):
    d = model_to_dict(two_state)
    d["matrices"]["A"]["M0"] = [[1.0, 0.0, 0.0]]
    with pytest.raises(ModelError, match="A"):
        model_from_dict(d)


def test_unknown_basis_kind(two_state):
    d = model_to_dict(two_state)
    d["basis"][0]["kind"] = "spline"
    with pytest.raises(ModelError, match="spline"):
        model_from_dict(d)


def test_shipped_demo_models_load():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "demos" / "models"
    for path in sorted(root.glob("*.json")):
        load_model(path)
