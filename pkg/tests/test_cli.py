import json

import numpy as np
import pytest

from lpvss.cli import main
from lpvss.io import model_to_dict, save_model
from lpvss.models import scalar_lti


@pytest.fixture
def model_file(tmp_path, two_state):
    path = tmp_path / "model.json"
    save_model(two_state, path)
    return str(path)


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_simulate_writes_signals(tmp_path, model_file):
    out = tmp_path / "sim"
    assert main(["simulate", "--model", model_file, "--horizon", "30", "--seed", "4",
                 "--out", str(out)]) == 0
    lines = (out / "signals.csv").read_text().splitlines()
    assert lines[0] == "t,p_1,u_1,y_1,y_2" and len(lines) == 31
    man = _manifest(out)
    assert man["exit_code"] == 0 and man["seed"] == 4
    assert model_file in man["inputs"] and len(man["inputs"][model_file]) == 64


@pytest.mark.parametrize("form", ["general", "innovation"])
def test_simulate_is_byte_deterministic(tmp_path, model_file, form):
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        main(["simulate", "--model", model_file, "--form", form, "--horizon", "25",
              "--seed", "11", "--out", str(out)])
        outs.append((out / "signals.csv").read_bytes())
    assert outs[0] == outs[1]


def test_seed_changes_output(tmp_path, model_file):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["simulate", "--model", model_file, "--horizon", "10", "--seed", "1", "--out", str(a)])
    main(["simulate", "--model", model_file, "--horizon", "10", "--seed", "2", "--out", str(b)])
    assert (a / "signals.csv").read_bytes() != (b / "signals.csv").read_bytes()


def test_config_file(tmp_path, model_file):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"horizon": 12, "scheduling_kind": "constant",
                               "scheduling_value": [0.25], "input_kind": "zero"}))
    out = tmp_path / "o"
    assert main(["simulate", "--model", model_file, "--config", str(cfg), "--out", str(out)]) == 0
    rows = (out / "signals.csv").read_text().splitlines()[1:]
    assert len(rows) == 12 and all(r.split(",")[1] == "0.25" for r in rows)


def test_filter_pipeline(tmp_path, model_file):
    sim = tmp_path / "sim"
    main(["simulate", "--model", model_file, "--horizon", "300", "--seed", "3", "--out", str(sim)])
    out = tmp_path / "flt"
    assert main(["filter", "--model", model_file, "--signals", str(sim / "signals.csv"),
                 "--out", str(out)]) == 0
    head = (out / "trace.csv").read_text().splitlines()[0].split(",")
    assert head[:5] == ["t", "K_1_1", "K_2_1", "K_1_2", "K_2_2"]
    frac = _manifest(out)["resolved"]["whiteness_fraction"]
    assert frac >= 0.9


def test_boundcheck_pass(tmp_path, model_file):
    out = tmp_path / "b"
    code = main(["boundcheck", "--model", model_file, "--trials", "3", "--horizon", "80",
                 "--tau", "1", "--tau", "4", "--out", str(out)])
    rep = json.loads((out / "report.json").read_text())
    assert code == 0 and rep["verdict"] == "PASS"
    rows = (out / "bound_curve.csv").read_text().splitlines()
    assert rows[0] == "tau,empirical_max_norm,bound" and len(rows) == 3
    emp, bound = map(float, rows[1].split(",")[1:])
    assert emp <= bound


def test_boundcheck_inapplicable(tmp_path):
    path = tmp_path / "m.json"
    save_model(scalar_lti(c=0.0), path)
    out = tmp_path / "b"
    assert main(["boundcheck", "--model", str(path), "--trials", "2", "--horizon", "40",
                 "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["verdict"] == "INAPPLICABLE" and any("beta1" in r for r in rep["reasons"])


def test_gaindecay(tmp_path, model_file):
    out = tmp_path / "g"
    assert main(["gaindecay", "--model", model_file, "--trials", "3", "--horizon", "70",
                 "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["taus"] == [1, 2, 4, 8] and rep["overall_decay_fraction"] >= 0.9
    assert (out / "decay.csv").read_text().startswith("tau,stat,remainder_norm")


def test_example1(tmp_path, capsys):
    out = tmp_path / "e"
    assert main(["example1", "--trials", "20", "--out", str(out)]) == 0
    assert "PASS" in capsys.readouterr().out
    assert (out / "verdict.txt").read_text().strip() == "max_abs_diff ≤ 1e-10: PASS"


def test_indefinite_covariance_is_input_error(tmp_path, capsys):
    d = model_to_dict(scalar_lti(s=1.1))
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(d))
    assert main(["simulate", "--model", str(path), "--out", str(tmp_path)]) == 2
    assert "min eigenvalue" in capsys.readouterr().err


def test_missing_model_file(tmp_path):
    assert main(["simulate", "--model", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2


def test_nan_in_model(tmp_path, capsys):
    path = tmp_path / "nan.json"
    path.write_text(json.dumps(model_to_dict(scalar_lti())).replace("0.5", "NaN", 1))
    assert main(["simulate", "--model", str(path), "--out", str(tmp_path)]) == 2
    assert "NaN" in capsys.readouterr().err


def test_bad_horizon(tmp_path, model_file):
    assert main(["simulate", "--model", model_file, "--horizon", "0", "--out", str(tmp_path)]) == 2


def test_innovation_form_matches_general_statistics(tmp_path, model_file):
    ys = {}
    for form in ("general", "innovation"):
        out = tmp_path / form
        main(["simulate", "--model", model_file, "--form", form, "--horizon", "4000",
              "--seed", "5", "--config", str(_const_cfg(tmp_path)), "--out", str(out)])
        data = np.loadtxt(out / "signals.csv", delimiter=",", skiprows=1)
        ys[form] = data[1000:, -2:]
    cg, ci = np.cov(ys["general"].T), np.cov(ys["innovation"].T)
    np.testing.assert_allclose(ci, cg, rtol=0.15)


def _const_cfg(tmp_path):
    cfg = tmp_path / "const.json"
    cfg.write_text(json.dumps({"scheduling_kind": "constant", "scheduling_value": [0.3],
                               "input_kind": "zero"}))
    return cfg
