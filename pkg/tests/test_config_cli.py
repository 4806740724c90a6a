import json

import pytest

from grushinpme.cli import (
    EXIT_BLOWUP,
    EXIT_CERTIFICATE,
    EXIT_CONFIG,
    EXIT_HYPOTHESIS,
    EXIT_OK,
    EXIT_UNDERFLOW,
    dispatch,
)
from grushinpme.config import PRESET_NAMES, parse_config, preset_document, presets
from grushinpme.errors import SchemaError, ValidationError

SMALL = {"m": 1, "k": 1, "gamma": 1.0, "extents": [[0, 1], [0, 1]], "nodes": [9, 9]}


def small(**over):
    doc = {"domain": dict(SMALL)}
    doc.update(over)
    return doc


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_presets_parse(name):
    cfg = parse_config({"preset": name})
    assert cfg.document["domain"]["nodes"]
    assert parse_config(json.dumps(preset_document(name))) == cfg


def test_preset_values():
    cfg = parse_config({"preset": "blowup-p3"})
    assert (cfg.mode, cfg.ell, cfg.alpha, cfg.beta, cfg.theta) == ("blow-up", 1.0, 4.0, "auto", 0.01)
    assert cfg.source.terms == ((1.0, 3.0),)
    assert cfg.domain.nodes == (31, 31)
    g = parse_config({"preset": "global-linear"})
    assert (g.mode, g.alpha, g.beta, g.theta, g.solver.t_end) == ("global", 0.0, -1.0, 0.0, 5.0)
    assert set(presets()) == set(PRESET_NAMES)


def test_override_merges_into_preset():
    cfg = parse_config({"preset": "blowup-p3", "domain": {"nodes": [15, 15]}, "seed": 9})
    assert cfg.domain.nodes == (15, 15)
    assert cfg.domain.gamma == 1.0
    assert cfg.seed == 9


def test_defaults_filled():
    cfg = parse_config(small())
    assert cfg.mode == "simulate-only"
    assert cfg.eigen_tol == 1e-10
    assert cfg.solver.cfl == 0.5


@pytest.mark.parametrize(
    "doc, path",
    [
        (small(extra=1), "extra"),
        (small(solver={"cfl": 0.5, "bogus": 1}), "solver.bogus"),
        (small(mode="chaos"), "mode"),
        ({"preset": "nope"}, "preset"),
    ],
)
def test_schema_errors_carry_path(doc, path):
    with pytest.raises(SchemaError) as info:
        parse_config(doc)
    assert info.value.path == path


def test_missing_domain_and_bad_json():
    with pytest.raises(SchemaError):
        parse_config({})
    with pytest.raises(SchemaError):
        parse_config("{not json")


@pytest.mark.parametrize(
    "over, path",
    [
        ({"domain": {**SMALL, "gamma": -1.0}}, "domain.gamma"),
        ({"domain": {**SMALL, "extents": [[-1, 1], [0, 1]]}}, "domain.extents"),
        ({"mode": "blow-up", "source": {"terms": [{"C": 1, "p": 3}]}, "params": {"ell": 1, "alpha": 1.5, "beta": 1, "theta": 0.1}}, "params.alpha"),
        ({"mode": "blow-up", "source": {"terms": [{"C": 1, "p": 3}]}, "params": {"ell": 1, "alpha": 4, "beta": 1, "theta": 0}}, "params.theta"),
        ({"mode": "global", "source": {"terms": [{"C": 1, "p": 1}]}, "params": {"ell": 1, "alpha": 1, "beta": -1, "theta": 0}}, "params.alpha"),
        ({"mode": "global", "source": {"terms": [{"C": 1, "p": 1}]}, "params": {"ell": 1, "alpha": 0, "beta": "auto", "theta": 0}}, "params.beta"),
        ({"mode": "global", "source": {"terms": []}, "params": {"ell": 1, "alpha": 0, "beta": -1, "theta": 0}}, "source.terms"),
        ({"source": {"terms": [{"C": -1, "p": 2}]}}, "source.terms.0.C"),
        ({"params": {"ell": 0.5}}, "params.ell"),
        ({"solver": {"initial": {"kind": "bump", "scale": "auto"}}}, "solver.initial.scale"),
        ({"solver": {"initial": {"kind": "file"}}}, "solver.initial.path"),
        ({"solver": {"cfl": 2.0}}, "solver.cfl"),
        ({"eigen": {"tol": 2.0}}, "eigen.tol"),
    ],
)
def test_cross_field_validation(over, path):
    doc = small()
    doc.update(over)
    with pytest.raises(ValidationError) as info:
        parse_config(doc)
    assert info.value.path == path
    assert str(info.value).startswith(path)


# --- command line ---------------------------------------------------------


def write(tmp_path, doc):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_presets_command(capsys):
    assert dispatch(["presets"]) == EXIT_OK
    assert capsys.readouterr().out.split() == list(PRESET_NAMES)
    assert dispatch(["presets", "--name", "heat-decay"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["mode"] == "simulate-only"
    assert dispatch(["presets", "--name", "nope"]) == EXIT_CONFIG


def test_eigen_command(tmp_path, capsys):
    cfg = write(tmp_path, small(eigen={"poincare_trials": 5}))
    mtx = tmp_path / "A.mtx"
    assert dispatch(["eigen", "--config", cfg, "--out", str(tmp_path), "--dump-matrix", str(mtx)]) == EXIT_OK
    out = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines())
    assert float(out["Q"]) == 3.0
    assert int(out["poincare_trials"]) == 5
    assert (tmp_path / "eigenfield.csv").exists() and mtx.exists()


def test_eigen_sweep(tmp_path):
    cfg = write(tmp_path, small(sweep={"gamma": [0.0, 1.0]}, eigen={"poincare_trials": 2}))
    assert dispatch(["eigen", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert len((tmp_path / "eigen_sweep.csv").read_text().splitlines()) == 3


def test_check_conditions_exit_codes(tmp_path):
    base = {"mode": "blow-up", "source": {"terms": [{"C": 1, "p": 3}]}}
    ok = write(tmp_path, small(**base, params={"ell": 1, "alpha": 4, "beta": "auto", "theta": 0.01}))
    assert dispatch(["check-conditions", "--config", ok, "--out", str(tmp_path)]) == EXIT_OK
    bad = write(tmp_path, small(**base, params={"ell": 1, "alpha": 4.01, "beta": "auto", "theta": 0.01}))
    assert dispatch(["check-conditions", "--config", bad, "--no-csv", "--out", str(tmp_path)]) == EXIT_HYPOTHESIS
    plain = write(tmp_path, small())
    assert dispatch(["check-conditions", "--config", plain]) == EXIT_CONFIG


def test_beta_too_large_is_a_hypothesis_failure(tmp_path):
    doc = small(mode="blow-up", source={"terms": [{"C": 1, "p": 3}]}, params={"ell": 1, "alpha": 4, "beta": 1e6, "theta": 0.01})
    assert dispatch(["check-conditions", "--config", write(tmp_path, doc), "--out", str(tmp_path)]) == EXIT_HYPOTHESIS


def test_simulate_exit_codes(tmp_path):
    heat = write(tmp_path, small(solver={"t_end": 0.01}))
    assert dispatch(["simulate", "--config", heat, "--out", str(tmp_path), "--checkpoint"]) == EXIT_OK
    assert (tmp_path / "field.csv").exists() and (tmp_path / "trace.csv").exists()
    blow = small(source={"terms": [{"C": 1, "p": 3}]}, solver={"t_end": 10, "u_blow": 1e3, "dt_min": 1e-300, "initial": {"kind": "bump", "scale": 50}})
    assert dispatch(["simulate", "--config", write(tmp_path, blow), "--out", str(tmp_path)]) == EXIT_BLOWUP
    blow["solver"]["u_blow"] = 1e8
    blow["solver"]["dt_min"] = 1e-6
    assert dispatch(["simulate", "--config", write(tmp_path, blow), "--out", str(tmp_path)]) == EXIT_UNDERFLOW


def test_simulate_from_file(tmp_path):
    heat = write(tmp_path, small(solver={"t_end": 0.01}))
    dispatch(["simulate", "--config", heat, "--out", str(tmp_path), "--checkpoint"])
    again = small(solver={"t_end": 0.01, "initial": {"kind": "file", "path": str(tmp_path / "field.csv")}})
    assert dispatch(["simulate", "--config", write(tmp_path, again), "--out", str(tmp_path / "b")]) == EXIT_OK


def test_zero_initial_field_is_config_error(tmp_path, capsys):
    doc = small(solver={"t_end": 0.01, "initial": {"kind": "bump", "scale": 0}})
    assert dispatch(["simulate", "--config", write(tmp_path, doc), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "identically zero" in capsys.readouterr().err


def test_config_errors(tmp_path, capsys):
    assert dispatch(["simulate"]) == EXIT_CONFIG
    assert dispatch(["simulate", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert dispatch(["simulate", "--config", write(tmp_path, small(bogus=1))]) == EXIT_CONFIG
    assert "bogus" in capsys.readouterr().err
    assert dispatch(["certify-global", "--preset", "blowup-p3", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert dispatch(["no-such-command"]) == EXIT_CONFIG


def test_certify_global_hypothesis_failure(tmp_path, capsys):
    # alpha = 0 and f = u^2: the tail coefficient of the global condition is negative
    doc = small(mode="global", source={"terms": [{"C": 1, "p": 2}]}, params={"ell": 1, "alpha": 0, "beta": -1, "theta": 0}, solver={"t_end": 0.1})
    assert dispatch(["certify-global", "--config", write(tmp_path, doc), "--out", str(tmp_path)]) == EXIT_HYPOTHESIS
    assert "hypothesis.source_condition_tail=fail" in capsys.readouterr().err


def test_certify_blowup_small_grid(tmp_path):
    doc = {"preset": "blowup-p3", "domain": {"nodes": [11, 11]}}
    code = dispatch(["certify-blowup", "--config", write(tmp_path, doc), "--out", str(tmp_path)])
    assert code in (EXIT_OK, EXIT_CERTIFICATE)
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert (code == EXIT_OK) == (cert["verdict"] == "pass")
    assert (tmp_path / "certificate.txt").read_text().startswith("mode=blow-up")


def test_convergence_command(tmp_path):
    doc = small(convergence={"nodes": [7, 15]})
    assert dispatch(["convergence", "--config", write(tmp_path, doc), "--out", str(tmp_path)]) == EXIT_OK
    assert len((tmp_path / "convergence.csv").read_text().splitlines()) == 3
    assert dispatch(["convergence", "--config", write(tmp_path, small()), "--out", str(tmp_path)]) == EXIT_CONFIG
