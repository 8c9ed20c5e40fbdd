import csv
import hashlib
import json

import jsonschema
import pytest

from dispstab import cli
from dispstab.config import (
    ALL_STAGES,
    build_scenario,
    bundled_path,
    bundled_scenarios,
    load_config,
    load_schema,
    parse_config_text,
    validate_config,
)
from dispstab.errors import BlowUpError, ConfigError, ConvergenceError, InsufficientDataError, NumericalError, TrackingError


def write_cfg(tmp_path, text, name="case"):
    path = tmp_path / f"{name}.cfg"
    path.write_text(text)
    return path


def reports(out):
    return sorted(out.glob("*/report.json"))


def test_parse_config_text():
    cfg = parse_config_text('# comment\n\nmodel = "KDV"\nspeed = 1.5\nstages = ["solve"]\n')
    assert cfg == {"model": "KDV", "speed": 1.5, "stages": ["solve"]}


@pytest.mark.parametrize(
    "text, key",
    [
        ('model = "KDV"\nmodel = "BBM"\n', "model"),
        ("speed = [1,\n", "speed"),
        ("just words\n", "just words"),
    ],
)
def test_parse_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    assert info.value.key == key


@pytest.mark.parametrize(
    "raw, key",
    [
        ({"speed": 1.0}, "model"),
        ({"model": "KDV", "speed": 1.0, "colour": "red"}, "colour"),
        ({"model": "KDV", "speed": "fast"}, "speed"),
        ({"model": "KDV", "speed": 1.0, "stages": ["solve", "dance"]}, "stages"),
        ({"model": "KDV", "speed": 1.0, "evolve_amplitude": 0.1}, "evolve_amplitude"),
        ({"model": "KDV"}, "speed"),
    ],
)
def test_validation_errors_name_the_key(raw, key):
    with pytest.raises(ConfigError) as info:
        validate_config(raw)
    assert info.value.key == key


def test_defaults_filled():
    cfg = validate_config({"model": "kdv", "speed": 1.0})
    assert cfg["model"] == "KDV"
    assert cfg["n_points"] == 512 and cfg["stages"] == list(ALL_STAGES[:6])


def test_bad_parameter_values_are_config_errors():
    with pytest.raises(ConfigError) as info:
        build_scenario(validate_config({"model": "KDV", "speed": 1.0, "n_points": 100}))
    assert info.value.key == "n_points"
    with pytest.raises(ConfigError) as info:
        build_scenario(validate_config({"model": "KDV", "speed": 1.0, "symbol": "ilw", "symbol_params": {"H": -1}}))
    assert info.value.key == "symbol_params"
    with pytest.raises(ConfigError):
        build_scenario(validate_config({"model": "KDV", "speed": 1.0, "symbol": "fifth_order"}))


def test_bundled_scenarios_load():
    names = bundled_scenarios()
    assert {"kdv_classical.cfg", "gkdv_p6.cfg", "rbou_scan.cfg", "gkdv_p5_scan.cfg"} <= set(names)
    for name in names:
        sc = build_scenario(load_config(bundled_path(name)))
        assert sc.name == name[:-4]


@pytest.mark.parametrize(
    "exc, code",
    [
        (ConfigError("x"), 2),
        (InsufficientDataError("x"), 2),
        (ConvergenceError("x"), 3),
        (NumericalError("x"), 4),
        (TrackingError("x"), 4),
        (BlowUpError("x"), 4),
    ],
)
def test_exit_code_mapping(exc, code):
    assert cli._exit_code_for(exc) == code


def test_stage_ordering():
    assert cli.order_stages(["criterion"]) == ["solve", "spectrum", "criterion"]
    assert cli.order_stages(["evolve", "solve"]) == ["solve", "evolve"]
    assert cli.order_stages([]) == []


def test_jsonable_replaces_nonfinite():
    import numpy as np

    out = cli.jsonable({"a": np.float64("nan"), "b": [np.int64(2), np.inf], "c": np.array([1.0])})
    assert out == {"a": None, "b": [2, None], "c": [1.0]}


def test_config_error_exit_code(tmp_path, capsys):
    path = write_cfg(tmp_path, 'model = "KDV"\nspeed = 1.0\nwobble = 3\n')
    assert cli.main(["solve", "--config", str(path), "--out", str(tmp_path / "out")]) == 2
    assert "wobble" in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert cli.main(["solve", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_empty_stage_list_echoes_scenario(tmp_path):
    path = write_cfg(tmp_path, 'model = "KDV"\nspeed = 1.0\nstages = []\n')
    report, code, out = cli.run(path, tmp_path / "out")
    assert code == 0
    assert report["stages"] == {} and report["scenario"]["model"] == "KDV"
    assert "profile" not in report
    jsonschema.validate(json.loads((out / "report.json").read_text()), load_schema("run_report"))


def test_convergence_failure_exit_code(tmp_path, capsys):
    path = write_cfg(
        tmp_path,
        'model = "KDV"\nspeed = 1.0\nnonlinearity = {"polynomial": {"2": 0.5, "3": 0.1}}\nmax_iters = 2\n',
    )
    assert cli.main(["criterion", "--config", str(path), "--out", str(tmp_path / "out")]) == 3
    assert "stage solve failed" in capsys.readouterr().err
    report = json.loads(reports(tmp_path / "out")[0].read_text())
    assert report["stages"]["solve"]["status"] == "failed"
    assert report["stages"]["solve"]["error_type"] == "ConvergenceError"
    assert report["exit_code"] == 3


def test_late_failure_keeps_earlier_results(tmp_path):
    # the direction construction is not defined for RBOU
    path = write_cfg(tmp_path, 'model = "RBOU"\nspeed = 1.5\nstages = ["spectrum", "direction"]\n')
    report, code, out = cli.run(path, tmp_path / "out")
    assert code == 4
    assert report["stages"]["solve"]["status"] == "ok"
    assert report["stages"]["spectrum"]["status"] == "ok"
    assert report["stages"]["direction"]["status"] == "failed"
    assert report["linearized"]["n_minus"] == 1
    assert (out / "report.json").exists()


def test_kdv_classical_criterion(tmp_path):
    report, code, out = cli.run(bundled_path("kdv_classical"), tmp_path, ["criterion"], command="criterion")
    assert code == 0
    crit = report["criterion"]
    assert crit["verdict"] == "CriterionSilent"
    assert crit["n_minus"] == 1 and crit["dP_dc"] > 0
    assert report["linearized"]["provenance"]["n_points"] == 512
    manifest = json.loads((out / "manifest.json").read_text())
    for entry in manifest["files"]:
        data = (out / entry["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]


def test_gkdv_p6_full_pipeline(tmp_path):
    report, code, out = cli.run(bundled_path("gkdv_p6"), tmp_path)
    assert code == 0
    assert report["criterion"]["verdict"] == "PurelyGrowingModeExists"
    gm = report["growing_mode"]
    assert gm["found"] and gm["lambda_star"] > 0 and gm["defect"] < 1e-8
    ev = report["evolution"]
    assert ev["perturbation"] == "growing mode"
    assert ev["match"] is True
    rows = list(csv.reader(open(out / "eigenfunction.csv")))
    assert rows[0] == ["x", "re_u", "im_u"] and len(rows) == 513
    rows = list(csv.reader(open(out / "deviation.csv")))
    assert rows[0] == ["t", "log_norm", "Q", "E"]


def test_outputs_are_deterministic(tmp_path):
    path = write_cfg(tmp_path, 'model = "BBM"\nspeed = 3.0\nstages = ["moving_kernel"]\n', "det")
    _, _, a = cli.run(path, tmp_path / "a")
    _, _, b = cli.run(path, tmp_path / "b")
    for name in ("profile.txt", "moving_kernel_trace.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_scan_threads_do_not_change_rows(tmp_path):
    r1, c1, _ = cli.run(bundled_path("gkdv_p5_scan"), tmp_path / "1", command="scan", threads=1)
    r2, c2, _ = cli.run(bundled_path("gkdv_p5_scan"), tmp_path / "2", command="scan", threads=2)
    assert c1 == c2 == 0
    assert r1["scan"]["rows"] == r2["scan"]["rows"]
    rows = r1["scan"]["rows"]
    assert all(r["transition_candidate"] for r in rows)
    assert all(r["verdict"] == "Indeterminate" for r in rows)


def test_rbou_scan_positive(tmp_path):
    report, code, out = cli.run(bundled_path("rbou_scan"), tmp_path, command="scan")
    assert code == 0
    assert all(r["dP_dc"] > 0 and r["n_minus"] == 1 for r in report["scan"]["rows"])
    rows = list(csv.reader(open(out / "branch.csv")))
    assert rows[0][:3] == ["c", "P", "dP_dc"]


@pytest.mark.parametrize("extra", ["speed_range = [1.0, 1.0]\n", "speed_range = [0.5, 1.5]\nn_speeds = 3\n", "speed = 1.0\n"])
def test_scan_needs_five_speeds(tmp_path, extra, capsys):
    path = write_cfg(tmp_path, 'model = "KDV"\n' + extra)
    assert cli.main(["scan", "--config", str(path), "--out", str(tmp_path / "out")]) == 2


def test_list_scenarios(capsys):
    assert cli.main(["list-scenarios"]) == 0
    assert "kdv_classical.cfg" in capsys.readouterr().out
