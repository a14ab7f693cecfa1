import json
import os
import subprocess
import sys

import numpy as np
import pytest

from obukhov import ConfigParse, IntegratorConfig, ShellState, build_ladder, figure2_params, integrate
from obukhov.cli import ScenarioConfig, export_trajectory, import_trajectory, main, run
from obukhov.integrator import galerkin_rhs


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2) if isinstance(doc, dict) else doc)
    return str(path)


@pytest.fixture(scope="module")
def small_traj():
    L = build_ladder(figure2_params(K=2))
    traj = integrate(galerkin_rhs(L, "inviscid"), ShellState(0.0, "rescaled", L.A), -L.T)
    return L, traj


def test_unknown_scenario_is_a_config_error(tmp_path, capsys):
    path = write_config(tmp_path, {"scenario": "figure3"})
    with pytest.raises(ConfigParse) as info:
        ScenarioConfig.load(path)
    assert info.value.field == "scenario" and info.value.line == 2
    assert main(["run", path]) == 2
    assert "config error" in capsys.readouterr().err


def test_unknown_fields_report_line_and_field(tmp_path):
    doc = '{\n  "scenario": "roundtrip",\n  "ladder": {\n    "K": 4,\n    "gamma": 2\n  }\n}\n'
    with pytest.raises(ConfigParse) as info:
        ScenarioConfig.from_json(doc)
    assert info.value.field == "ladder.gamma" and info.value.line == 5
    with pytest.raises(ConfigParse) as info:
        ScenarioConfig.from_json('{"scenario": "roundtrip", "colour": 1}')
    assert info.value.field == "colour"
    with pytest.raises(ConfigParse) as info:
        ScenarioConfig.from_json('{"scenario": "roundtrip", "integrator": {"tolerance": 1}}')
    assert info.value.field == "integrator"


def test_malformed_json_and_bad_values():
    with pytest.raises(ConfigParse) as info:
        ScenarioConfig.from_json('{\n  "scenario": "roundtrip",\n  oops\n}')
    assert info.value.line == 3
    with pytest.raises(ConfigParse):
        ScenarioConfig.from_json('{"scenario": "roundtrip", "validation": "lenient"}')
    with pytest.raises(ConfigParse) as info:
        ScenarioConfig.from_json('{"scenario": "roundtrip", "ladder": {"b": 1.0}}')
    assert info.value.field == "ladder"
    with pytest.raises(ConfigParse):
        ScenarioConfig.from_json("[1, 2]")


def test_defaults_and_overrides():
    cfg = ScenarioConfig.from_json('{"scenario": "roundtrip", "ladder": {"K": 4}, "integrator": {"rel_tol": 1e-9}}')
    assert cfg.params == figure2_params(K=4)
    assert cfg.integrator.rel_tol == 1e-9
    assert ScenarioConfig.from_json('{"scenario": "lemma-verify"}').validation.value == "strict-viscous"
    again = ScenarioConfig.from_json(json.dumps(cfg.to_dict()))
    assert again == cfg


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_export_import_is_bit_identical(tmp_path, small_traj, fmt):
    L, traj = small_traj
    entry = export_trajectory(traj, tmp_path / f"t.{fmt}", ladder=L)
    assert entry["rows"] == len(traj.t) and entry["ladder_hash"] == L.params.digest()
    back = import_trajectory(tmp_path / f"t.{fmt}")
    assert np.array_equal(back.t, traj.t) and np.array_equal(back.x, traj.x)
    assert back.form is traj.form
    if fmt == "json":
        times = np.linspace(-L.T, 0, 17)
        assert np.array_equal(back.interpolate(times), traj.interpolate(times))


def test_csv_layout(tmp_path, small_traj):
    L, traj = small_traj
    export_trajectory(traj, tmp_path / "t.csv", ladder=L)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == f"# form=rescaled ladder={L.params.digest()}"
    assert lines[1] == "t,x_0,x_1,x_2"
    assert all(len(row.split(",")) == 4 for row in lines[1:])


def test_export_errors(tmp_path, small_traj):
    L, traj = small_traj
    empty = traj.resampled(np.array([]))
    with pytest.raises(ValueError):
        export_trajectory(empty, tmp_path / "e.csv")
    with pytest.raises(OSError) as info:
        export_trajectory(traj, tmp_path / "missing" / "t.csv")
    assert "missing" in str(info.value)
    with pytest.raises(ValueError):
        export_trajectory(traj, tmp_path / "t.txt")


def test_roundtrip_run_and_manifest(tmp_path):
    cfg = ScenarioConfig.for_scenario("roundtrip", params=figure2_params(K=6), out=str(tmp_path / "rt"))
    report = run(cfg)
    assert report.passed
    assert max(report.results["terminal_error"]) <= 1e-3
    for entry in report.manifest:
        assert os.path.exists(entry["path"])
    saved = json.loads((tmp_path / "rt" / "report.json").read_text())
    assert saved["config"]["ladder"] == figure2_params(K=6).to_dict()
    assert saved["timings"]["total"] > 0


def test_identical_configs_write_identical_csv(tmp_path):
    out = []
    for name in ("a", "b"):
        cfg = ScenarioConfig.for_scenario("roundtrip", params=figure2_params(K=5),
                                          out=str(tmp_path / name), plots=False)
        run(cfg)
        out.append((tmp_path / name / "forward.csv").read_bytes())
    assert out[0] == out[1]


def test_main_exit_codes(tmp_path, capsys):
    ok = write_config(tmp_path, {"scenario": "roundtrip", "ladder": {"K": 5}}, "ok.json")
    assert main(["run", ok, "--out", str(tmp_path / "ok"), "--check"]) == 0
    assert (tmp_path / "ok" / "report.json").exists()
    failing = write_config(tmp_path, {"scenario": "galerkin-study", "ladder": {"K": 8},
                                      "options": {"K_list": [6, 8]}}, "gal.json")
    assert main(["run", failing, "--out", str(tmp_path / "gal")]) == 0
    assert main(["run", failing, "--out", str(tmp_path / "gal"), "--check"]) == 4
    budget = write_config(tmp_path, {"scenario": "roundtrip",
                                     "ladder": {"N0": 1000.0, "b": 1.2, "beta": 2.45, "K": 6}}, "amp.json")
    assert main(["run", budget, "--out", str(tmp_path / "amp")]) == 3
    assert "AmplificationBudgetExceeded" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "nope.json")]) == 2


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, {"scenario": "roundtrip", "ladder": {"K": 3}, "plots": False})
    proc = subprocess.run([sys.executable, "-m", "obukhov", "run", cfg, "--out", str(tmp_path / "m")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "PASS  terminal_error" in proc.stdout


def test_figure2_scenario_outputs(tmp_path):
    cfg = ScenarioConfig.for_scenario("figure2", out=str(tmp_path / "f2"))
    report = run(cfg)
    svg = (tmp_path / "f2" / "figure2.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == len(report.results["snapshot_times"])
    L = build_ladder(cfg.params)
    Y0 = np.array(report.results["Y"][-1])
    np.testing.assert_allclose(Y0, L.N ** 1.4, rtol=1e-12)
    rows = (tmp_path / "f2" / "profiles.csv").read_text().splitlines()
    assert len(rows) == L.size + 1


def test_variant_compare_reports_arrivals(tmp_path):
    report = run(ScenarioConfig.for_scenario("variant-compare", out=str(tmp_path / "v"), plots=False))
    arr = report.results["arrivals"]
    assert set(arr) == {"katz-pavlovic", "geometric-obukhov", "super-exp-obukhov"}
    assert arr["katz-pavlovic"]["cascade"] is True
    assert arr["super-exp-obukhov"]["direction"] == -1.0


def test_snapshot_times_override(tmp_path):
    L = build_ladder(figure2_params(K=12))
    cfg = ScenarioConfig.for_scenario("figure2", out=str(tmp_path / "f"), snapshot_times=(-L.T / 2,),
                                      plots=False, options={"extension": 2})
    report = run(cfg)
    assert report.results["snapshot_times"] == [-L.T / 2, 0.0]


def test_integrator_config_in_report(tmp_path):
    cfg = ScenarioConfig.for_scenario("roundtrip", params=figure2_params(K=3), plots=False,
                                      integrator=IntegratorConfig(rel_tol=1e-9), out=str(tmp_path / "r"))
    report = run(cfg)
    assert report.config["integrator"]["rel_tol"] == 1e-9
