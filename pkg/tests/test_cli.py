import json
import subprocess
import sys

import pytest

from conftest import DATA
from gridhaul.cli import main
from gridhaul.config import load_scenario, load_sweep_config
from gridhaul.export import read_geojson, read_step_records, read_sweep
from gridhaul._files import FileFormatError
from oracles import two_bus_closed_form


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def table(out: str) -> dict:
    rows = [line.split(",") for line in out.splitlines() if line and not line.startswith("#")]
    return {r[0]: [float(x) for x in r[1:]] for r in rows[1:]}


def test_validate_good_files(capsys):
    files = [DATA / f for f in ("case3.json", "case30.json", "feeder61.json", "road10.json", "stations10.json")]
    code, out, _ = run(capsys, "validate", *files)
    assert code == 0
    assert out.count(": valid") == 5


def test_validate_reports_every_problem(capsys, tmp_path):
    case = json.loads((DATA / "case3.json").read_text())
    case["buses"][1]["kind"] = "slack"
    case["branches"].append({"from_bus": 3, "to_bus": 3, "r": 0.0, "x": 0.1})
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(case))
    code, out, _ = run(capsys, "validate", bad)
    assert code == 1
    assert "multiple slack" in out and "from_bus equals to_bus" in out


def test_validate_malformed_json(capsys, tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text("{ not json")
    code, _, _ = run(capsys, "validate", bad, "--kind", "case")
    assert code == 1


def test_solve_pf_two_bus_matches_closed_form(capsys, tmp_path):
    out_csv = tmp_path / "v.csv"
    code, out, _ = run(capsys, "solve-pf", DATA / "case2.json", "--out", out_csv)
    assert code == 0 and "converged" in out
    v2, a2 = two_bus_closed_form(1.0, 0.1)
    rows = table(out)
    assert rows["2"][0] == pytest.approx(v2, abs=1e-9)
    assert rows["2"][1] == pytest.approx(a2, abs=1e-9)
    assert out_csv.read_text().startswith("bus_id,")


def test_solve_pf_extra_load_collapses_to_sentinel(capsys, tmp_path):
    geo = tmp_path / "snap.geojson"
    code, out, _ = run(capsys, "solve-pf", DATA / "case2.json", "--load", "2:500", "--geojson", geo)
    assert code == 0 and "COLLAPSED" in out
    rows = table(out)
    assert rows["1"] == [0.01, 0.0] and rows["2"] == [0.01, 0.0]
    assert "violations outside [0.95, 1.05]: 2" in out
    # case2 has no coordinates, so the snapshot is empty but well formed
    assert read_geojson(geo)["type"] == "FeatureCollection"


def test_solve_pf_geojson_carries_coordinates(capsys, tmp_path):
    geo = tmp_path / "snap.geojson"
    assert run(capsys, "solve-pf", DATA / "case3.json", "--geojson", geo)[0] == 0
    feats = read_geojson(geo)["features"]
    assert len(feats) == 3
    assert all(f["geometry"]["type"] == "Point" for f in feats)


def test_solve_pf_bad_load_flag(capsys):
    code, _, err = run(capsys, "solve-pf", DATA / "case2.json", "--load", "two:5")
    assert code == 2 and "--load" in err


def test_solve_feeder_station_flag(capsys, tmp_path):
    out_csv = tmp_path / "f.csv"
    code, out, _ = run(capsys, "solve-feeder", DATA / "feeder5.json", "--station", "4:3", "--out", out_csv)
    assert code == 0
    assert "station at node 4: 3 vehicles, 450 kW" in out
    rows = table(out)
    assert rows["0"][0] == pytest.approx(1.0)
    assert rows["4"][0] < rows["3"][0] < rows["1"][0] < 1.0


def test_solve_feeder_rejects_mixed_placement(capsys):
    code, _, _ = run(capsys, "solve-feeder", DATA / "feeder5.json", "--station", "4:3", "--n-stations", "2")
    assert code == 2


def test_simulate_with_no_vehicles_charges_nobody(capsys, tmp_path):
    code, out, _ = run(
        capsys, "simulate-transmission", DATA / "scenario.json", "--arrival-rate", 0, "--initial-hdevs", 0,
        "--duration-hours", 2, "--out", tmp_path,
    )
    assert code == 0
    records = read_step_records(tmp_path / "step_records.csv")
    assert len(records) == 8
    assert all(r.n_charging == 0 for r in records)
    assert len(list((tmp_path / "snapshots").glob("*.geojson"))) == 8


def test_simulate_seed_flag_is_reproducible(capsys, tmp_path):
    for name in ("a", "b"):
        args = ("simulate-transmission", DATA / "scenario.json", "--duration-hours", 3, "--seed", 5,
                "--no-geojson", "--out", tmp_path / name)
        assert run(capsys, *args)[0] == 0
    a = (tmp_path / "a" / "step_records.csv").read_text()
    assert a == (tmp_path / "b" / "step_records.csv").read_text()
    assert not (tmp_path / "a" / "snapshots").exists()


def test_config_flag_supplies_defaults(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"case": str(DATA / "case2.json"), "sentinel": 0.5, "load": ["2:500"]}))
    code, out, _ = run(capsys, "solve-pf", "--config", cfg)
    assert code == 0
    assert table(out)["2"][0] == 0.5
    # an explicit flag wins over the config value
    code, out, _ = run(capsys, "solve-pf", "--config", cfg, "--sentinel", 0.02)
    assert table(out)["2"][0] == 0.02


def test_sweep_cli_writes_samples(capsys, tmp_path):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"feeders": [str(DATA / "feeder61.json")], "station_counts": [5, 100],
                               "vehicle_grid": [0, 20], "samples_per_cell": 3, "master_seed": 4}))
    out_csv = tmp_path / "s.csv"
    code, out, _ = run(capsys, "sweep-distribution", cfg, "--out", out_csv)
    assert code == 0
    samples = read_sweep(out_csv)
    assert len(samples) == 6
    assert out.count("skipped") == 2
    assert all(s.n_violations == 0 for s in samples if s.n_vehicles == 0)


def test_scenario_overrides():
    base = load_scenario(DATA / "scenario.json").scenario
    over = load_scenario(DATA / "scenario.json", {"rng_seed": 99, "initial_hdevs": 0, "duration_hours": 1}).scenario
    assert (base.seed, base.initial_hdevs, base.n_steps) == (17, 300, 192)
    assert (over.seed, over.initial_hdevs, over.n_steps) == (99, 0, 4)


def test_scenario_config_errors_name_the_field(tmp_path):
    data = json.loads((DATA / "scenario.json").read_text())
    data = {k: (str(DATA / v) if isinstance(v, str) and v.endswith((".json", ".csv")) else v) for k, v in data.items()}
    data["port_strategy"] = "lottery"
    path = tmp_path / "s.json"
    path.write_text(json.dumps(data))
    with pytest.raises(FileFormatError, match="port_strategy"):
        load_scenario(path)


def test_sweep_config_defaults(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"feeders": [str(DATA / "feeder5.json")]}))
    cfg = load_sweep_config(path)
    assert cfg.station_counts == [5, 10, 20, 50] and cfg.samples_per_cell == 100
    path.write_text(json.dumps({"feeders": [str(DATA / "feeder5.json")], "vehicle_grid": [-1]}))
    with pytest.raises(FileFormatError, match="vehicle_grid"):
        load_sweep_config(path)


def test_missing_file_exits_one(capsys, tmp_path):
    code, _, err = run(capsys, "solve-pf", tmp_path / "nope.json")
    assert code == 1 and "gridhaul: error" in err


def test_unknown_subcommand_exits_two(capsys):
    assert run(capsys, "frobnicate")[0] == 2


def test_missing_positional_exits_two(capsys):
    assert run(capsys, "solve-pf")[0] == 2


def test_console_script_module_entry():
    proc = subprocess.run([sys.executable, "-m", "gridhaul.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("gridhaul ")
