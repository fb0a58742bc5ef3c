import json
import math
import os
from pathlib import Path

import pytest

from qanpon import cli
from qanpon.scenario import (
    CSV_COLUMNS,
    CSV_VERSION,
    ConfigError,
    compare_with_oracle,
    load_scenario,
    parse_scenario,
    rows_to_csv,
    run_sweep,
)

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "qanpon" / "data" / "scenarios"
GOLDEN = Path(__file__).resolve().parent / "golden"


def write(tmp_path, data, name="s.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_plan_full_64(capsys):
    code, out, _ = run(capsys, "plan", "--scenario", SCENARIOS / "full_64users.json")
    assert code == 0
    assert "quantum loss      26.50 dB" in out
    report = json.loads(out[out.index("\n{") + 1:])
    assert report["link_budget"]["quantum_loss_db"] == pytest.approx(26.5)
    assert report["key"]["feasible"]


def test_plan_empty_path_is_lossless(tmp_path, capsys):
    path = write(tmp_path, {"scheme": {"kind": "full", "feeder_km": 0, "drop_km": 0, "n": 1,
                                       "stages": []}})
    code, out, _ = run(capsys, "plan", "--scenario", path, "--out", tmp_path / "o")
    assert code == 0
    report = json.loads((tmp_path / "o" / "plan.json").read_text())
    assert report["link_budget"]["quantum_loss_db"] == 0.0
    sc = load_scenario(path)
    longer = parse_scenario({"scheme": {"kind": "full", "feeder_km": 1, "drop_km": 0, "n": 1, "stages": []}})
    assert report["key"]["r_bps"] > longer.evaluate().key.r_bps > 0
    assert sc.evaluate().raman.receiver_rate == 0.0


def test_plan_rejects_inverted_intensities(tmp_path, capsys):
    path = write(tmp_path, {"scheme": {"kind": "full", "feeder_km": 5, "n": 16},
                            "protocol": {"mu": 0.1, "nu": 0.2}})
    code, _, err = run(capsys, "plan", "--scenario", path)
    assert code == 1
    assert "protocol" in err and "nu" in err


@pytest.mark.parametrize("data, where", [
    ({"scheme": {"kind": "full", "feeder_km": -2, "n": 16}}, "scheme.feeder_km"),
    ({"scheme": {"kind": "ring", "feeder_km": 2, "n": 16}}, "scheme.kind"),
    ({"scheme": {"kind": "full", "feeder_km": 2, "n": 12}}, "scheme"),
    ({"scheme": {"kind": "full", "feeder_km": 2, "n": 16}, "detector": {"efficiency": 2}}, "detector"),
    ({"scheme": {"kind": "full", "feeder_km": 2, "n": 16},
      "sweep": [{"path": "scheme.feeder_km", "start": 5, "stop": 1, "step": 1}]}, "sweep[0]"),
    ({"scheme": {"kind": "full", "feeder_km": 2, "n": 16},
      "sweep": [{"path": "protocol.colour", "values": [1]}]}, "sweep[0].path"),
    ({"scheme": {"kind": "full", "feeder_km": 2, "n": 16},
      "sweep": [{"paths": ["scheme.n", "scheme.quantum_n"], "values": [[16]]}]}, "sweep[0].values"),
    ({"scheme": {"kind": "full", "feeder_km": 2}}, "scheme"),
    ({"network": {}}, "<root>"),
])
def test_path_precise_errors(data, where):
    with pytest.raises(ConfigError) as exc:
        parse_scenario(data)
    assert str(exc.value).startswith(where + ":")


def test_check_mode(tmp_path, capsys):
    code, out, _ = run(capsys, "sweep", "--check", "--scenario", SCENARIOS / "distance_vs_attenuation.json")
    assert code == 0 and "75 points" in out
    code, _, err = run(capsys, "plan", "--check", "--scenario", write(tmp_path, {"scheme": {}}))
    assert code == 1 and err.startswith("error: scheme:")
    code, _, _ = run(capsys, "plan", "--scenario", tmp_path / "missing.json")
    assert code == 1


def test_sweep_requires_axis(capsys):
    code, _, err = run(capsys, "sweep", "--scenario", SCENARIOS / "full_64users.json")
    assert code == 1 and "sweep" in err


def test_sweep_grid_order_and_header():
    sc = load_scenario(SCENARIOS / "distance_vs_attenuation.json")
    rows = run_sweep(sc)
    assert len(rows) == 3 * 25
    keys = [(r["olt_attenuation_db"], r["feeder_km"]) for r in rows]
    assert keys == sorted(keys)
    text = rows_to_csv(rows)
    lines = text.splitlines()
    assert lines[0] == f"# {CSV_VERSION}"
    assert lines[1].split(",") == list(CSV_COLUMNS)


def test_frontier_grows_with_attenuation():
    rows = run_sweep(load_scenario(SCENARIOS / "distance_vs_attenuation.json"))
    frontier = {}
    for r in rows:
        if r["feasible"]:
            frontier[r["olt_attenuation_db"]] = max(frontier.get(r["olt_attenuation_db"], 0), r["feeder_km"])
    assert frontier[3] < frontier[6] < frontier[9]


def test_dual_splitter_order():
    rows = run_sweep(load_scenario(SCENARIOS / "dual_splitter_configs.json"))
    rate = {(r["n_classical"], r["n_quantum"]): r["r_bps"] for r in rows}
    assert rate[(32, 16)] > rate[(16, 16)]
    assert rate[(32, 16)] > rate[(32, 32)]


def test_golden_csv(capsys):
    code, out, _ = run(capsys, "sweep", "--scenario", SCENARIOS / "dual_splitter_configs.json")
    assert code == 0
    assert out == (GOLDEN / "dual_splitter_configs.csv").read_text()


def test_concurrent_sweep_is_identical():
    sc = load_scenario(SCENARIOS / "distance_vs_attenuation.json")
    assert rows_to_csv(run_sweep(sc, workers=4)) == rows_to_csv(run_sweep(sc))


def test_single_point_sweep_equals_plan(tmp_path, capsys):
    base = json.loads((SCENARIOS / "full_64users.json").read_text())
    _, plan_csv, _ = run(capsys, "plan", "--format", "csv", "--scenario", SCENARIOS / "full_64users.json")
    path = write(tmp_path, {**base, "sweep": [{"path": "scheme.feeder_km", "values": [5]}]})
    _, sweep_csv, _ = run(capsys, "sweep", "--scenario", path)
    assert sweep_csv == plan_csv


def test_bad_points_become_rows(tmp_path, capsys):
    path = write(tmp_path, {"scheme": {"kind": "full", "feeder_km": 5, "n": 16},
                            "sweep": [{"path": "scheme.n", "values": [8, 12, 16]},
                                      {"path": "protocol.nu", "values": [0.1, 0.5]}]})
    code, out, _ = run(capsys, "sweep", "--scenario", path, "--format", "json")
    assert code == 0
    rows = json.loads(out)
    assert len(rows) == 6
    bad = [r for r in rows if r["error"]]
    # n = 12 fails for both decoys, nu = 0.5 > mu fails for n = 8 and 16
    assert len(bad) == 4
    assert all(r["feasible"] is False for r in bad)
    assert [r["n_classical"] for r in rows] == [8, 8, 12, 12, 16, 16]


def test_multi_path_axis():
    rows = run_sweep(load_scenario(SCENARIOS / "dual_feeder_capacity.json"))
    got = [(r["n_classical"], r["feeder_km"], r["feasible"]) for r in rows]
    assert got[-3:] == [(32, 20, True), (64, 20, False), (64, 10, True)]


def test_calibrate_command(tmp_path, capsys):
    code, _, _ = run(capsys, "calibrate", "--feeder-km", 5, "--predict", "--out", tmp_path)
    assert code == 0
    report = json.loads((tmp_path / "calibration.json").read_text())
    assert max(abs(r["relative_residual"]) for r in report["fit"]) < 1e-9
    assert len(report["predictions"]) == 4
    # a fitted fragment drops straight into a scenario
    sc = parse_scenario({"scheme": {"kind": "full", "feeder_km": 5, "n": 16}, "raman": report["raman"]})
    assert sc.evaluate().raman.receiver_rate == pytest.approx(16300, rel=1e-9)


def test_calibrate_single_measurement(tmp_path, capsys):
    path = write(tmp_path, {"measurements": [
        {"scheme": {"kind": "full", "feeder_km": 3, "n": 32}, "observed_cps": 9000}]})
    code, out, _ = run(capsys, "calibrate", "--single", "--measurements", path)
    assert code == 0
    assert abs(json.loads(out)["fit"][0]["relative_residual"]) < 1e-12


def test_calibrate_rejects_degenerate(tmp_path, capsys):
    path = write(tmp_path, {"measurements": [
        {"scheme": {"kind": "full", "feeder_km": 5, "n": 16}, "observed_cps": 0},
        {"scheme": {"kind": "full", "feeder_km": 20, "n": 16}, "observed_cps": 0}]})
    code, _, err = run(capsys, "calibrate", "--measurements", path)
    assert code == 1 and "measurements" in err


def test_validate_passes(capsys, tmp_path):
    code, _, err = run(capsys, "validate", "--scenario", SCENARIOS / "postproc_demo.json",
                       "--pulses", 2_000_000, "--seed", 4, "--out", tmp_path)
    assert code == 0
    assert json.loads((tmp_path / "validate.json").read_text())["passed"]
    assert "q_mu" in err


def test_validate_negative_control(capsys):
    code, _, err = run(capsys, "validate", "--scenario", SCENARIOS / "postproc_demo.json",
                       "--pulses", 2_000_000, "--inject-e-detector", 0.08)
    assert code == 2
    assert "mismatch" in err


def test_validate_blocked_link():
    sc = load_scenario(SCENARIOS / "full_64users.json")
    cmp = compare_with_oracle(sc, 500_000, seed=1, loss_db=math.inf)
    # only background remains on both sides
    assert cmp.analytic["q_mu"] == cmp.analytic["y_0"]
    assert cmp.simulated["q_mu"] - cmp.simulated["y_0"] == pytest.approx(0.0, abs=5 * cmp.sigma["q_mu"])
    assert cmp.passed


def test_postproc_command(tmp_path, capsys):
    code, _, _ = run(capsys, "postproc", "--scenario", SCENARIOS / "postproc_demo.json",
                     "--pulses", 4_000_000, "--seed", 2, "--out", tmp_path)
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["postproc.json", "receiver.key", "sender.key"]
    assert (tmp_path / "sender.key").read_bytes() == (tmp_path / "receiver.key").read_bytes()
    record = json.loads((tmp_path / "postproc.json").read_text())
    assert record["postprocessing"]["keys_match"]
    assert record["postprocessing"]["final_length"] > 0


def test_commands_touch_only_declared_outputs(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    out = tmp_path / "out"
    run(capsys, "sweep", "--scenario", SCENARIOS / "dual_splitter_configs.json", "--out", out)
    run(capsys, "plan", "--scenario", SCENARIOS / "full_64users.json")
    assert sorted(os.listdir(tmp_path)) == ["out"]
    assert os.listdir(out) == ["sweep.csv"]


def test_seed_must_be_u64(capsys):
    with pytest.raises(SystemExit):
        cli.main(["validate", "--scenario", str(SCENARIOS / "full_64users.json"), "--seed", "-1"])
