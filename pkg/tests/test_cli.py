import json
from pathlib import Path

import polars as pl
import pytest

import main

SMALL = {
    "domain": {"a": 0.0, "b": 1.0, "n": 16},
    "solver": {"restarts": 2, "max_iter": 20000},
    "verify": {"samples": 20, "refine": False},
}


@pytest.fixture
def config_file(tmp_path):
    def write(overrides=None, name="config.json"):
        data = json.loads(json.dumps(SMALL))
        for section, values in (overrides or {}).items():
            data.setdefault(section, {}).update(values)
        path = tmp_path / name
        path.write_text(json.dumps(data, indent=2), encoding="utf-8")
        return str(path)

    return write


def test_eig_writes_eigenpair_and_manifest(isolated_settings, config_file, tmp_path):
    out = tmp_path / "eig"
    code = main.main(["eig", "--config", config_file(), "--out", str(out), "--seed", "5", "--dump-weights"])
    assert code == main.EXIT_OK
    pair = json.loads((out / "eigenpair.json").read_text())
    assert pair["converged"] is True
    assert pair["value"] > 0
    frame = pl.read_csv(out / "eigenfunction.csv")
    assert frame.columns == ["x", "u"]
    assert frame.height == 16
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "eig"
    assert manifest["seed"] == 5
    assert manifest["config"]["domain"]["n"] == 16
    assert (out / "weights" / "near_weights.csv").exists()


def test_eig_is_deterministic(isolated_settings, config_file, tmp_path):
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main.main(["eig", "--config", config_file(), "--out", str(out), "--quiet"]) == 0
        outputs.append(out)
    for filename in ("eigenpair.json", "eigenfunction.csv", "manifest.json"):
        assert (outputs[0] / filename).read_bytes() == (outputs[1] / filename).read_bytes()


def test_spectrum_csv(isolated_settings, config_file, tmp_path):
    out = tmp_path / "spectrum"
    assert main.main(["spectrum", "--config", config_file(), "--out", str(out)]) == 0
    frame = pl.read_csv(out / "spectrum.csv")
    assert frame.columns == ["k", "lambda"]
    assert frame.height == 16
    assert frame["k"].to_list() == list(range(1, 17))
    assert frame["lambda"].is_sorted()


def test_spectrum_for_general_p_is_a_precondition_error(isolated_settings, config_file, tmp_path):
    path = config_file({"constants": {"p": 3.0}})
    assert main.main(["spectrum", "--config", path, "--out", str(tmp_path / "out")]) == main.EXIT_CONFIG


def test_invalid_config_exits_with_config_code(isolated_settings, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"domain": {"n": 0}}', encoding="utf-8")
    assert main.main(["eig", "--config", str(path)]) == main.EXIT_CONFIG
    log = (tmp_path / "logs" / "log.txt").read_text(encoding="utf-8")
    assert "domain.n" in log


def test_check_g_default_passes(isolated_settings, config_file):
    assert main.main(["check-g", "--config", config_file()]) == main.EXIT_OK
    out = isolated_settings.OUTPUT_DIR
    data = json.loads((Path(out) / "check-g" / "conditions.json").read_text())
    assert data["conditions"]["passed"] is True
    assert data["nonlinearity"]["kind"] == "h2"
    assert "superlinearity" in data


def test_check_g_power_fails_g3(isolated_settings, config_file, tmp_path):
    path = config_file({"nonlinearity": {"kind": "power", "lambda": 1.0}})
    out = tmp_path / "check"
    assert main.main(["check-g", "--config", path, "--out", str(out)]) == main.EXIT_CONDITION
    data = json.loads((out / "conditions.json").read_text())
    assert data["conditions"]["g3_feasible"] is False
    assert "superlinearity" not in data
    assert pl.read_csv(out / "condition_samples.csv").columns == ["t", "g", "G", "q"]


def test_solve_refuses_power_nonlinearity(isolated_settings, config_file, tmp_path):
    path = config_file({"nonlinearity": {"kind": "power", "lambda": 1.0}})
    out = tmp_path / "solve"
    assert main.main(["solve", "--config", path, "--out", str(out)]) == main.EXIT_CONDITION
    assert json.loads((out / "conditions.json").read_text())["g3_feasible"] is False
    assert not (out / "solution.json").exists()


def test_linking_needs_p2(isolated_settings, config_file, tmp_path):
    path = config_file({"constants": {"p": 3.0}})
    code = main.main(["solve", "--mode", "linking", "--config", path, "--out", str(tmp_path / "out")])
    assert code == main.EXIT_CONFIG


def test_linking_outside_spectral_gap_has_its_own_exit_code(isolated_settings, config_file, tmp_path):
    # 既定の lambda = 0 は lambda_1 より下でギャップ (lambda_1, lambda_2) の外
    out = tmp_path / "out"
    code = main.main(["solve", "--mode", "linking", "--config", config_file(), "--out", str(out)])
    assert code == main.EXIT_GEOMETRY
    assert len({main.EXIT_CONFIG, main.EXIT_SOLVER, main.EXIT_CONDITION, main.EXIT_GEOMETRY}) == 4
    failure = json.loads((out / "failure.json").read_text())
    assert "lambda_1" in failure["error"]
    assert failure["sample_index"] is None
    assert not (out / "solution.json").exists()


def test_verify_writes_every_report(isolated_settings, config_file, tmp_path):
    out = tmp_path / "verify"
    assert main.main(["verify", "--config", config_file(), "--out", str(out)]) == main.EXIT_OK
    summary = json.loads((out / "verify.json").read_text())
    names = [entry["name"] for entry in summary["reports"]]
    assert names[-1] == "origin_asymptotics"
    for name in names:
        assert (out / "verify" / f"{name}.json").exists()
        assert pl.read_csv(out / "verify" / f"{name}.csv").columns == ["sample", "lhs", "rhs", "slack"]


@pytest.mark.slow
def test_solve_mountain_pass(isolated_settings, config_file, tmp_path):
    out = tmp_path / "solve"
    assert main.main(["solve", "--config", config_file(), "--out", str(out)]) == main.EXIT_OK
    solution = json.loads((out / "solution.json").read_text())
    assert solution["mode"] == "mountain-pass"
    assert solution["residual"] < 1e-6
    monitor = pl.read_csv(out / "cerami_monitor.csv")
    assert monitor.columns == ["iteration", "phi", "cerami"]
