import csv
import json

import pytest

from fermirg.pipeline import main

SMALL = {"lattice": {"L": 2, "T": 2}}


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def read_report(out, mode):
    return json.loads((out / f"{mode}.json").read_text(encoding="utf-8"))


# ---------- config errors ----------
def test_bad_config_exits_with_field_path(tmp_path, capsys):
    cfg = write_config(tmp_path, {"dispersion": {"mu": -1.0}})
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path / "out")]) == 2
    assert "dispersion.mu" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_missing_config_exits_2(tmp_path, capsys):
    assert main(["verify", "--config", str(tmp_path / "absent.json")]) == 2
    assert "not found" in capsys.readouterr().err


def test_unknown_suite_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, {**SMALL, "checks": {"suites": ["nope"]}})
    assert main(["verify", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "checks.suites" in capsys.readouterr().err


def test_bad_flag_value_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL)
    assert main(["bounds", "--config", cfg, "--epsilon", "-1", "--out", str(tmp_path)]) == 2
    assert "run.epsilon" in capsys.readouterr().err


# ---------- modes ----------
def test_scaling_csv_tables(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "out"
    code = main(["scaling", "--config", cfg, "--out", str(out), "--format", "csv", "--lambdas", "0.001,0.01,0.1"])
    assert code == 0
    report = read_report(out, "scaling")
    assert report["manifest"]["mode"] == "scaling"
    assert sorted(report["scaling"]["slopes"]) == ["G2-K", "G4-V0", "G6"]
    assert report["scaling"]["slope_fixed_by_truncation"] is True
    with open(out / "scaling_norms.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert {row["channel"] for row in rows} == {"G2-K", "G4-V0", "G6"}
    assert len(rows) == 9
    assert (out / "scaling_timing.json").exists()


def test_reports_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "out"
    args = ["greens", "--config", cfg, "--out", str(out), "--seed", "7"]
    assert main(args) == 0
    first = (out / "greens.json").read_bytes()
    assert main(args) == 0
    assert (out / "greens.json").read_bytes() == first


def test_library_errors_exit_1_with_a_report(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main(["scaling", "--config", cfg, "--out", str(out), "--lambdas", "0.1"]) == 1
    report = read_report(out, "scaling")
    assert report["error"].startswith("NumericError")
    assert report["manifest"]["mode"] == "scaling"


def test_bounds_echoes_epsilon(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main(["bounds", "--config", cfg, "--out", str(out), "--epsilon", "0.5"]) == 0
    bounds = read_report(out, "bounds")["bounds"]
    assert bounds["epsilon"] == 0.5
    assert bounds["smallness"]["epsilon"] == 0.5
    assert bounds["g"] > 0
    assert bounds["counterterm"] is None


def test_bounds_expand_a_configured_counterterm(tmp_path):
    cfg = write_config(tmp_path, {**SMALL, "counterterm": {"type": "constant", "params": [0.2], "n_max": 20}})
    out = tmp_path / "out"
    assert main(["bounds", "--config", cfg, "--out", str(out)]) == 0
    report = read_report(out, "bounds")
    series = report["bounds"]["counterterm"]
    assert series["ratio"] == pytest.approx(0.2)
    assert len(series["errors"]) == 21
    assert series["errors"][-1] <= 1e-10
    assert report["model"]["spec"]["counterterm"]["kind"] == "constant"


def test_verify_lists_unselected_suites(tmp_path):
    cfg = write_config(tmp_path, {**SMALL, "checks": {"suites": ["norm_domain"]}})
    out = tmp_path / "out"
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
    report = read_report(out, "verify")
    assert [s["suite"] for s in report["suites"]] == ["norm_domain"]
    assert "insulator" in {s["suite"] for s in report["skipped_suites"]}
    assert report["passed"] is True


@pytest.mark.slow
def test_verify_on_desk_defaults(tmp_path):
    assert main(["verify", "--out", str(tmp_path)]) == 0
    assert read_report(tmp_path, "verify")["passed"] is True
