"""Command line: subcommands, exit codes, CSV schema, diagnostics."""

import csv
import io
import json
import math
import pathlib

import pytest

import uvnlos
from uvnlos import parse_scenario, apply_sweep_value
from uvnlos.cli import EXIT_EMPTY, EXIT_IO, EXIT_OK, EXIT_VALIDATION, \
    MissingColumnError, _evaluate_model, compare_rmse, main

DATA_DIR = pathlib.Path(uvnlos.__file__).parent / "data"


def small_scenario(extra=None):
    raw = {
        "geometry": {
            "beta_t_rad": 0.3490658503988659,
            "beta_r_rad": 0.3490658503988659,
            "theta_t_rad": 0.7853981633974483,
            "theta_r_rad": 0.7853981633974483,
            "alpha_t_rad": 1.658062789394613,
            "alpha_r_rad": -1.658062789394613,
            "range_m": 100.0,
            "aperture_cm2": 1.92,
        },
        "atmosphere": {
            "ks_ray_per_km": 0.24, "ks_mie_per_km": 0.25,
            "ka_per_km": 0.9, "gamma": 0.017, "g": 0.72, "f": 0.5,
        },
        "models": {"scatter_grid": {"n_theta": 16, "n_varpi": 16,
                                    "n_tau": 16}},
    }
    if extra:
        raw.update(extra)
    return raw


def walled_scenario():
    # the coupled-obstacle benchmark file, turned down to a coarse grid
    raw = json.loads((DATA_DIR / "table7_scenario1.json").read_text())
    raw["models"] = {"scatter_grid": {"n_theta": 16, "n_varpi": 16,
                                      "n_tau": 16}}
    return raw


def write(tmp_path, raw, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


# ---------------------------------------------------------------------------
# run


def test_run_prints_json_with_the_embedded_scenario(tmp_path, capsys):
    raw = walled_scenario()
    path = write(tmp_path, raw)
    rc = main(["run", path, "--models", "exact"])
    out, err = capsys.readouterr()
    assert rc == EXIT_OK
    payload = json.loads(out)
    assert payload["schema"] == "uvnlos-run-v1"
    assert payload["scenario"] == raw
    rec = payload["models"]["exact"]
    assert rec["pathloss_db"] > 0.0
    assert rec["q_r_j"] > 0.0
    assert not rec["empty_overlap"]
    # human summary goes to stderr
    assert err.splitlines()[0].startswith("model")
    assert "exact" in err


def test_run_default_models_follow_the_obstacle(tmp_path, capsys):
    path = write(tmp_path, walled_scenario())
    rc = main(["run", path])
    out, _ = capsys.readouterr()
    assert rc == EXIT_OK
    payload = json.loads(out)
    assert list(payload["models"]) == ["exact", "obstacle", "reflection",
                                       "total"]
    q_sca = payload["models"]["obstacle"]["q_r_j"]
    q_ref = payload["models"]["reflection"]["q_r_j"]
    assert payload["models"]["total"]["q_r_j"] == pytest.approx(
        q_sca + q_ref, rel=1e-12)


def test_run_table_output_mode(tmp_path, capsys):
    path = write(tmp_path, small_scenario())
    rc = main(["run", path, "--out", "table"])
    out, _ = capsys.readouterr()
    assert rc == EXIT_OK
    assert out.splitlines()[0].startswith("model")
    with pytest.raises(json.JSONDecodeError):
        json.loads(out)


def test_run_reports_geometry_violations(tmp_path, capsys):
    raw = small_scenario()
    raw["geometry"]["theta_t_rad"] = 0.1
    rc = main(["run", write(tmp_path, raw)])
    _, err = capsys.readouterr()
    assert rc == EXIT_VALIDATION
    assert err.startswith("error: geometry: ")
    assert "delta_t_low" in err


def test_run_reports_unknown_keys(tmp_path, capsys):
    raw = small_scenario()
    raw["surprise"] = 1
    rc = main(["run", write(tmp_path, raw)])
    _, err = capsys.readouterr()
    assert rc == EXIT_VALIDATION
    assert err.startswith("error: surprise: unknown key")


def test_run_missing_file_is_an_io_failure(tmp_path, capsys):
    rc = main(["run", str(tmp_path / "nope.json")])
    _, err = capsys.readouterr()
    assert rc == EXIT_IO
    assert err.startswith("error: ")


def test_run_disjoint_cones_exit_empty(tmp_path, capsys):
    raw = small_scenario()
    raw["geometry"].update(beta_t_rad=0.05, beta_r_rad=0.1,
                           theta_t_rad=0.1, theta_r_rad=1.45,
                           alpha_t_rad=math.pi - 0.05,
                           alpha_r_rad=-math.pi / 2,
                           strict_pointing=False)
    rc = main(["run", write(tmp_path, raw)])
    out, err = capsys.readouterr()
    assert rc == EXIT_EMPTY
    payload = json.loads(out)
    assert payload["models"]["exact"]["pathloss_db"] is None
    assert payload["models"]["exact"]["empty_overlap"]
    assert "no requested model received any energy" in err


def test_run_obstacle_models_need_an_obstacle(tmp_path, capsys):
    rc = main(["run", write(tmp_path, small_scenario()), "--models",
               "total"])
    _, err = capsys.readouterr()
    assert rc == EXIT_VALIDATION
    assert "requires the scenario to define an obstacle" in err


# ---------------------------------------------------------------------------
# sweep


def read_csv(path):
    text = pathlib.Path(path).read_text()
    lines = text.splitlines()
    assert lines[0] == "# uvnlos-sweep-v1"
    rows = list(csv.reader(io.StringIO("\n".join(lines[1:]))))
    return text, rows[0], rows[1:]


def test_sweep_cells_reproduce_in_process_values(tmp_path, capsys):
    raw = walled_scenario()
    path = write(tmp_path, raw)
    out_csv = str(tmp_path / "sweep.csv")
    rc = main(["sweep", path, "--var", "range_r", "--values", "50,100",
               "--models", "exact,total", "--out", out_csv])
    capsys.readouterr()
    assert rc == EXIT_OK
    _, header, rows = read_csv(out_csv)
    assert header == ["range_r", "exact_db", "exact_q_j", "total_db",
                      "total_q_j", "error"]
    assert [r[0] for r in rows] == ["50.0", "100.0"]
    for value, row in zip((50.0, 100.0), rows):
        sc = parse_scenario(apply_sweep_value(raw, "range_r", value))
        exact = _evaluate_model("exact", sc)
        total = _evaluate_model("total", sc)
        assert row[1] == repr(exact["pathloss_db"])
        assert row[2] == repr(exact["q_r_j"])
        assert row[3] == repr(total["pathloss_db"])
        assert row[4] == repr(total["q_r_j"])
        assert row[5] == ""


def test_sweep_defaults_come_from_the_file_block(tmp_path, capsys):
    raw = walled_scenario()
    raw["sweep"] = {"variable": "range_r", "values": [80.0, 120.0],
                    "models": ["exact"]}
    rc = main(["sweep", write(tmp_path, raw)])
    out, _ = capsys.readouterr()
    assert rc == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "# uvnlos-sweep-v1"
    assert lines[1].split(",")[0] == "range_r"
    assert [ln.split(",")[0] for ln in lines[2:]] == ["80.0", "120.0"]


def test_sweep_runs_are_byte_identical(tmp_path, capsys):
    path = write(tmp_path, walled_scenario())
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    for out in (a, b):
        rc = main(["sweep", path, "--var", "range_r", "--values",
                   "60,90", "--models", "exact", "--out", out])
        assert rc == EXIT_OK
    capsys.readouterr()
    assert pathlib.Path(a).read_bytes() == pathlib.Path(b).read_bytes()


def test_sweep_colon_range_values(tmp_path, capsys):
    path = write(tmp_path, small_scenario())
    rc = main(["sweep", path, "--var", "range_r", "--values", "40:200:80",
               "--models", "exact"])
    out, _ = capsys.readouterr()
    assert rc == EXIT_OK
    rows = out.splitlines()[2:]
    assert [r.split(",")[0] for r in rows] == ["40.0", "120.0", "200.0"]


def test_sweep_aliases_map_to_canonical_columns(tmp_path, capsys):
    path = write(tmp_path, walled_scenario())
    rc = main(["sweep", path, "--var", "range_r", "--values", "100",
               "--models", "exact+obstacle,exact+obstacle+reflection"])
    out, _ = capsys.readouterr()
    assert rc == EXIT_OK
    header = out.splitlines()[1].split(",")
    assert header == ["range_r", "obstacle_db", "obstacle_q_j", "total_db",
                      "total_q_j", "error"]


def test_sweep_single_value_agrees_with_run(tmp_path, capsys):
    path = write(tmp_path, walled_scenario())
    rc = main(["sweep", path, "--var", "range_r", "--values", "100",
               "--models", "exact"])
    sweep_out, _ = capsys.readouterr()
    assert rc == EXIT_OK
    cell = sweep_out.splitlines()[2].split(",")[1]
    rc = main(["run", path, "--models", "exact"])
    run_out, _ = capsys.readouterr()
    assert rc == EXIT_OK
    payload = json.loads(run_out)
    assert cell == repr(payload["models"]["exact"]["pathloss_db"])


def test_sweep_mcpt_gains_a_stderr_column(tmp_path, capsys):
    raw = walled_scenario()
    raw["models"]["mcpt"] = {"n_photons": 50_000, "rng_seed": 21}
    path = write(tmp_path, raw)
    rc = main(["sweep", path, "--var", "range_r", "--values", "100",
               "--models", "mcpt"])
    out, _ = capsys.readouterr()
    assert rc == EXIT_OK
    header = out.splitlines()[1].split(",")
    assert header == ["range_r", "mcpt_db", "mcpt_q_j", "mcpt_stderr_db",
                      "error"]
    row = out.splitlines()[2].split(",")
    rec = _evaluate_model("mcpt", parse_scenario(raw))
    assert row[1] == repr(rec["pathloss_db"])
    assert row[2] == repr(rec["q_r_j"])
    assert row[3] == repr(rec["stderr_db"])


def test_sweep_obstacle_variable_needs_an_obstacle(tmp_path, capsys):
    path = write(tmp_path, small_scenario())
    rc = main(["sweep", path, "--var", "alpha", "--values", "0",
               "--models", "exact"])
    _, err = capsys.readouterr()
    assert rc == EXIT_VALIDATION
    assert "requires the scenario to define an obstacle" in err


def test_sweep_marks_dead_rows_with_a_sentinel(tmp_path, capsys):
    raw = small_scenario()
    raw["geometry"].update(beta_t_rad=0.05, beta_r_rad=0.1,
                           theta_t_rad=0.1, theta_r_rad=1.45,
                           alpha_t_rad=math.pi - 0.05,
                           alpha_r_rad=-math.pi / 2,
                           strict_pointing=False)
    path = write(tmp_path, raw)
    out_csv = str(tmp_path / "dead.csv")
    rc = main(["sweep", path, "--var", "range_r", "--values", "80,120",
               "--models", "exact", "--out", out_csv])
    capsys.readouterr()
    assert rc == EXIT_OK
    _, header, rows = read_csv(out_csv)
    for row in rows:
        assert row[header.index("error")] == "exact:empty_overlap"
        assert row[header.index("exact_db")] == ""
    # sentinel rows poison an RMSE comparison
    rc = main(["rmse", out_csv, "--a", "exact_db", "--b", "exact_db"])
    _, err = capsys.readouterr()
    assert rc == EXIT_VALIDATION
    assert "error sentinel" in err


# ---------------------------------------------------------------------------
# rmse


def make_csv(tmp_path, rows, name="cmp.csv"):
    path = tmp_path / name
    with open(path, "w", newline="") as fh:
        fh.write("# uvnlos-sweep-v1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["range_r", "exact_db", "simplified_db", "error"])
        w.writerows(rows)
    return str(path)


def test_rmse_of_identical_columns_is_zero(tmp_path, capsys):
    path = make_csv(tmp_path, [["50.0", "101.25", "101.25", ""],
                               ["100.0", "104.5", "104.5", ""]])
    rc = main(["rmse", path, "--a", "exact_db", "--b", "simplified_db"])
    out, err = capsys.readouterr()
    assert rc == EXIT_OK
    assert out.strip() == "0.0"
    assert "rmse(exact_db, simplified_db)" in err


def test_rmse_of_a_constant_offset(tmp_path, capsys):
    rows = [[repr(float(r)), repr(100.0 + r / 10.0),
             repr(100.5 + r / 10.0), ""] for r in (50, 100, 150)]
    path = make_csv(tmp_path, rows)
    rc = main(["rmse", path, "--a", "exact_db", "--b", "simplified_db"])
    out, _ = capsys.readouterr()
    assert rc == EXIT_OK
    assert float(out) == pytest.approx(0.5, abs=1e-12)


def test_rmse_missing_column(tmp_path, capsys):
    path = make_csv(tmp_path, [["50.0", "101.0", "101.0", ""]])
    with pytest.raises(MissingColumnError):
        compare_rmse(path, "exact_db", "total_db")
    rc = main(["rmse", path, "--a", "exact_db", "--b", "total_db"])
    _, err = capsys.readouterr()
    assert rc == EXIT_VALIDATION
    assert "missing column 'total_db'" in err
    assert "available:" in err


def test_rmse_rejects_empty_cells(tmp_path, capsys):
    path = make_csv(tmp_path, [["50.0", "101.0", "", ""]])
    rc = main(["rmse", path, "--a", "exact_db", "--b", "simplified_db"])
    _, err = capsys.readouterr()
    assert rc == EXIT_VALIDATION
    assert "empty cell" in err
