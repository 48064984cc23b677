import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from hardstop.cli import ConfigError, run, validate_config
from hardstop.stress import load_tabulated_grid

GEOMETRY = {
    "stage": {"d_L_mm": 11.4, "d_S_mm": 4.0, "R_C_mm": 10.18, "theta_o_deg": -0.2,
              "clip_diameter_mm": 29.1},
    "ground": {"d_L_mm": 11.4, "d_S_mm": 4.0, "R_C_mm": 12.129, "theta_o_deg": -9.0},
    "z_ab_mm": 0.6645, "z_oa_mm": 2.0, "z_Lo_mm": 9.0,
    "density_per_mm2": 8.0, "min_points": 4000,
}
BEAM = {"model": "beam", "length_mm": 100.0, "modulus_mpa": 113800.0, "diameter_mm": 4.0,
        "axial_force_n": 1000.0}
SMALL_GRID = {"n_alpha": 16, "n_sep": 2}


def write_config(tmp_path, **blocks):
    cfg = {"schema_version": 1, **blocks}
    p = tmp_path / "run.json"
    p.write_text(json.dumps(cfg))
    return p


def invoke(tmp_path, command, out="out", **blocks):
    cfg = write_config(tmp_path, **blocks)
    code = run([command, "--config", str(cfg), "--out", str(tmp_path / out)])
    return code, tmp_path / out


def read_map(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    d = np.array([float(r["delta_signed_mm"]) for r in rows])
    t = np.array([float(r["theta_signed_deg"]) for r in rows])
    s = np.array([float(r["sigma_mpa"]) for r in rows])
    return d, t, s


# -- config --------------------------------------------------------------------------

def test_schema_error_reports_key_path(tmp_path, capsys):
    code, _ = invoke(tmp_path, "stress-map", stress={"model": "radial", "coeff_mpa": -1})
    assert code == 2
    assert "stress/coeff_mpa" in capsys.readouterr().err


def test_unknown_key_is_rejected():
    with pytest.raises(ConfigError, match="colour"):
        validate_config({"schema_version": 1, "colour": "red"})


def test_wrong_schema_version():
    with pytest.raises(ConfigError, match="schema_version"):
        validate_config({"schema_version": 2})


def test_model_parameters_are_required():
    with pytest.raises(ConfigError, match="coeff_mpa"):
        validate_config({"schema_version": 1, "stress": {"model": "radial"}})


def test_threshold_order_and_grid_multiple():
    with pytest.raises(ConfigError, match="fatigue"):
        validate_config({"schema_version": 1,
                         "thresholds": {"fatigue_mpa": 900, "yield_mpa": 880}})
    with pytest.raises(ConfigError, match="multiple of 4"):
        validate_config({"schema_version": 1, "grid": {"n_alpha": 18}})


def test_missing_config_file(tmp_path, capsys):
    assert run(["evaluate", "--config", str(tmp_path / "none.json")]) == 2
    assert "none.json" in capsys.readouterr().err


def test_missing_trajectory_names_path(tmp_path, capsys):
    code, _ = invoke(tmp_path, "evaluate", geometry=GEOMETRY, stress=BEAM, grid=SMALL_GRID,
                     trajectories=["walk_missing.csv"])
    assert code == 2
    assert "walk_missing.csv" in capsys.readouterr().err


def test_command_without_needed_block(tmp_path, capsys):
    code, _ = invoke(tmp_path, "boundary")
    assert code == 2
    assert "geometry" in capsys.readouterr().err


def test_effective_config_echoes_defaults_and_overrides(tmp_path):
    cfg = write_config(tmp_path, stress={"model": "radial", "coeff_mpa": 100.0},
                       stress_map={"resolution": 5, "seps_deg": [0]})
    out = tmp_path / "o"
    assert run(["stress-map", "--config", str(cfg), "--out", str(out),
                "--grid-alpha", "24"]) == 0
    eff = json.loads((out / "effective_config.json").read_text())
    assert eff["grid"] == {"n_alpha": 24, "n_sep": 7, "delta_ref_mm": 1.0, "theta_ref_deg": 1.0}
    assert eff["thresholds"] == {"fatigue_mpa": 480.0, "yield_mpa": 880.0}
    assert eff["output_dir"] == str(out)


# -- stress maps ----------------------------------------------------------------------

def test_radial_map_is_rotationally_symmetric(tmp_path):
    code, out = invoke(tmp_path, "stress-map", stress={"model": "radial", "coeff_mpa": 100.0},
                       stress_map={"resolution": 21, "seps_deg": [0, 90]})
    assert code == 0
    d, t, s = read_map(out / "heatmap_sep0.csv")
    np.testing.assert_allclose(s, 100.0 * np.hypot(d, t), rtol=1e-8)
    _, _, s90 = read_map(out / "heatmap_sep90.csv")
    np.testing.assert_array_equal(s, s90)


def test_linear_map_has_diamond_contours(tmp_path):
    code, out = invoke(tmp_path, "stress-map",
                       stress={"model": "linear", "r_delta_mpa_per_mm": 100.0,
                               "r_theta_mpa_per_deg": 50.0},
                       stress_map={"resolution": 21, "seps_deg": [30]})
    assert code == 0
    d, t, s = read_map(out / "heatmap_sep30.csv")
    np.testing.assert_allclose(s, 100.0 * np.abs(d) + 50.0 * np.abs(t), rtol=1e-8)


def test_beam_map_is_loaded_harder_in_the_second_and_fourth_quadrants(tmp_path):
    code, out = invoke(tmp_path, "stress-map", stress=BEAM,
                       stress_map={"resolution": 31, "seps_deg": [0, 90]})
    assert code == 0
    d, t, s = read_map(out / "heatmap_sep0.csv")
    q1 = {(x, y): v for x, y, v in zip(d, t, s) if x > 0 and y > 0}
    for (x, y), v in q1.items():
        mirrored = s[(d == -x) & (t == y)][0]
        assert mirrored >= v
    # point symmetry: Q3 equals Q1
    for (x, y), v in q1.items():
        assert s[(d == -x) & (t == -y)][0] == pytest.approx(v, rel=1e-12)
    # at 90 deg separation the coupling vanishes
    d9, t9, s9 = read_map(out / "heatmap_sep90.csv")
    for x, y, v in zip(d9, t9, s9):
        assert s9[(d9 == -x) & (t9 == y)][0] == pytest.approx(v, rel=1e-9)


def test_heatmap_is_a_loadable_table(tmp_path):
    code, out = invoke(tmp_path, "stress-map", stress=BEAM,
                       stress_map={"resolution": 11, "seps_deg": [45]})
    assert code == 0
    table = load_tabulated_grid(out / "heatmap_sep45.csv")
    assert table.plane_stress(math.radians(45), 0.0, 0.0) > 0


# -- evaluation and simulation ---------------------------------------------------------

def test_evaluate_writes_boundaries_and_metrics(tmp_path):
    traj = tmp_path / "walk.csv"
    traj.write_text("cycle_pct,delta_a_mm,theta_a_deg,theta_sep_deg\n0,0,0,0\n50,0.3,0.2,10\n"
                    "100,0,0,0\n")
    code, out = invoke(tmp_path, "evaluate", geometry=GEOMETRY, stress=BEAM, grid=SMALL_GRID,
                       trajectories=["walk.csv"])
    assert code == 0
    for name in ("boundary_hs.csv", "boundary_sigma_fatigue.csv", "boundary_sigma_yield.csv",
                 "metrics.json", "geometry.csv", "effective_config.json"):
        assert (out / name).exists(), name
    m = json.loads((out / "metrics.json").read_text())
    fat, yld = m["metrics"]["fatigue"], m["metrics"]["yield"]
    # the larger yield space leaves a smaller fraction covered
    assert 0 < yld["phi_hs"] < fat["phi_hs"] <= 1
    assert fat["contained"]
    assert m["trajectories"]["walk"]["passed"]
    geo = (out / "geometry.csv").read_text().splitlines()
    assert geo[0] == "parameter,unit,value"
    assert "ground.theta_o,deg,-9" in geo


def test_boundary_runs_are_byte_identical(tmp_path):
    blocks = dict(geometry=GEOMETRY, grid=SMALL_GRID)
    assert invoke(tmp_path, "boundary", out="a", **blocks)[0] == 0
    assert invoke(tmp_path, "boundary", out="b", **blocks)[0] == 0
    for name in ("boundary_hs.csv", "boundary.json", "geometry.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_overlapping_geometry_is_a_validation_failure(tmp_path, capsys):
    geo = dict(GEOMETRY, z_ab_mm=-0.5)
    code, _ = invoke(tmp_path, "boundary", geometry=geo, grid=SMALL_GRID)
    assert code == 3
    assert "overlap" in capsys.readouterr().err


def test_simulate_arms_with_given_boundary(tmp_path):
    hs = tmp_path / "hs.csv"
    hs.write_text("sep_deg,alpha_deg,radius_scaled,unbounded_flag\n" + "".join(
        f"{s},{a},1.5,0\n" for s in (0, 90) for a in range(0, 360, 45)))
    code, out = invoke(tmp_path, "simulate", stress=BEAM, grid={"n_alpha": 8, "n_sep": 2},
                       simulation={"synthetic": {"delta_a_mm": 1.0, "theta_a_deg": 0.5,
                                                 "theta_sep_deg": 20},
                                   "hs_boundary_csv": "hs.csv"})
    assert code == 0
    summary = json.loads((out / "simulation.json").read_text())
    arms = summary["arms"]
    assert arms["normal"]["engaged_steps"] == 0
    assert arms["surge_no_stop"]["engaged_steps"] == 0
    assert arms["surge_with_stop"]["engaged_steps"] > 0
    assert arms["surge_with_stop"]["peak_sigma_mpa"] < arms["surge_no_stop"]["peak_sigma_mpa"]
    assert arms["surge_with_stop"]["peak_sigma_mpa"] <= summary["boundary_peak_sigma_mpa"]
    assert len(arms["surge_with_stop"]["engagement_intervals_pct"]) == 1
    for arm in arms:
        assert len((out / f"engagement_{arm}.csv").read_text().splitlines()) == 62


def test_simulate_needs_a_trajectory(tmp_path, capsys):
    code, _ = invoke(tmp_path, "simulate", stress=BEAM, simulation={})
    assert code == 2
    assert "trajectory" in capsys.readouterr().err


# -- optimisation ----------------------------------------------------------------------

def test_optimize_improves_reference_design(tmp_path):
    code, out = invoke(tmp_path, "optimize", geometry=GEOMETRY, stress=BEAM, grid=SMALL_GRID,
                       optimization={"variables": {"z_ab": [0.55, 0.9]},
                                     "max_evals": 6, "min_points": 4000})
    assert code == 0
    res = json.loads((out / "optimization.json").read_text())
    assert res["objective"] >= res["start_objectives"][0]
    assert res["feasible"]
    assert 0.55 <= res["params"]["z_ab"] <= 0.9
    assert (out / "geometry_optimized.csv").exists()
    assert (out / "boundary_hs_optimized.csv").exists()


def test_optimize_rejects_unknown_variable(tmp_path, capsys):
    code, _ = invoke(tmp_path, "optimize", geometry=GEOMETRY, stress=BEAM, grid=SMALL_GRID,
                     optimization={"variables": {"stage.bogus": [0, 1]}})
    assert code in (2, 3)
    assert "bogus" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, stress={"model": "radial", "coeff_mpa": 1.0},
                       stress_map={"resolution": 3, "seps_deg": [0]})
    proc = subprocess.run([sys.executable, "-m", "hardstop", "stress-map", "--config", str(cfg),
                           "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "m" / "heatmap_sep0.csv").exists()
