"""Command-line front end.

Runs are driven by a JSON config file carrying ``schema_version``.  Unknown
keys are rejected.  External units are mm, deg, MPa and N; conversion to
radians happens here and nowhere else.  Every run writes the effective config
(after defaults and flag overrides) to ``effective_config.json`` in the
output directory.

Exit codes: 0 success, 2 config error, 3 infeasible or invalid input,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .contact import ContactAnalysis, ZeroClearanceError
from .engage import (apply_surge, boundary_peak_stress, engagement_intervals,
                     simulate_engagement, simulate_free, synthetic_trajectory, write_engagement_csv,
                     SimulationError)
from .fields import DirectionGrid, FieldError, RadialBoundaryField, UnboundedVolumeError, fmt
from .geometry import GeometryError, HardStopPair, TorusCapProfile
from .optimizer import (DesignVariables, HardStopBuilder, OptimizationProblem,
                        OptimizationSetupError, StressTarget, evaluate, optimize)
from .spaces import space_metrics, trajectory_containment
from .stress import (CantileverBeam, LinearSuperposition, Radial, StressModelError,
                     StressThresholds, load_tabulated_grid, safe_boundary_field, write_table)
from .trajectory import Trajectory, TrajectoryError, read_trajectory

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class InfeasibleError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer", "minimum": 1}

_PROFILE = _obj({"d_L_mm": _POS, "d_S_mm": _POS, "R_C_mm": _POS, "theta_o_deg": _NUM,
                 "clip_diameter_mm": {"type": ["number", "null"], "exclusiveMinimum": 0}},
                ("d_L_mm", "d_S_mm", "R_C_mm"))

_GRID = _obj({"n_alpha": {"type": "integer", "minimum": 8}, "n_sep": _INT,
              "delta_ref_mm": _POS, "theta_ref_deg": _POS})

SCHEMA = _obj({
    "schema_version": {"const": SCHEMA_VERSION},
    "output_dir": {"type": "string"},
    "geometry": _obj({
        "stage": _PROFILE, "ground": _PROFILE, "z_ab_mm": _NUM, "z_oa_mm": _NUM,
        "z_Lo_mm": _NUM, "density_per_mm2": _POS, "min_points": _INT, "tol": _POS,
    }, ("stage", "ground", "z_ab_mm", "z_oa_mm")),
    "stress": _obj({
        "model": {"enum": ["linear", "radial", "beam", "tabulated"]},
        "r_delta_mpa_per_mm": _POS, "r_theta_mpa_per_deg": _POS,
        "coeff_mpa": _POS,
        "length_mm": _POS, "modulus_mpa": _POS, "diameter_mm": _POS, "axial_force_n": _NUM,
        "table": {"type": "string"},
    }, ("model",)),
    "thresholds": _obj({"fatigue_mpa": _POS, "yield_mpa": _POS}),
    "grid": _GRID,
    "delta_z_mm": _NUM,
    "trajectories": {"type": "array", "items": {"type": "string"}},
    "stress_map": _obj({
        "seps_deg": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 90},
                     "minItems": 1},
        "delta_max_mm": _POS, "theta_max_deg": _POS,
        "resolution": {"type": "integer", "minimum": 3},
    }),
    "optimization": _obj({
        "variables": {"type": "object", "minProperties": 1,
                      "additionalProperties": {"type": "array", "items": _NUM,
                                               "minItems": 2, "maxItems": 2}},
        "targets": {"type": "array", "minItems": 1, "items": _obj({
            "threshold": {"enum": ["fatigue", "yield"]},
            "role": {"enum": ["must-contain-hs", "reference"]}}, ("threshold",))},
        "penalty_weight": _POS, "max_evals": _INT,
        "seeds": {"type": "array", "items": {"type": "integer"}},
        "start_from_geometry": {"type": "boolean"},
        "search_grid": _GRID, "min_points": _INT, "min_step": _POS,
        "unprotected_cap": _POS,
    }, ("variables",)),
    "simulation": _obj({
        "trajectory": {"type": "string"},
        "synthetic": _obj({"delta_a_mm": {"type": "number", "minimum": 0},
                           "theta_a_deg": {"type": "number", "minimum": 0},
                           "theta_sep_deg": {"type": "number", "minimum": 0, "maximum": 180},
                           "steps": {"type": "integer", "minimum": 3}}),
        "peak_multiplier": {"type": "number", "minimum": 1},
        "width_steps": _POS, "center_pct": {"type": "number", "minimum": 0, "maximum": 100},
        "threshold": {"enum": ["fatigue", "yield"]},
        "hs_boundary_csv": {"type": "string"},
    }),
}, ("schema_version",))

DEFAULTS = {
    "output_dir": "out",
    "geometry": {"z_Lo_mm": 9.0, "density_per_mm2": 64.0, "min_points": 50000, "tol": 1e-4},
    "profile": {"theta_o_deg": 0.0, "clip_diameter_mm": None},
    "thresholds": {"fatigue_mpa": 480.0, "yield_mpa": 880.0},
    "grid": {"n_alpha": 72, "n_sep": 7, "delta_ref_mm": 1.0, "theta_ref_deg": 1.0},
    "delta_z_mm": 0.0,
    "trajectories": [],
    "stress_map": {"seps_deg": [0, 30, 60, 90], "delta_max_mm": 3.0, "theta_max_deg": 6.0,
                   "resolution": 61},
    "optimization": {"targets": [{"threshold": "fatigue", "role": "must-contain-hs"}],
                     "penalty_weight": 10.0, "max_evals": 60, "seeds": [],
                     "start_from_geometry": True, "min_points": 20000, "min_step": 1e-3,
                     "unprotected_cap": 1e-3},
    "simulation": {"peak_multiplier": 3.0, "width_steps": 13.0, "center_pct": 50.0,
                   "threshold": "fatigue"},
}


def _error_path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return validate_config(raw)


def validate_config(raw: dict) -> dict:
    """Schema-check ``raw`` and return a copy with defaults filled in."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(f"{_error_path(e)}: {e.message}" for e in errors))
    cfg = copy.deepcopy(raw)
    cfg.setdefault("output_dir", DEFAULTS["output_dir"])
    cfg.setdefault("delta_z_mm", DEFAULTS["delta_z_mm"])
    cfg.setdefault("trajectories", [])
    for key in ("thresholds", "grid", "stress_map"):
        cfg[key] = {**DEFAULTS[key], **cfg.get(key, {})}
    if "geometry" in cfg:
        g = cfg["geometry"] = {**DEFAULTS["geometry"], **cfg["geometry"]}
        for part in ("stage", "ground"):
            g[part] = {**DEFAULTS["profile"], **g[part]}
    for key in ("optimization", "simulation"):
        if key in cfg:
            cfg[key] = {**DEFAULTS[key], **cfg[key]}
    t = cfg["thresholds"]
    if not t["fatigue_mpa"] <= t["yield_mpa"]:
        raise ConfigError("thresholds: fatigue_mpa must not exceed yield_mpa")
    if cfg["grid"]["n_alpha"] % 4:
        raise ConfigError("grid/n_alpha: must be a multiple of 4")
    _check_stress_block(cfg.get("stress"))
    return cfg


_MODEL_KEYS = {
    "linear": ("r_delta_mpa_per_mm", "r_theta_mpa_per_deg"),
    "radial": ("coeff_mpa",),
    "beam": ("length_mm", "modulus_mpa", "diameter_mm"),
    "tabulated": ("table",),
}


def _check_stress_block(block):
    if block is None:
        return
    need = _MODEL_KEYS[block["model"]]
    missing = [k for k in need if k not in block]
    if missing:
        raise ConfigError(f"stress: model {block['model']} needs {', '.join(missing)}")


# ---------------------------------------------------------------------------
# builders (all unit conversion happens here)
# ---------------------------------------------------------------------------

def build_grid(cfg: dict, key: str = "grid") -> DirectionGrid:
    g = {**DEFAULTS["grid"], **cfg[key]}
    return DirectionGrid(g["n_alpha"], g["n_sep"], g["delta_ref_mm"],
                         math.radians(g["theta_ref_deg"]))


def _profile(p: dict) -> dict:
    return {"d_L": p["d_L_mm"], "d_S": p["d_S_mm"], "R_C": p["R_C_mm"],
            "theta_o": math.radians(p["theta_o_deg"]), "clip_diameter": p["clip_diameter_mm"]}


def geometry_base(cfg: dict) -> dict:
    g = _require(cfg, "geometry")
    return {"stage": _profile(g["stage"]), "ground": _profile(g["ground"]),
            "z_ab": g["z_ab_mm"], "z_oa": g["z_oa_mm"], "z_Lo": g["z_Lo_mm"]}


def build_pair(cfg: dict) -> HardStopPair:
    b = geometry_base(cfg)
    return HardStopPair(TorusCapProfile(**b["stage"]), TorusCapProfile(**b["ground"]),
                        b["z_ab"], b["z_oa"], b["z_Lo"])


def build_model(cfg: dict, base: Path | None = None):
    s = _require(cfg, "stress")
    kind = s["model"]
    if kind == "linear":
        return LinearSuperposition(s["r_delta_mpa_per_mm"],
                                   s["r_theta_mpa_per_deg"] * 180.0 / math.pi)
    if kind == "radial":
        g = build_grid(cfg)
        return Radial(s["coeff_mpa"], g.delta_ref, g.theta_ref)
    if kind == "beam":
        return CantileverBeam(s["length_mm"], s["modulus_mpa"], s["diameter_mm"],
                              s.get("axial_force_n", 0.0))
    path = _resolve(s["table"], base)
    try:
        return load_tabulated_grid(path, s.get("axial_force_n"))
    except FileNotFoundError as exc:
        raise ConfigError(f"stress table not found: {path}") from exc


def thresholds(cfg: dict) -> StressThresholds:
    t = cfg["thresholds"]
    return StressThresholds(t["fatigue_mpa"], t["yield_mpa"])


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"{key}: block required by this command")
    return cfg[key]


def _resolve(p: str, base: Path | None) -> Path:
    path = Path(p)
    if not path.is_absolute() and base is not None:
        path = base / path
    return path


def _trajectories(cfg: dict, base: Path | None) -> list[Trajectory]:
    return [read_trajectory(_resolve(p, base), label=Path(p).stem) for p in cfg["trajectories"]]


def _analysis(cfg: dict) -> ContactAnalysis:
    g = _require(cfg, "geometry")
    return ContactAnalysis(build_pair(cfg), density=g["density_per_mm2"],
                           min_points=g["min_points"])


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _clean(x):
    """JSON-ready copy with floats rounded to 9 significant digits."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
        return float(fmt(x))
    return x


def write_json(path: Path, data) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_geometry_echo(path: Path, base: dict) -> None:
    """Parameter listing in the layout of a design table (mm, deg)."""
    rows = []
    for part in ("stage", "ground"):
        p = base[part]
        rows += [(f"{part}.d_L", "mm", p["d_L"]), (f"{part}.d_S", "mm", p["d_S"]),
                 (f"{part}.R_C", "mm", p["R_C"]),
                 (f"{part}.theta_o", "deg", math.degrees(p["theta_o"])),
                 (f"{part}.clip_diameter", "mm",
                  math.inf if p["clip_diameter"] is None else p["clip_diameter"])]
    rows += [("z_ab", "mm", base["z_ab"]), ("z_oa", "mm", base["z_oa"]),
             ("z_Lo", "mm", base["z_Lo"])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("parameter", "unit", "value"))
        for name, unit, v in rows:
            w.writerow((name, unit, fmt(v)))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_stress_map(cfg: dict, out: Path, base: Path | None = None) -> dict:
    model = build_model(cfg, base)
    sm = cfg["stress_map"]
    n = sm["resolution"]
    deltas = np.linspace(-sm["delta_max_mm"], sm["delta_max_mm"], n)
    thetas = np.radians(np.linspace(-sm["theta_max_deg"], sm["theta_max_deg"], n))
    files = []
    for s in sm["seps_deg"]:
        name = f"heatmap_sep{fmt(s).replace('.', 'p')}.csv"
        write_table(out / name, model, [math.radians(s)], deltas, thetas)
        files.append(name)
    summary = {"files": files, "resolution": n}
    write_json(out / "stress_map.json", summary)
    return summary


def _hs_field(cfg: dict, grid: DirectionGrid) -> RadialBoundaryField:
    return _analysis(cfg).boundary_field(grid, cfg["delta_z_mm"],
                                         tol=cfg["geometry"]["tol"])


def cmd_boundary(cfg: dict, out: Path, base: Path | None = None) -> dict:
    grid = build_grid(cfg)
    hs = _hs_field(cfg, grid)
    hs.to_csv(out / "boundary_hs.csv")
    write_geometry_echo(out / "geometry.csv", geometry_base(cfg))
    summary = {"grid": grid.to_dict(), "nominal_gap_mm": build_pair(cfg).nominal_gap(),
               "max_radius": float(np.max(hs.radii)), "min_radius": float(np.min(hs.radii)),
               "warnings": hs.warnings}
    write_json(out / "boundary.json", summary)
    return summary


def cmd_evaluate(cfg: dict, out: Path, base: Path | None = None) -> dict:
    grid = build_grid(cfg)
    model = build_model(cfg, base)
    trajs = _trajectories(cfg, base)
    hs = _hs_field(cfg, grid)
    hs.to_csv(out / "boundary_hs.csv")
    report = {"grid": grid.to_dict(), "metrics": {}, "trajectories": {}}
    for name, sigma_cr in thresholds(cfg).as_dict().items():
        sig = safe_boundary_field(model, sigma_cr, grid, cfg["delta_z_mm"], label=name)
        sig.to_csv(out / f"boundary_sigma_{name}.csv")
        report["metrics"][name] = {"sigma_cr_mpa": sigma_cr, **space_metrics(hs, sig).to_dict()}
    for t in trajs:
        rep = trajectory_containment(hs, t)
        report["trajectories"][t.label] = {"min_margin": rep.min_margin,
                                           "violations": rep.violations, "passed": rep.passed}
    write_json(out / "metrics.json", report)
    write_geometry_echo(out / "geometry.csv", geometry_base(cfg))
    return report


def build_problem(cfg: dict, base: Path | None = None) -> OptimizationProblem:
    o = _require(cfg, "optimization")
    gbase = geometry_base(cfg)
    model = build_model(cfg, base)
    limits = thresholds(cfg).as_dict()
    bounds = {}
    for name, (lo, hi) in o["variables"].items():
        if name.endswith(".theta_o"):
            lo, hi = math.radians(lo), math.radians(hi)
        bounds[name] = (lo, hi)
    variables = DesignVariables.from_bounds(bounds)
    targets = [StressTarget(t["threshold"], limits[t["threshold"]], model=model,
                            role=t.get("role", "must-contain-hs")) for t in o["targets"]]
    geo = cfg["geometry"]
    builder = HardStopBuilder(gbase, geo["density_per_mm2"], o["min_points"], geo["tol"],
                              cfg["delta_z_mm"])
    builder.check_names(variables.names)
    starts = []
    if o["start_from_geometry"]:
        start = {}
        for name in variables.names:
            part, _, key = name.partition(".")
            start[name] = gbase[part][key] if key else gbase[name]
            if start[name] is None:
                raise ConfigError(f"optimization/variables/{name}: no start value in geometry")
        starts.append(start)
    full = build_grid(cfg)
    search = build_grid(o, "search_grid") if "search_grid" in o else full
    return OptimizationProblem(variables, targets, builder, search, full,
                               _trajectories(cfg, base), o["penalty_weight"], o["max_evals"],
                               starts, list(o["seeds"]), o["min_step"], o["unprotected_cap"])


def cmd_optimize(cfg: dict, out: Path, base: Path | None = None) -> dict:
    problem = build_problem(cfg, base)
    result = optimize(problem)
    check = evaluate(problem.variables.vector(result.params), problem)
    if abs(check.objective - result.objective) > 1e-6:
        raise ArithmeticError(f"recomputed objective {check.objective!r} differs from "
                              f"search value {result.objective!r}")
    data = result.to_dict()
    data["params"] = {k: math.degrees(v) if k.endswith(".theta_o") else v
                      for k, v in result.params.items()}
    write_json(out / "optimization.json", data)
    geo = geometry_base(cfg)
    best = problem.build_hs.pair(result.params)
    for part, prof in (("stage", best.stage), ("ground", best.ground)):
        geo[part] = {"d_L": prof.d_L, "d_S": prof.d_S, "R_C": prof.R_C,
                     "theta_o": prof.theta_o, "clip_diameter": prof.clip_diameter}
    geo.update(z_ab=best.z_ab, z_oa=best.z_oa, z_Lo=best.z_Lo)
    write_geometry_echo(out / "geometry_optimized.csv", geo)
    if result.final_evaluation.hs is not None:
        result.final_evaluation.hs.to_csv(out / "boundary_hs_optimized.csv")
    if not result.feasible:
        raise InfeasibleError("optimized design is infeasible: " + json.dumps(_clean({
            "contained": result.contained, "trajectories_ok": result.trajectories_ok,
            "reason": result.final_evaluation.reason})))
    return data


def cmd_simulate(cfg: dict, out: Path, base: Path | None = None) -> dict:
    sim = _require(cfg, "simulation")
    model = build_model(cfg, base)
    sigma_cr = thresholds(cfg).as_dict()[sim["threshold"]]
    if "trajectory" in sim:
        traj = read_trajectory(_resolve(sim["trajectory"], base), label="normal")
    elif "synthetic" in sim:
        syn = sim["synthetic"]
        traj = synthetic_trajectory(syn.get("delta_a_mm", 0.0),
                                    math.radians(syn.get("theta_a_deg", 0.0)),
                                    math.radians(syn.get("theta_sep_deg", 0.0)),
                                    syn.get("steps", 61), "normal")
    else:
        raise ConfigError("simulation: give trajectory or synthetic")
    grid = build_grid(cfg)
    if "hs_boundary_csv" in sim:
        hs = RadialBoundaryField.from_csv(_resolve(sim["hs_boundary_csv"], base),
                                          grid.delta_ref, grid.theta_ref)
    else:
        hs = _hs_field(cfg, grid)
    surge = apply_surge(traj, sim["peak_multiplier"], sim["width_steps"], sim["center_pct"])
    arms = {"normal": simulate_engagement(hs, model, traj),
            "surge_no_stop": simulate_free(model, surge),
            "surge_with_stop": simulate_engagement(hs, model, surge)}
    summary = {"sigma_cr_mpa": sigma_cr,
               "boundary_peak_sigma_mpa": boundary_peak_stress(hs, model), "arms": {}}
    for name, recs in arms.items():
        sig = [r.sigma_clamped for r in recs]
        peak = int(np.argmax(sig))
        summary["arms"][name] = {
            "peak_sigma_mpa": sig[peak], "peak_cycle_pct": recs[peak].cycle_pct,
            "engaged_steps": sum(r.engaged for r in recs),
            "engagement_intervals_pct": [[recs[i].cycle_pct, recs[j].cycle_pct]
                                         for i, j in engagement_intervals(recs)],
            "exceeds_sigma_cr": sig[peak] > sigma_cr}
        write_engagement_csv(out / f"engagement_{name}.csv", recs)
    write_json(out / "simulation.json", summary)
    return summary


COMMANDS = {"stress-map": cmd_stress_map, "evaluate": cmd_evaluate, "optimize": cmd_optimize,
            "simulate": cmd_simulate, "boundary": cmd_boundary}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hardstop",
                                description="Hard-stop workspace analysis and design")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run config")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--grid-alpha", type=int, help="directions per slice")
    p.add_argument("--grid-sep", type=int, help="separation slices over [0, 90] deg")
    p.add_argument("--seed", type=int, help="single multi-start seed for optimize")
    return p


def _apply_overrides(cfg: dict, args) -> dict:
    raw = copy.deepcopy(cfg)
    if args.out:
        raw["output_dir"] = args.out
    if args.grid_alpha is not None:
        raw.setdefault("grid", {})["n_alpha"] = args.grid_alpha
    if args.grid_sep is not None:
        raw.setdefault("grid", {})["n_sep"] = args.grid_sep
    if args.seed is not None and "optimization" in raw:
        raw["optimization"]["seeds"] = [args.seed]
    return raw


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        cfg = validate_config(_apply_overrides(raw, args))
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"error: {args.config}: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    base = Path(args.config).resolve().parent
    out = Path(cfg["output_dir"])
    if not out.is_absolute() and not args.out:
        out = base / out
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "effective_config.json", cfg)
    try:
        COMMANDS[args.command](cfg, out, base)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrajectoryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ZeroClearanceError, UnboundedVolumeError, SimulationError, ArithmeticError) as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InfeasibleError, OptimizationSetupError, GeometryError, StressModelError,
            FieldError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
