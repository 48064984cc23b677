"""Penalty-based shape search for hard-stop parameters.

The objective rewards a large hard-stop-free volume relative to the primary
safe space and charges a relative overshoot on every ray where the hard-stop
boundary leaves a must-contain safe space.  Trajectory containment is a hard
constraint.  The search is a coordinate pattern search with a halving step,
restarted from each supplied start point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .contact import ContactAnalysis, ZeroClearanceError
from .fields import DirectionGrid, RadialBoundaryField
from .geometry import GeometryError, HardStopPair, TorusCapProfile
from .spaces import SpaceMetrics, orthotope_field, space_metrics, trajectory_containment
from .stress import StressModel, safe_boundary_field
from .trajectory import Trajectory

REJECTED = -1.0e6
ROLES = ("must-contain-hs", "reference")
PROFILE_FIELDS = ("d_L", "d_S", "R_C", "theta_o", "clip_diameter")
PAIR_FIELDS = ("z_ab", "z_oa", "z_Lo")


class OptimizationSetupError(ValueError):
    pass


@dataclass(frozen=True)
class DesignVariables:
    """Named parameters with closed bounds; order fixes the search order."""

    names: tuple[str, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        n = len(self.names)
        if n == 0 or len(self.lower) != n or len(self.upper) != n:
            raise OptimizationSetupError("names and bounds must have equal nonzero length")
        if len(set(self.names)) != n:
            raise OptimizationSetupError("duplicate design variable")
        for name, lo, hi in zip(self.names, self.lower, self.upper):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise OptimizationSetupError(f"{name}: bounds must be finite with lo < hi")

    @classmethod
    def from_bounds(cls, bounds: dict) -> "DesignVariables":
        names = tuple(bounds)
        return cls(names, tuple(float(bounds[n][0]) for n in names),
                   tuple(float(bounds[n][1]) for n in names))

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def as_dict(self, x) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, x)}

    def vector(self, params: dict) -> np.ndarray:
        return np.array([float(params[n]) for n in self.names])


@dataclass
class StressTarget:
    """A safe space to compare against.

    Give either a ready ``boundary`` or a ``model`` (then the field is computed on
    whatever grid the search asks for).  A field on another grid is resampled
    by interpolation.
    """

    name: str
    sigma_cr: float
    boundary: RadialBoundaryField | None = None
    model: StressModel | None = None
    role: str = "must-contain-hs"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.role not in ROLES:
            raise OptimizationSetupError(f"target {self.name}: role must be one of {ROLES}")
        if self.boundary is None and self.model is None:
            raise OptimizationSetupError(f"target {self.name}: needs a field or a model")

    def field_on(self, grid: DirectionGrid) -> RadialBoundaryField:
        if self.boundary is not None and self.boundary.grid == grid:
            return self.boundary
        if grid not in self._cache:
            if self.model is not None:
                f = safe_boundary_field(self.model, self.sigma_cr, grid, label=self.name)
            else:
                radii = np.array([[self.boundary.radius_at(s, a) for a in grid.alphas]
                                  for s in grid.seps])
                f = RadialBoundaryField(grid, radii, self.boundary.delta_z, self.name)
            self._cache[grid] = f
        return self._cache[grid]


HsBuilder = Callable[[dict, DirectionGrid], RadialBoundaryField]


@dataclass
class OptimizationProblem:
    variables: DesignVariables
    targets: list[StressTarget]
    build_hs: HsBuilder
    grid: DirectionGrid = field(default_factory=DirectionGrid)
    final_grid: DirectionGrid | None = None
    trajectories: list[Trajectory] = field(default_factory=list)
    penalty_weight: float = 10.0
    max_evals: int = 200
    starts: list[dict] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    min_step: float = 1e-4
    unprotected_cap: float = 1e-3

    def __post_init__(self):
        if not any(t.role == "must-contain-hs" for t in self.targets):
            raise OptimizationSetupError("at least one must-contain-hs target is required")
        if not self.penalty_weight > 0:
            raise OptimizationSetupError("penalty weight must be positive")
        if self.max_evals < 1:
            raise OptimizationSetupError("max_evals must be at least 1")
        if not self.starts and not self.seeds:
            raise OptimizationSetupError("give a start point or at least one seed")

    @property
    def primary(self) -> StressTarget:
        return next(t for t in self.targets if t.role == "must-contain-hs")

    def start_points(self) -> list[np.ndarray]:
        v = self.variables
        pts = [v.clip(v.vector(p)) for p in self.starts]
        for s in self.seeds:
            rng = np.random.default_rng(s)
            pts.append(v.lo + rng.random(len(v.names)) * (v.hi - v.lo))
        return pts


@dataclass
class Evaluation:
    objective: float
    valid: bool
    reason: str = ""
    phi_hs: float = math.nan
    penalty: float = 0.0
    metrics: dict[str, SpaceMetrics] = field(default_factory=dict)
    margins: list[float] = field(default_factory=list)
    hs: RadialBoundaryField | None = None


def _overshoot(hs: RadialBoundaryField, sigma: RadialBoundaryField) -> float:
    with np.errstate(invalid="ignore"):
        rel = np.where(np.isinf(sigma.radii), 0.0,
                       np.maximum(hs.radii - sigma.radii, 0.0) / sigma.radii)
    return float(np.sum(rel))


def evaluate(x, problem: OptimizationProblem, grid: DirectionGrid | None = None) -> Evaluation:
    """Full evaluation of one design point (no caching)."""
    grid = grid or problem.grid
    params = problem.variables.as_dict(x)
    try:
        hs = problem.build_hs(params, grid)
    except (GeometryError, ZeroClearanceError) as exc:
        return Evaluation(REJECTED, False, f"invalid geometry: {exc}")
    if hs.unbounded.any():
        return Evaluation(REJECTED, False, "hard-stop boundary is unbounded", hs=hs)
    margins = []
    for traj in problem.trajectories:
        rep = trajectory_containment(hs, traj)
        margins.append(rep.min_margin)
        if not rep.passed:
            return Evaluation(REJECTED, False,
                              f"trajectory {traj.label} reaches the hard stop at sample "
                              f"{rep.violations[0]}", margins=margins, hs=hs)
    metrics = {}
    penalty = 0.0
    for t in problem.targets:
        sig = t.field_on(grid)
        metrics[t.name] = space_metrics(hs, sig)
        if t.role == "must-contain-hs":
            penalty += _overshoot(hs, sig)
    phi = metrics[problem.primary.name].phi_hs
    return Evaluation(phi - problem.penalty_weight * penalty, True, "", phi, penalty,
                      metrics, margins, hs)


def penalty_objective(x, problem: OptimizationProblem) -> float:
    return evaluate(x, problem).objective


@dataclass
class OptimizationResult:
    params: dict[str, float]
    objective: float
    recomputed_objective: float
    evaluation: Evaluation
    final_evaluation: Evaluation
    histories: list[list[float]]
    start_objectives: list[float]
    n_evals: int
    feasible: bool
    contained: bool
    trajectories_ok: bool

    def to_dict(self) -> dict:
        fe = self.final_evaluation
        return {
            "params": dict(self.params),
            "objective": self.objective,
            "recomputed_objective": self.recomputed_objective,
            "phi_hs": self.evaluation.phi_hs,
            "penalty": self.evaluation.penalty,
            "metrics": {k: m.to_dict() for k, m in self.evaluation.metrics.items()},
            "final_grid_objective": fe.objective,
            "final_grid_metrics": {k: m.to_dict() for k, m in fe.metrics.items()},
            "trajectory_margins": list(fe.margins),
            "start_objectives": list(self.start_objectives),
            "histories": [list(h) for h in self.histories],
            "n_evals": self.n_evals,
            "feasible": self.feasible,
            "contained": self.contained,
            "trajectories_ok": self.trajectories_ok,
        }


def _pattern_search(x, f, problem, budget):
    v = problem.variables
    span = v.hi - v.lo
    step = 0.1 * span
    history = [f]
    evals = 0
    while evals < budget and np.max(step / span) > problem.min_step:
        improved = False
        for i in range(len(x)):
            for sgn in (1.0, -1.0):
                y = x.copy()
                y[i] = min(max(x[i] + sgn * step[i], v.lo[i]), v.hi[i])
                if y[i] == x[i] or evals >= budget:
                    continue
                fy = evaluate(y, problem).objective
                evals += 1
                if fy > f:
                    x, f, improved = y, fy, True
                    break
            history.append(f)
        if not improved:
            step = step * 0.5
    return x, f, history, evals


def optimize(problem: OptimizationProblem) -> OptimizationResult:
    best = None
    histories, start_objs = [], []
    total = 0
    for x0 in problem.start_points():
        e0 = evaluate(x0, problem)
        total += 1
        start_objs.append(e0.objective)
        if "invalid geometry" in e0.reason:
            histories.append([e0.objective])
            continue
        x, f, hist, n = _pattern_search(x0, e0.objective, problem, problem.max_evals - 1)
        total += n
        histories.append(hist)
        if best is None or f > best[1]:
            best = (x, f)
    if best is None:
        raise OptimizationSetupError("every start point is geometrically invalid")
    x, f = best
    again = evaluate(x, problem)
    final_grid = problem.final_grid or problem.grid
    final = again if final_grid == problem.grid else evaluate(x, problem, final_grid)
    trajectories_ok = final.valid or not final.reason.startswith("trajectory")
    contained = final.valid and all(
        m.vol_unprotected <= problem.unprotected_cap * m.vol_sigma
        for name, m in final.metrics.items()
        if next(t for t in problem.targets if t.name == name).role == "must-contain-hs")
    return OptimizationResult(problem.variables.as_dict(x), f, again.objective, again, final,
                              histories, start_objs, total, contained and trajectories_ok,
                              contained, trajectories_ok)


# ---------------------------------------------------------------------------
# boundary builders
# ---------------------------------------------------------------------------

@dataclass
class HardStopBuilder:
    """Contact boundary of a hard-stop pair with some parameters overridden.

    Parameter names are ``stage.<p>``/``ground.<p>`` for profile fields (angles
    in rad) and ``z_ab``/``z_oa``/``z_Lo`` for the pair offsets.
    """

    base: dict
    density: float = 64.0
    min_points: int = 50_000
    tol: float = 1e-4
    delta_z: float = 0.0

    def check_names(self, names) -> None:
        for name in names:
            part, _, key = name.partition(".")
            known = (part in ("stage", "ground") and key in PROFILE_FIELDS) or \
                (name in PAIR_FIELDS and not key)
            if not known:
                raise OptimizationSetupError(f"unknown design variable {name}")

    def pair(self, params: dict) -> HardStopPair:
        self.check_names(params)
        stage = dict(self.base["stage"])
        ground = dict(self.base["ground"])
        offsets = {k: self.base[k] for k in PAIR_FIELDS if k in self.base}
        for name, value in params.items():
            part, _, key = name.partition(".")
            if part in ("stage", "ground") and key in PROFILE_FIELDS:
                (stage if part == "stage" else ground)[key] = value
            else:
                offsets[name] = value
        return HardStopPair(TorusCapProfile(**stage), TorusCapProfile(**ground), **offsets)

    def __call__(self, params: dict, grid: DirectionGrid) -> RadialBoundaryField:
        ca = ContactAnalysis(self.pair(params), density=self.density, min_points=self.min_points)
        return ca.boundary_field(grid, self.delta_z, tol=self.tol)


def orthotope_builder(params: dict, grid: DirectionGrid) -> RadialBoundaryField:
    """Box boundary from ``delta``/``theta`` half-widths (scaled units)."""
    limits = {}
    for axis in ("delta", "theta"):
        if axis in params:
            h = params[axis]
            if not h > 0:
                raise GeometryError(f"{axis} half-width must be positive")
            limits[axis] = (-h, h)
    return orthotope_field(limits, grid)


def inscribed_rectangle_builder(r_delta: float, r_theta: float, sigma_cr: float) -> HsBuilder:
    """One-variable box whose corner lies on the diamond edge.

    The variable ``delta`` is the box half-width in scaled delta units.  The
    theta half-width follows from ``r_delta |delta| + r_theta |theta| = sigma_cr``
    (MPa/mm and MPa/rad).
    """
    def build(params, grid):
        a = params["delta"]
        rest = sigma_cr - r_delta * a * grid.delta_ref
        if not (a > 0 and rest > 0):
            raise GeometryError("half-width must lie strictly inside the diamond")
        b = rest / r_theta / grid.theta_ref
        return orthotope_field({"delta": (-a, a), "theta": (-b, b)}, grid)

    return build
