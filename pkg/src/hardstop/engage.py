"""Quasi-static overload cycles against a rigid hard-stop boundary.

Motions outside the hard-stop-free region are projected radially back onto
its boundary (the stage cannot penetrate a rigid stop).  Stress is evaluated
with and without that projection.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .fields import RadialBoundaryField, fmt
from .geometry import WorkspaceVector, decompose_motion
from .stress import ComplianceMatrix, StressModel, compliance_map
from .trajectory import Trajectory, TrajectorySample

DEFAULT_STEPS = 61
ENGAGEMENT_HEADER = ("step", "cycle_pct", "delta_a_mm", "theta_a_deg", "theta_sep_deg",
                     "clamped_delta_a_mm", "clamped_theta_a_deg", "engaged", "margin_scaled",
                     "sigma_unclamped_mpa", "sigma_clamped_mpa")


class SimulationError(RuntimeError):
    pass


def surge_envelope(n: int, peak_multiplier: float, width_steps: float,
                   center_index: float) -> np.ndarray:
    """Gaussian amplitude multiplier per step.

    The excess over 1 falls to 5% of its peak at ``width_steps / 2`` from the
    centre.
    """
    if peak_multiplier < 1:
        raise ValueError("peak_multiplier must be >= 1")
    if not width_steps > 0:
        raise ValueError("width_steps must be positive")
    s = width_steps / (2 * math.sqrt(2 * math.log(20.0)))
    i = np.arange(n, dtype=float)
    return 1.0 + (peak_multiplier - 1.0) * np.exp(-0.5 * ((i - center_index) / s) ** 2)


def _center_index(traj: Trajectory, center_pct: float) -> float:
    pct = [s.cycle_pct for s in traj]
    return float(np.interp(center_pct, pct, np.arange(len(pct))))


def apply_surge(traj: Trajectory, peak_multiplier: float = 3.0, width_steps: float = 13,
                center_pct: float = 50.0) -> Trajectory:
    """Scale delta_a and theta_a by a Gaussian envelope; theta_sep is unchanged."""
    env = surge_envelope(len(traj), peak_multiplier, width_steps, _center_index(traj, center_pct))
    samples = []
    for s, k in zip(traj, env):
        w = s.workspace
        samples.append(TrajectorySample(s.cycle_pct,
                                        WorkspaceVector(w.delta_a * k, w.theta_a * k, w.theta_sep),
                                        s.delta_z, s.fz))
    return Trajectory(samples, f"{traj.label}+surge")


def trajectory_from_loads(C: ComplianceMatrix, loads, cycle_pct=None,
                          label: str = "loads") -> Trajectory:
    """Map a load history (N x 6) through a linear compliance to workspace samples."""
    loads = np.asarray(loads, dtype=float)
    n = len(loads)
    if cycle_pct is None:
        cycle_pct = np.linspace(0.0, 100.0, n)
    samples = []
    for p, load in zip(cycle_pct, loads):
        m = compliance_map(C, load)
        samples.append(TrajectorySample(float(p), decompose_motion(m), m.delta[2], float(load[2])))
    return Trajectory(samples, label)


def surge_loads(loads, peak_multiplier: float = 3.0, width_steps: float = 13,
                center_index: float | None = None) -> np.ndarray:
    loads = np.asarray(loads, dtype=float)
    n = len(loads)
    if center_index is None:
        center_index = (n - 1) / 2
    return loads * surge_envelope(n, peak_multiplier, width_steps, center_index)[:, None]


@dataclass(frozen=True)
class EngagementRecord:
    cycle_pct: float
    workspace: WorkspaceVector
    clamped: WorkspaceVector
    engaged: bool
    margin: float
    sigma_unclamped: float
    sigma_clamped: float


def simulate_engagement(hs_field: RadialBoundaryField, model: StressModel,
                        traj: Trajectory) -> list[EngagementRecord]:
    records = []
    for n, s in enumerate(traj):
        w = s.workspace
        boundary, r = hs_field.boundary_at(w)
        if not math.isfinite(boundary):
            raise SimulationError(f"sample {n} ({s.cycle_pct}% cycle) lies on an unbounded "
                                  "direction of the hard-stop field")
        if r < boundary:
            clamped, engaged = w, False
        else:
            k = boundary / r
            clamped = WorkspaceVector(w.delta_a * k, w.theta_a * k, w.theta_sep)
            engaged = True
        sig = model.stress(w)
        sig_c = sig if clamped is w else model.stress(clamped)
        records.append(EngagementRecord(s.cycle_pct, w, clamped, engaged, boundary - r, sig, sig_c))
    return records


def simulate_free(model: StressModel, traj: Trajectory) -> list[EngagementRecord]:
    """Reference arm with no hard stop: nothing is clamped."""
    records = []
    for s in traj:
        sig = model.stress(s.workspace)
        records.append(EngagementRecord(s.cycle_pct, s.workspace, s.workspace, False,
                                        math.inf, sig, sig))
    return records


def engagement_intervals(records) -> list[tuple[int, int]]:
    """Inclusive ``(first, last)`` step indices of each run of engaged samples."""
    out = []
    start = None
    for i, r in enumerate(records):
        if r.engaged and start is None:
            start = i
        elif not r.engaged and start is not None:
            out.append((start, i - 1))
            start = None
    if start is not None:
        out.append((start, len(records) - 1))
    return out


def boundary_peak_stress(hs_field: RadialBoundaryField, model: StressModel,
                         refine: int = 8) -> float:
    """Largest stress on the interpolated boundary surface of a field.

    The surface is sampled ``refine`` times more finely than the grid in both
    angles, so the value bounds what radial clamping can reach.
    """
    g = hs_field.grid
    seps = np.linspace(0.0, g.seps[-1], (g.n_sep - 1) * refine + 1)
    alphas = np.arange(g.n_alpha * refine) * (g.d_alpha / refine)
    best = -math.inf
    for s in seps:
        for a in alphas:
            r = hs_field.radius_at(s, a)
            if math.isfinite(r):
                x, y = g.plane_point(s, a, r)
                best = max(best, model.plane_stress(s, x, y))
    return best


def synthetic_trajectory(delta_a: float, theta_a: float, theta_sep: float,
                         steps: int = DEFAULT_STEPS, label: str = "synthetic") -> Trajectory:
    """Half-sine cycle along one workspace direction, zero at both ends.

    ``delta_a`` (mm) and ``theta_a`` (rad) are the mid-cycle amplitudes.
    """
    if steps < 3:
        raise ValueError("need at least 3 steps")
    pct = np.linspace(0.0, 100.0, steps)
    samples = []
    for p in pct:
        k = math.sin(math.pi * p / 100.0)
        k = max(k, 0.0)
        samples.append(TrajectorySample(float(p), WorkspaceVector(delta_a * k, theta_a * k,
                                                                  theta_sep)))
    return Trajectory(samples, label)


def write_engagement_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ENGAGEMENT_HEADER)
        for i, r in enumerate(records):
            a, c = r.workspace, r.clamped
            w.writerow([i, fmt(r.cycle_pct), fmt(a.delta_a), fmt(math.degrees(a.theta_a)),
                        fmt(math.degrees(a.theta_sep)), fmt(c.delta_a),
                        fmt(math.degrees(c.theta_a)), int(r.engaged), fmt(r.margin),
                        fmt(r.sigma_unclamped), fmt(r.sigma_clamped)])
