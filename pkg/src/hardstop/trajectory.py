"""Activity motion cycles in workspace coordinates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .fields import fmt
from .geometry import WorkspaceVector

REQUIRED = ("cycle_pct", "delta_a_mm", "theta_a_deg", "theta_sep_deg")
OPTIONAL = ("delta_z_mm", "fz_n")


class TrajectoryError(ValueError):
    pass


@dataclass(frozen=True)
class TrajectorySample:
    cycle_pct: float
    workspace: WorkspaceVector
    delta_z: float | None = None
    fz: float | None = None


@dataclass
class Trajectory:
    samples: list[TrajectorySample]
    label: str = "activity"

    def __post_init__(self):
        pct = [s.cycle_pct for s in self.samples]
        if not pct:
            raise TrajectoryError("trajectory has no samples")
        if pct[0] < 0 or pct[-1] > 100:
            raise TrajectoryError("cycle_pct must lie in [0, 100]")
        if any(b <= a for a, b in zip(pct, pct[1:])):
            raise TrajectoryError("cycle_pct must be strictly increasing")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def workspaces(self) -> list[WorkspaceVector]:
        return [s.workspace for s in self.samples]

    @classmethod
    def from_workspaces(cls, workspaces, label="activity", cycle_pct=None) -> "Trajectory":
        n = len(workspaces)
        if cycle_pct is None:
            cycle_pct = [100.0 * i / (n - 1) if n > 1 else 0.0 for i in range(n)]
        return cls([TrajectorySample(p, w) for p, w in zip(cycle_pct, workspaces)], label)


def read_trajectory(path, label: str | None = None) -> Trajectory:
    """Read ``cycle_pct, delta_a_mm, theta_a_deg, theta_sep_deg[, delta_z_mm][, fz_n]``."""
    try:
        fh = open(path, newline="")
    except FileNotFoundError as exc:
        raise TrajectoryError(f"trajectory file not found: {path}") from exc
    with fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TrajectoryError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if tuple(header[:4]) != REQUIRED or any(h not in OPTIONAL for h in header[4:]):
        raise TrajectoryError(f"{path}: header must start with {','.join(REQUIRED)} "
                              f"and may add {','.join(OPTIONAL)}")
    samples = []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise TrajectoryError(f"{path}: row {n}: expected {len(header)} columns")
        try:
            vals = dict(zip(header, (float(c) for c in row)))
            w = WorkspaceVector(vals["delta_a_mm"], math.radians(vals["theta_a_deg"]),
                                math.radians(vals["theta_sep_deg"]))
        except ValueError as exc:
            raise TrajectoryError(f"{path}: row {n}: {exc}") from exc
        samples.append(TrajectorySample(vals["cycle_pct"], w,
                                        vals.get("delta_z_mm"), vals.get("fz_n")))
    return Trajectory(samples, label or str(path))


def write_trajectory(path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REQUIRED)
        for s in traj:
            ws = s.workspace
            w.writerow([fmt(s.cycle_pct), fmt(ws.delta_a), fmt(math.degrees(ws.theta_a)),
                        fmt(math.degrees(ws.theta_sep))])
