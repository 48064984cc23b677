"""Direction grids and radial boundary fields over the workspace.

A boundary is stored as radii along rays of the signed (delta, theta) plane,
one plane per separation-angle slice ``s`` in [0, 90] deg.  Quadrants I/III of
a slice hold separation ``s``; quadrants II/IV hold ``180 - s``.  Radii are in
scaled units: ``delta_ref`` mm and ``theta_ref`` rad per unit along each axis.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import WorkspaceVector

HALF_PI = math.pi / 2
CSV_HEADER = ("sep_deg", "alpha_deg", "radius_scaled", "unbounded_flag")


class FieldError(ValueError):
    pass


class GridMismatchError(FieldError):
    pass


class UnboundedVolumeError(FieldError):
    pass


def fmt(x: float) -> str:
    """Fixed 9-significant-digit float format used by every output file."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


@dataclass(frozen=True)
class DirectionGrid:
    n_alpha: int = 72
    n_sep: int = 7
    delta_ref: float = 1.0
    theta_ref: float = math.radians(1.0)

    def __post_init__(self):
        if self.n_alpha < 8 or self.n_alpha % 4:
            raise FieldError("n_alpha must be >= 8 and a multiple of 4")
        if self.n_sep < 1:
            raise FieldError("n_sep must be >= 1")
        if not (self.delta_ref > 0 and self.theta_ref > 0):
            raise FieldError("axis scalings must be positive")

    @property
    def alphas(self) -> np.ndarray:
        return np.arange(self.n_alpha) * (2 * math.pi / self.n_alpha)

    @property
    def seps(self) -> np.ndarray:
        if self.n_sep == 1:
            return np.zeros(1)
        return np.linspace(0.0, HALF_PI, self.n_sep)

    @property
    def d_alpha(self) -> float:
        return 2 * math.pi / self.n_alpha

    @property
    def sep_weights(self) -> np.ndarray:
        """Trapezoid weights over s in [0, pi/2]; they sum to pi/2."""
        if self.n_sep == 1:
            return np.array([HALF_PI])
        h = HALF_PI / (self.n_sep - 1)
        w = np.full(self.n_sep, h)
        w[0] = w[-1] = h / 2
        return w

    def refined(self, factor: int = 2) -> "DirectionGrid":
        n_sep = self.n_sep if self.n_sep == 1 else (self.n_sep - 1) * factor + 1
        return DirectionGrid(self.n_alpha * factor, n_sep, self.delta_ref, self.theta_ref)

    def rescaled(self, delta_ref=None, theta_ref=None) -> "DirectionGrid":
        return DirectionGrid(self.n_alpha, self.n_sep,
                             self.delta_ref if delta_ref is None else delta_ref,
                             self.theta_ref if theta_ref is None else theta_ref)

    def to_dict(self) -> dict:
        return {"n_alpha": self.n_alpha, "n_sep": self.n_sep,
                "delta_ref_mm": self.delta_ref,
                "theta_ref_deg": math.degrees(self.theta_ref)}

    # conversions -----------------------------------------------------------

    def plane_point(self, sep: float, alpha: float, radius: float) -> tuple[float, float]:
        """Signed physical plane coordinates (mm, rad) of a scaled-radius point."""
        return (radius * math.cos(alpha) * self.delta_ref,
                radius * math.sin(alpha) * self.theta_ref)

    def workspace(self, sep: float, alpha: float, radius: float) -> WorkspaceVector:
        x, y = self.plane_point(sep, alpha, radius)
        return plane_to_workspace(sep, x, y)

    def locate(self, w: WorkspaceVector) -> tuple[float, float, float]:
        """``(sep, alpha, scaled radius)`` of a workspace vector, alpha in [0, pi]."""
        x = w.delta_a / self.delta_ref
        y = w.theta_a / self.theta_ref
        r = math.hypot(x, y)
        a = math.atan2(y, x)
        ts = w.theta_sep
        if ts <= HALF_PI:
            return ts, a, r
        return math.pi - ts, math.pi - a, r


def plane_to_workspace(sep: float, x: float, y: float) -> WorkspaceVector:
    """Workspace vector of the signed plane point ``(x mm, y rad)`` on slice ``sep``."""
    ts = sep if x * y >= 0 else math.pi - sep
    return WorkspaceVector(abs(x), abs(y), min(max(ts, 0.0), math.pi))


@dataclass
class RadialBoundaryField:
    """Boundary radii (scaled units) indexed ``[sep, alpha]``; ``inf`` marks an unbounded ray."""

    grid: DirectionGrid
    radii: np.ndarray
    delta_z: float = 0.0
    label: str = "hs"
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        if self.radii.shape != (self.grid.n_sep, self.grid.n_alpha):
            raise FieldError(f"radii shape {self.radii.shape} does not match grid "
                             f"({self.grid.n_sep}, {self.grid.n_alpha})")
        if np.any(np.isnan(self.radii)) or np.any(self.radii <= 0):
            raise FieldError("boundary radii must be positive")

    @property
    def unbounded(self) -> np.ndarray:
        return np.isinf(self.radii)

    def radius_at(self, sep: float, alpha: float) -> float:
        """Bilinear interpolation of the boundary radius (periodic in alpha)."""
        g = self.grid
        seps = g.seps
        a = (alpha % (2 * math.pi)) / g.d_alpha
        i0 = int(math.floor(a)) % g.n_alpha
        i1 = (i0 + 1) % g.n_alpha
        fa = a - math.floor(a)
        if g.n_sep == 1:
            rows = [(0, 1.0)]
        else:
            sp = min(max(sep, 0.0), HALF_PI) / (seps[1] - seps[0])
            j0 = min(int(math.floor(sp)), g.n_sep - 2)
            fs = sp - j0
            rows = [(j0, 1.0 - fs), (j0 + 1, fs)]
        total = 0.0
        for j, wj in rows:
            if wj == 0.0:
                continue
            for i, wi in ((i0, 1.0 - fa), (i1, fa)):
                if wi == 0.0:
                    continue
                total += wj * wi * self.radii[j, i]
        return total

    def boundary_at(self, w: WorkspaceVector) -> tuple[float, float]:
        """``(boundary radius, scaled radius of w)`` along the ray through ``w``."""
        sep, alpha, r = self.grid.locate(w)
        return self.radius_at(sep, alpha), r

    def same_grid(self, other: "RadialBoundaryField") -> bool:
        return self.grid == other.grid

    # I/O ---------------------------------------------------------------------

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for j, s in enumerate(self.grid.seps):
                for i, a in enumerate(self.grid.alphas):
                    r = self.radii[j, i]
                    w.writerow([fmt(math.degrees(s)), fmt(math.degrees(a)),
                                fmt(r), int(math.isinf(r))])

    @classmethod
    def from_csv(cls, path, delta_ref: float = 1.0, theta_ref: float = math.radians(1.0),
                 label: str = "hs", delta_z: float = 0.0) -> "RadialBoundaryField":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(rows[0]) != CSV_HEADER:
            raise FieldError(f"{path}: expected header {','.join(CSV_HEADER)}")
        body = rows[1:]
        seps = sorted({float(r[0]) for r in body})
        alphas = sorted({float(r[1]) for r in body})
        grid = DirectionGrid(len(alphas), len(seps), delta_ref, theta_ref)
        if len(body) != grid.n_sep * grid.n_alpha:
            raise FieldError(f"{path}: incomplete boundary grid")
        radii = np.empty((grid.n_sep, grid.n_alpha))
        sidx = {s: j for j, s in enumerate(seps)}
        aidx = {a: i for i, a in enumerate(alphas)}
        for n, row in enumerate(body, start=2):
            try:
                r = math.inf if int(row[3]) else float(row[2])
                radii[sidx[float(row[0])], aidx[float(row[1])]] = r
            except (ValueError, IndexError) as exc:
                raise FieldError(f"{path}: row {n}: {exc}") from exc
        return cls(grid, radii, delta_z, label)
