"""Stress response models, compliance mapping and the safe stress boundary.

A model maps a workspace vector to the mechanism's peak stress (MPa).  Ray
searches evaluate models on the signed (delta, theta) plane of a separation
slice so that tabulated data with distinct quadrant I/III values is honoured.
"""

from __future__ import annotations

import csv
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import brentq

from .fields import HALF_PI, DirectionGrid, RadialBoundaryField, fmt, plane_to_workspace
from .geometry import SixDofMotion, WorkspaceVector

TABLE_HEADER = ("sep_deg", "delta_signed_mm", "theta_signed_deg", "sigma_mpa")
AUDIT_SAMPLES = 16


class StressModelError(ValueError):
    pass


class BaseStressError(StressModelError):
    """Stress at zero motion already reaches the threshold."""


class OutOfHullError(StressModelError):
    """Query outside a tabulated grid."""


class TableFormatError(StressModelError):
    pass


class NonMonotoneRayWarning(UserWarning):
    pass


@dataclass(frozen=True)
class StressThresholds:
    fatigue: float = 480.0
    yield_: float = 880.0

    def __post_init__(self):
        if not 0 < self.fatigue <= self.yield_:
            raise StressModelError("thresholds need 0 < fatigue <= yield")

    def as_dict(self) -> dict[str, float]:
        return {"fatigue": self.fatigue, "yield": self.yield_}


class StressModel:
    """Base class.  ``point_symmetric`` models give equal stress at (x, y) and (-x, -y)."""

    point_symmetric = True

    def stress(self, w: WorkspaceVector) -> float:
        raise NotImplementedError

    def plane_stress(self, sep: float, x: float, y: float) -> float:
        """Stress at signed plane point ``(x mm, y rad)`` of slice ``sep``."""
        return self.stress(plane_to_workspace(sep, x, y))

    def plane_stress_array(self, sep: float, x, y) -> np.ndarray:
        """Element-wise :meth:`plane_stress` over broadcast arrays."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        out = np.empty(x.shape)
        for idx in np.ndindex(x.shape):
            out[idx] = self.plane_stress(sep, x[idx], y[idx])
        return out

    def ray_limit(self, grid: DirectionGrid, sep: float, alpha: float) -> float:
        """Largest scaled radius the model can be evaluated at along a ray."""
        return math.inf


@dataclass(frozen=True)
class LinearSuperposition(StressModel):
    """sigma = r_delta |delta_a| + r_theta |theta_a| (MPa/mm, MPa/rad)."""

    r_delta: float
    r_theta: float

    def __post_init__(self):
        if not (self.r_delta > 0 and self.r_theta > 0):
            raise StressModelError("coefficients must be positive")

    def stress(self, w):
        return self.r_delta * w.delta_a + self.r_theta * w.theta_a

    def plane_stress_array(self, sep, x, y):
        return self.r_delta * np.abs(x) + self.r_theta * np.abs(y)


@dataclass(frozen=True)
class Radial(StressModel):
    """sigma = coeff * (scaled radius of the motion)."""

    coeff: float
    delta_ref: float = 1.0
    theta_ref: float = math.radians(1.0)

    def __post_init__(self):
        if not (self.coeff > 0 and self.delta_ref > 0 and self.theta_ref > 0):
            raise StressModelError("coefficient and scalings must be positive")

    def stress(self, w):
        return self.coeff * math.hypot(w.delta_a / self.delta_ref, w.theta_a / self.theta_ref)

    def plane_stress_array(self, sep, x, y):
        return self.coeff * np.hypot(np.asarray(x) / self.delta_ref,
                                     np.asarray(y) / self.theta_ref)


@dataclass(frozen=True)
class CantileverBeam(StressModel):
    """Clamped-root round beam with prescribed tip translation and tip slope.

    Per bending plane the cubic deflection gives root and tip moments
    ``EI/L^2 (6 d - 2 L t)`` and ``EI/L^2 (-6 d + 4 L t)``; as planar vectors the
    translation and slope are separated by ``theta_sep``.  Peak stress is the
    axial stress ``F_z/A`` (tension positive) plus the larger bending stress.
    Shear and second-order effects are not modelled.
    """

    length: float
    modulus: float
    diameter: float
    axial_force: float = 0.0

    def __post_init__(self):
        if not (self.length > 0 and self.modulus > 0 and self.diameter > 0):
            raise StressModelError("beam dimensions and modulus must be positive")

    @property
    def area(self) -> float:
        return math.pi * self.diameter**2 / 4

    @property
    def inertia(self) -> float:
        return math.pi * self.diameter**4 / 64

    def moments(self, w: WorkspaceVector) -> tuple[float, float]:
        L = self.length
        d, t, c = w.delta_a, w.theta_a, math.cos(w.theta_sep)
        k = self.modulus * self.inertia / L**2
        root = math.sqrt(max(36 * d * d + 4 * L * L * t * t - 24 * L * d * t * c, 0.0))
        tip = math.sqrt(max(36 * d * d + 16 * L * L * t * t - 48 * L * d * t * c, 0.0))
        return k * root, k * tip

    def stress(self, w):
        m = max(self.moments(w))
        return self.axial_force / self.area + m * (self.diameter / 2) / self.inertia

    def plane_stress_array(self, sep, x, y):
        # on the signed plane, delta_a theta_a cos(theta_sep) equals x y cos(sep)
        x, y = np.asarray(x, float), np.asarray(y, float)
        L, c = self.length, math.cos(sep)
        root = np.sqrt(np.maximum(36 * x * x + 4 * L * L * y * y - 24 * L * x * y * c, 0.0))
        tip = np.sqrt(np.maximum(36 * x * x + 16 * L * L * y * y - 48 * L * x * y * c, 0.0))
        k = self.modulus * self.inertia / L**2
        return self.axial_force / self.area + k * np.maximum(root, tip) * (self.diameter / 2) / self.inertia


class Tabulated(StressModel):
    """Gridded stress per separation slice: bilinear in-plane, linear across slices.

    ``slices`` maps slice angle (rad) to ``(deltas_mm, thetas_rad, sigma)`` with
    ``sigma[i, j]`` at ``(deltas[i], thetas[j])``.  No extrapolation.
    """

    point_symmetric = False

    def __init__(self, slices: dict, axial_force: float | None = None,
                 theta_z: float | None = None, source: str | None = None):
        if not slices:
            raise StressModelError("tabulated model needs at least one slice")
        self.seps = np.array(sorted(slices))
        self.axial_force = axial_force
        self.theta_z = theta_z
        self.source = source
        self._interp = []
        self._box = []
        for s in self.seps:
            deltas, thetas, sigma = slices[s]
            deltas = np.asarray(deltas, float)
            thetas = np.asarray(thetas, float)
            sigma = np.asarray(sigma, float)
            if sigma.shape != (len(deltas), len(thetas)) or len(deltas) < 2 or len(thetas) < 2:
                raise StressModelError("each slice needs a complete grid of at least 2x2 nodes")
            self._interp.append(RegularGridInterpolator((deltas, thetas), sigma,
                                                        method="linear", bounds_error=True))
            self._box.append((deltas[0], deltas[-1], thetas[0], thetas[-1]))
        self.slices = slices

    def _slice_value(self, j, x, y):
        d0, d1, t0, t1 = self._box[j]
        eps = 1e-12
        if not (d0 - eps <= x <= d1 + eps and t0 - eps <= y <= t1 + eps):
            raise OutOfHullError(
                f"point ({x:.6g} mm, {math.degrees(y):.6g} deg) outside the grid of slice "
                f"{math.degrees(self.seps[j]):.6g} deg")
        return float(self._interp[j]([[min(max(x, d0), d1), min(max(y, t0), t1)]])[0])

    def plane_stress(self, sep, x, y):
        seps = self.seps
        tol = 1e-9
        if sep < seps[0] - tol or sep > seps[-1] + tol:
            raise OutOfHullError(f"separation {math.degrees(sep):.6g} deg outside tabulated slices")
        if len(seps) == 1:
            return self._slice_value(0, x, y)
        j = int(np.clip(np.searchsorted(seps, sep) - 1, 0, len(seps) - 2))
        f = (sep - seps[j]) / (seps[j + 1] - seps[j])
        f = min(max(f, 0.0), 1.0)
        if f == 0.0:
            return self._slice_value(j, x, y)
        if f == 1.0:
            return self._slice_value(j + 1, x, y)
        return (1 - f) * self._slice_value(j, x, y) + f * self._slice_value(j + 1, x, y)

    def stress(self, w):
        """Conservative value: the larger of the two plane points that share ``w``."""
        if w.theta_sep <= HALF_PI:
            s, pts = w.theta_sep, [(w.delta_a, w.theta_a), (-w.delta_a, -w.theta_a)]
        else:
            s, pts = math.pi - w.theta_sep, [(-w.delta_a, w.theta_a), (w.delta_a, -w.theta_a)]
        return max(self.plane_stress(s, x, y) for x, y in pts)

    def ray_limit(self, grid, sep, alpha):
        """Scaled radius where the ray leaves the smallest rectangle of the bracketing slices."""
        c = math.cos(alpha) * grid.delta_ref
        s = math.sin(alpha) * grid.theta_ref
        seps = self.seps
        j = int(np.clip(np.searchsorted(seps, sep) - 1, 0, max(len(seps) - 2, 0)))
        boxes = self._box[j:j + 2]
        limit = math.inf
        for d0, d1, t0, t1 in boxes:
            for comp, lo, hi in ((c, d0, d1), (s, t0, t1)):
                if comp > 1e-15:
                    limit = min(limit, hi / comp)
                elif comp < -1e-15:
                    limit = min(limit, lo / comp)
        return limit


def eval_stress(model: StressModel, w: WorkspaceVector) -> float:
    return model.stress(w)


# ---------------------------------------------------------------------------
# tabulated grid I/O
# ---------------------------------------------------------------------------

def load_tabulated_grid(path, axial_force: float | None = None,
                        theta_z: float | None = None) -> Tabulated:
    """Read a ``sep_deg, delta_signed_mm, theta_signed_deg, sigma_mpa`` table."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(c.strip() for c in rows[0]) != TABLE_HEADER:
        raise TableFormatError(f"{path}: header must be {','.join(TABLE_HEADER)}")
    nodes: dict[float, dict[tuple[float, float], tuple[float, int]]] = defaultdict(dict)
    for n, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise TableFormatError(f"{path}: row {n}: expected 4 columns, got {len(row)}")
        try:
            s, d, t, v = (float(c) for c in row)
        except ValueError as exc:
            raise TableFormatError(f"{path}: row {n}: {exc}") from exc
        if not all(math.isfinite(q) for q in (s, d, t, v)):
            raise TableFormatError(f"{path}: row {n}: non-finite value")
        if not 0.0 <= s <= 90.0:
            raise TableFormatError(f"{path}: row {n}: sep_deg {s} outside [0, 90]")
        key = (d, t)
        if key in nodes[s]:
            first = nodes[s][key][1]
            raise TableFormatError(
                f"{path}: row {n}: duplicate node (sep {s}, delta {d}, theta {t}) "
                f"first given in row {first}")
        nodes[s][key] = (v, n)
    if not nodes:
        raise TableFormatError(f"{path}: no data rows")
    slices = {}
    for s, pts in nodes.items():
        deltas = sorted({k[0] for k in pts})
        thetas = sorted({k[1] for k in pts})
        if len(deltas) < 2 or len(thetas) < 2:
            raise TableFormatError(f"{path}: slice {s} deg needs at least 2 delta and 2 theta values")
        sigma = np.empty((len(deltas), len(thetas)))
        for i, d in enumerate(deltas):
            for j, t in enumerate(thetas):
                if (d, t) not in pts:
                    raise TableFormatError(
                        f"{path}: slice {s} deg is missing node delta={d} mm, theta={t} deg")
                sigma[i, j] = pts[(d, t)][0]
        slices[math.radians(s)] = (np.array(deltas), np.radians(thetas), sigma)
    return Tabulated(slices, axial_force, theta_z, source=str(path))


def sample_plane_grid(model: StressModel, sep: float, deltas, thetas) -> np.ndarray:
    """Stress on a signed-plane grid (deltas in mm, thetas in rad)."""
    X, Y = np.meshgrid(np.asarray(deltas, float), np.asarray(thetas, float), indexing="ij")
    return model.plane_stress_array(sep, X, Y)


def write_table(path, model: StressModel, seps, deltas, thetas) -> None:
    """Write a stress table in the tabulated-grid layout (angles in degrees)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for s in seps:
            grid = sample_plane_grid(model, s, deltas, thetas)
            for i, d in enumerate(deltas):
                for j, t in enumerate(thetas):
                    w.writerow([fmt(math.degrees(s)), fmt(d), fmt(math.degrees(t)),
                                fmt(grid[i, j])])


def tabulate(model: StressModel, seps, deltas, thetas) -> Tabulated:
    """In-memory tabulation of a model (same layout as :func:`write_table`)."""
    deltas = np.asarray(deltas, float)
    thetas = np.asarray(thetas, float)
    return Tabulated({float(s): (deltas, thetas, sample_plane_grid(model, s, deltas, thetas))
                      for s in seps})


# ---------------------------------------------------------------------------
# safe boundary
# ---------------------------------------------------------------------------

@dataclass
class SafeRay:
    radius: float
    nonmonotone: bool = False


def safe_radius_along_ray(model: StressModel, sigma_cr: float, grid: DirectionGrid,
                          sep: float, alpha: float, r_max: float | None = None,
                          tol: float = 1e-6, max_doublings: int = 60) -> SafeRay:
    """Radius where stress first reaches ``sigma_cr`` along a ray (``inf`` if never).

    With ``r_max=None`` the bracket doubles from one scaled unit; for tabulated
    models the search stops where the ray leaves the grid.
    """
    def sigma(k):
        x, y = grid.plane_point(sep, alpha, k)
        return model.plane_stress(sep, x, y)

    base = sigma(0.0)
    if base >= sigma_cr:
        raise BaseStressError(f"stress at zero motion ({base:.6g} MPa) reaches the "
                              f"threshold {sigma_cr:.6g} MPa")
    limit = model.ray_limit(grid, sep, alpha)
    if r_max is None:
        hi, doublings = min(1.0, limit), max_doublings
    else:
        hi, doublings = min(r_max, limit), 0
    while sigma(hi) < sigma_cr:
        if doublings == 0 or hi >= limit:
            return SafeRay(math.inf)
        hi = min(2 * hi, limit)
        doublings -= 1

    def f(k):
        return sigma(k) - sigma_cr

    r = brentq(f, 0.0, hi, xtol=tol * 1e-3)
    nonmonotone = False
    prev = 0.0
    for j in range(1, AUDIT_SAMPLES + 1):
        k = r * j / (AUDIT_SAMPLES + 1)
        if f(k) >= 0:
            nonmonotone = True
            r = brentq(f, prev, k, xtol=tol * 1e-3)
            break
        prev = k
    return SafeRay(r, nonmonotone)


def safe_boundary_field(model: StressModel, sigma_cr: float, grid: DirectionGrid,
                        delta_z: float = 0.0, tol: float = 1e-6,
                        label: str = "sigma") -> RadialBoundaryField:
    half = grid.n_alpha // 2
    n = half if model.point_symmetric else grid.n_alpha
    radii = np.empty((grid.n_sep, grid.n_alpha))
    notes = []
    for j, s in enumerate(grid.seps):
        for i in range(n):
            a = grid.alphas[i]
            res = safe_radius_along_ray(model, sigma_cr, grid, s, a, tol=tol)
            radii[j, i] = res.radius
            if model.point_symmetric:
                radii[j, i + half] = res.radius
            if res.nonmonotone:
                msg = (f"non-monotone stress along sep={math.degrees(s):.6g} deg, "
                       f"alpha={math.degrees(a):.6g} deg")
                notes.append(msg)
                warnings.warn(msg, NonMonotoneRayWarning, stacklevel=2)
    return RadialBoundaryField(grid, radii, delta_z, label, notes)


# ---------------------------------------------------------------------------
# compliance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComplianceMatrix:
    """6x6 map from (Fx, Fy, Fz [N], Mx, My, Mz [N mm]) to (delta [mm], theta [rad])."""

    matrix: np.ndarray = field(default_factory=lambda: np.zeros((6, 6)))

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (6, 6) or not np.all(np.isfinite(m)):
            raise StressModelError("compliance matrix must be a finite 6x6 array")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def compliance_map(C: ComplianceMatrix, load) -> SixDofMotion:
    load = np.asarray(load, dtype=float)
    if load.shape != (6,):
        raise StressModelError("load must have six components")
    return SixDofMotion.from_vector(C.matrix @ load)
