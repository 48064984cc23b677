"""Volumes and set comparisons between radial boundary fields.

Volumes are in scaled units: per-slice polar area integrated uniformly over
the separation slice coordinate s in [0, pi/2] (rad).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import (DirectionGrid, GridMismatchError, RadialBoundaryField,
                     UnboundedVolumeError)
from .geometry import WorkspaceVector
from .trajectory import Trajectory


def _weights(grid: DirectionGrid) -> np.ndarray:
    """Quadrature weight of each (sep, alpha) ray for a 1/2 r^2 integrand."""
    return 0.5 * grid.sep_weights[:, None] * grid.d_alpha * np.ones((1, grid.n_alpha))


def _check_bounded(f: RadialBoundaryField) -> None:
    if f.unbounded.any():
        j, i = np.argwhere(f.unbounded)[0]
        g = f.grid
        raise UnboundedVolumeError(
            f"{f.label} field is unbounded along sep={math.degrees(g.seps[j]):.6g} deg, "
            f"alpha={math.degrees(g.alphas[i]):.6g} deg")


def _check_grids(a: RadialBoundaryField, b: RadialBoundaryField) -> None:
    if not a.same_grid(b):
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


def field_volume(f: RadialBoundaryField) -> float:
    _check_bounded(f)
    return float(np.sum(_weights(f.grid) * f.radii**2))


def volume_fraction(hs: RadialBoundaryField, sigma: RadialBoundaryField) -> float:
    _check_grids(hs, sigma)
    return field_volume(hs) / field_volume(sigma)


def difference_volumes(hs: RadialBoundaryField, sigma: RadialBoundaryField) -> tuple[float, float]:
    """``(unprotected, overprotected)`` volumes, decomposed ray by ray."""
    _check_grids(hs, sigma)
    _check_bounded(hs)
    _check_bounded(sigma)
    wts = _weights(hs.grid)
    d = hs.radii**2 - sigma.radii**2
    return float(np.sum(wts * np.maximum(d, 0.0))), float(np.sum(wts * np.maximum(-d, 0.0)))


@dataclass(frozen=True)
class SpaceMetrics:
    vol_hs: float
    vol_sigma: float
    vol_unprotected: float
    vol_overprotected: float
    vol_overlap: float
    phi_hs: float
    contained: bool
    grid: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"vol_hs": self.vol_hs, "vol_sigma": self.vol_sigma, "phi_hs": self.phi_hs,
                "vol_unprotected": self.vol_unprotected,
                "vol_overprotected": self.vol_overprotected,
                "contained": self.contained, "grid": dict(self.grid)}


def space_metrics(hs: RadialBoundaryField, sigma: RadialBoundaryField,
                  containment_tol: float = 1e-12) -> SpaceMetrics:
    """Protection metrics; ``contained`` iff the unprotected volume is at most
    ``containment_tol`` times the safe-space volume."""
    _check_grids(hs, sigma)
    v_hs = field_volume(hs)
    v_sig = field_volume(sigma)
    unprot, overprot = difference_volumes(hs, sigma)
    overlap = float(np.sum(_weights(hs.grid) * np.minimum(hs.radii, sigma.radii) ** 2))
    return SpaceMetrics(v_hs, v_sig, unprot, overprot, overlap, v_hs / v_sig,
                        unprot <= containment_tol * v_sig, hs.grid.to_dict())


def contains_point(f: RadialBoundaryField, w: WorkspaceVector) -> bool:
    """Strict membership: the point lies below the interpolated boundary radius."""
    boundary, r = f.boundary_at(w)
    return r < boundary


def orthotope_field(limits: dict, grid: DirectionGrid, label: str = "orthotope") -> RadialBoundaryField:
    """Radial form of a box in the signed (delta, theta) plane, identical on every slice.

    ``limits`` maps ``"delta"`` and/or ``"theta"`` to ``(lower, upper)`` in scaled
    units with ``lower < 0 < upper``; a missing axis is unlimited.
    """
    if not limits or set(limits) - {"delta", "theta"}:
        raise ValueError("limits must name 'delta' and/or 'theta'")
    for name, (lo, hi) in limits.items():
        if not lo < 0 < hi:
            raise ValueError(f"{name} limits must bracket zero")
    alphas = grid.alphas
    comps = {"delta": np.cos(alphas), "theta": np.sin(alphas)}
    r = np.full(grid.n_alpha, math.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        for name, (lo, hi) in limits.items():
            c = comps[name]
            c = np.where(np.abs(c) < 1e-14, 0.0, c)
            t = np.where(c > 0, hi / c, np.where(c < 0, lo / c, math.inf))
            r = np.minimum(r, t)
    return RadialBoundaryField(grid, np.tile(r, (grid.n_sep, 1)), 0.0, label)


@dataclass
class ContainmentReport:
    margins: list[float]
    min_margin: float
    violations: list[int]

    @property
    def passed(self) -> bool:
        return not self.violations


def trajectory_containment(f: RadialBoundaryField, traj: Trajectory) -> ContainmentReport:
    """Per-sample margin = boundary radius minus the sample's scaled radius.

    A sample passes only with a strictly positive margin.
    """
    margins = []
    for s in traj:
        boundary, r = f.boundary_at(s.workspace)
        margins.append(boundary - r)
    violations = [i for i, m in enumerate(margins) if not m > 0]
    return ContainmentReport(margins, min(margins), violations)
