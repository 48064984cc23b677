"""Clearance between the moved stage cap and the ground cap, and the contact boundary.

The ground surface is handled exactly: the distance from a point to a surface
of revolution is a 1D minimisation over the generating curve in the (r, z)
half-plane.  The stage surface is a particle sample.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .fields import DirectionGrid, RadialBoundaryField
from .geometry import (HardStopPair, SixDofMotion, SurfaceSample, TorusCapProfile,
                       WorkspaceVector, compose_motion, sample_surface, transform_points)

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
N_POLYLINE = 16385
AUDIT_SAMPLES = 16


class ZeroClearanceError(RuntimeError):
    """The stage touches the ground at (or arbitrarily close to) zero motion."""


class NonConvexRayWarning(UserWarning):
    pass


class ProfileDistance:
    """Distance queries from (r, z) points to a profile's height-field curve."""

    def __init__(self, profile: TorusCapProfile):
        self.profile = profile
        lo, hi = profile.phi_range
        self.phis = np.linspace(lo, hi, N_POLYLINE)
        self.r = profile.radius_phi(self.phis)
        self.z = profile.height_phi(self.phis)
        self.tree = cKDTree(np.column_stack([self.r, self.z]))
        seg = np.hypot(np.diff(self.r), np.diff(self.z))
        # nearest-vertex distance overestimates the curve distance by at most this
        self.vertex_error = float(seg.max()) / 2 + 1e-12

    def nearest_vertex(self, rho, z):
        d, idx = self.tree.query(np.column_stack([np.ravel(rho), np.ravel(z)]))
        return d, idx

    def refine(self, rho, z, idx, iters: int = 64):
        """Golden-section minimisation of the squared distance around vertex ``idx``."""
        rho = np.asarray(rho, dtype=float)
        z = np.asarray(z, dtype=float)
        n = len(self.phis)
        a = self.phis[np.clip(idx - 3, 0, n - 1)]
        b = self.phis[np.clip(idx + 3, 0, n - 1)]
        p = self.profile

        def f(phi):
            return (p.radius_phi(phi) - rho) ** 2 + (p.height_phi(phi) - z) ** 2

        c = b - GOLDEN * (b - a)
        d = a + GOLDEN * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(iters):
            left = fc < fd
            b = np.where(left, d, b)
            a = np.where(left, a, c)
            new_c = b - GOLDEN * (b - a)
            new_d = a + GOLDEN * (b - a)
            c_next = np.where(left, new_c, d)
            d_next = np.where(left, c, new_d)
            fc_next = np.where(left, f(new_c), fd)
            fd_next = np.where(left, fc, f(new_d))
            c, d, fc, fd = c_next, d_next, fc_next, fd_next
        phi = 0.5 * (a + b)
        # the end vertices are candidates in their own right
        best = np.minimum(f(phi), np.minimum(f(self.phis[0]), f(self.phis[-1])))
        return np.sqrt(best)

    def below(self, rho, z):
        zb = self.profile.height_at(rho)
        return np.isfinite(zb) & (z < zb)

    def signed(self, rho, z):
        """Exact signed distance for every point (negative below the height field)."""
        _, idx = self.nearest_vertex(rho, z)
        dist = self.refine(np.ravel(rho), np.ravel(z), idx)
        return np.where(self.below(np.ravel(rho), np.ravel(z)), -dist, dist)

    def min_signed(self, rho, z):
        """Minimum signed distance over a point cloud, refining only the candidates."""
        rho = np.ravel(rho)
        z = np.ravel(z)
        dv, idx = self.nearest_vertex(rho, z)
        sign = np.where(self.below(rho, z), -1.0, 1.0)
        coarse = sign * dv
        # |exact - coarse| <= vertex_error for every point
        cand = np.flatnonzero(coarse <= coarse.min() + 2 * self.vertex_error)
        exact = self.refine(rho[cand], z[cand], idx[cand]) * sign[cand]
        return float(exact.min())


def point_to_profile_distance(pt, ground: TorusCapProfile, ground_z_offset: float = 0.0) -> float:
    """Signed distance (mm) from a 3D point to the ground surface of revolution."""
    pt = np.asarray(pt, dtype=float)
    rho = math.hypot(pt[0], pt[1])
    return float(ProfileDistance(ground).signed(np.array([rho]),
                                                np.array([pt[2] - ground_z_offset]))[0])


def ray_motion(grid: DirectionGrid, sep: float, alpha: float, k: float,
               azimuth: float = 0.0, delta_z: float = 0.0) -> SixDofMotion:
    """Stage motion at scaled radius ``k`` along grid direction ``(sep, alpha)``."""
    return compose_motion(grid.workspace(sep, alpha, k), azimuth, delta_z)


@dataclass
class RayResult:
    radius: float
    nonconvex: bool = False


class ContactAnalysis:
    """Contact queries for one hard-stop pair and one stage particle sample.

    Ground height is measured from the ground ellipse centre (z = 0); stage
    sample points are in the same global frame.
    """

    def __init__(self, pair: HardStopPair, sample: SurfaceSample | None = None,
                 density: float = 64.0, min_points: int = 50_000):
        self.pair = pair
        if sample is None:
            sample = sample_surface(pair.stage, density, min_points, z_offset=pair.z_ab)
        self.sample = sample
        self.points = sample.points
        self.anchor = pair.anchor
        self.ground = ProfileDistance(pair.ground)
        rho0 = np.hypot(self.points[:, 0], self.points[:, 1])
        d0, _ = self.ground.nearest_vertex(rho0, self.points[:, 2])
        self._d0 = d0 - self.ground.vertex_error
        lo, hi = pair.ground.radial_support
        self._edge = np.minimum(np.abs(rho0 - lo), np.abs(rho0 - hi))
        self._reach = float(np.max(np.linalg.norm(self.points - self.anchor, axis=1)))
        self._gap = pair.nominal_gap()

    # clearance -------------------------------------------------------------

    def min_clearance(self, m: SixDofMotion) -> float:
        x = transform_points(self.points, m, self.anchor)
        return self.ground.min_signed(np.hypot(x[:, 0], x[:, 1]), x[:, 2])

    def _subset(self, bound: float) -> np.ndarray:
        """Points that can reach the ground within a displacement ``bound``."""
        return self.points[(self._d0 <= bound) | (self._edge <= bound)]

    def _bound(self, m: SixDofMotion) -> float:
        tilt = math.hypot(*m.tilt)
        return (math.hypot(*m.delta) + 2 * math.sin(tilt / 2) * self._reach) * (1 + 1e-9) + 1e-9

    def vertical_gap(self, m: SixDofMotion, points: np.ndarray | None = None) -> float:
        """Smallest height of moved points above the ground height field (``inf`` if none overlap it).

        Same sign as :meth:`min_clearance`; cheaper, used for root finding.
        """
        pts = self._subset(self._bound(m)) if points is None else points
        if len(pts) == 0:
            return math.inf
        x = transform_points(pts, m, self.anchor)
        zb = self.pair.ground.height_fast(np.hypot(x[:, 0], x[:, 1]))
        gap = x[:, 2] - zb
        gap = gap[np.isfinite(gap)]
        return float(gap.min()) if len(gap) else math.inf

    def in_contact(self, m: SixDofMotion, points: np.ndarray | None = None) -> bool:
        return self.vertical_gap(m, points) <= 0.0

    # boundary --------------------------------------------------------------

    def ray_radius(self, grid: DirectionGrid, sep: float, alpha: float,
                   azimuth: float = 0.0, delta_z: float = 0.0,
                   r_max: float | None = None, tol: float = 1e-4,
                   max_doublings: int = 10) -> RayResult:
        """Smallest contact radius along a ray (``inf`` if none is found).

        With ``r_max=None`` the bracket starts at four nominal gaps (in delta
        units) and doubles until contact is found, at most ``max_doublings``
        times; a fixed ``r_max`` disables the doubling.  The returned radius is
        in contact and the radius ``tol`` below it is not.
        """
        def motion(k):
            return ray_motion(grid, sep, alpha, k, azimuth, delta_z)

        def gap(k, pts):
            return self.vertical_gap(motion(k), pts)

        # largest radius keeping the tilt below pi
        t_unit = abs(math.sin(alpha)) * grid.theta_ref
        k_cap = 0.999 * math.pi / t_unit if t_unit > 0 else math.inf
        if r_max is None:
            hi = min(4 * self._gap / grid.delta_ref, k_cap)
            doublings = max_doublings
        else:
            hi = min(r_max, k_cap)
            doublings = 0

        pts = self._subset(self._bound(motion(hi)))
        while gap(hi, pts) > 0:
            if doublings == 0 or hi >= k_cap:
                return RayResult(math.inf)
            hi = min(2 * hi, k_cap)
            doublings -= 1
            pts = self._subset(self._bound(motion(hi)))

        start = min(tol, hi)
        if gap(start, pts) <= 0:
            raise ZeroClearanceError(
                f"contact at radius {start:.3g} along sep={math.degrees(sep):.6g} deg, "
                f"alpha={math.degrees(alpha):.6g} deg")
        r = self._root(gap, 0.0, hi, tol, pts)

        # radial convexity audit
        nonconvex = False
        prev = 0.0
        for j in range(1, AUDIT_SAMPLES + 1):
            k = r * j / (AUDIT_SAMPLES + 1)
            if gap(k, pts) <= 0:
                nonconvex = True
                r = self._root(gap, prev, k, tol, pts)
                break
            prev = k
        return RayResult(r, nonconvex)

    def _root(self, gap, lo, hi, tol, pts):
        """Bracketed root of the clearance: returns ``hi`` with gap(hi) <= 0 < gap(hi - tol).

        Brent's method locates the crossing; bisection on the remaining
        bracket guarantees the contract when the gap is not smooth.
        """
        def f(k):
            g = gap(k, pts)
            return g if math.isfinite(g) else 1.0

        try:
            x = brentq(f, lo, hi, xtol=tol / 8)
            a, b = max(lo, x - tol / 2), min(hi, x + tol / 2)
            if f(b) <= 0:
                hi = b
                if a > lo and f(a) > 0:
                    lo = a
        except ValueError:
            pass
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if gap(mid, pts) <= 0:
                hi = mid
            else:
                lo = mid
        return hi

    def boundary_field(self, grid: DirectionGrid, delta_z: float = 0.0,
                       r_max: float | None = None, tol: float = 1e-4,
                       workers: int = 1) -> RadialBoundaryField:
        """Contact boundary over every grid direction.

        Rays at alpha and alpha + pi describe the same workspace vector, so
        only the first half-turn is computed.
        """
        half = grid.n_alpha // 2
        jobs = [(j, i) for j in range(grid.n_sep) for i in range(half)]
        seps, alphas = grid.seps, grid.alphas

        def run(job):
            j, i = job
            try:
                return self.ray_radius(grid, seps[j], alphas[i], 0.0, delta_z, r_max, tol)
            except ZeroClearanceError as exc:
                raise ZeroClearanceError(f"ray (sep index {j}, alpha index {i}): {exc}") from exc

        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                results = list(pool.map(run, jobs))
        else:
            results = [run(job) for job in jobs]

        radii = np.empty((grid.n_sep, grid.n_alpha))
        notes = []
        for (j, i), res in zip(jobs, results):
            radii[j, i] = radii[j, i + half] = res.radius
            if res.nonconvex:
                msg = (f"non-convex ray at sep={math.degrees(seps[j]):.6g} deg, "
                       f"alpha={math.degrees(alphas[i]):.6g} deg")
                notes.append(msg)
                warnings.warn(msg, NonConvexRayWarning, stacklevel=2)
        return RadialBoundaryField(grid, radii, delta_z, "hs", notes)


def min_clearance(pair: HardStopPair, m: SixDofMotion, sample: SurfaceSample) -> float:
    return ContactAnalysis(pair, sample).min_clearance(m)


def contact_radius_along_ray(pair: HardStopPair, grid: DirectionGrid, sep: float, alpha: float,
                             azimuth: float = 0.0, delta_z: float = 0.0,
                             r_max: float | None = None, tol: float = 1e-4,
                             sample: SurfaceSample | None = None) -> float:
    return ContactAnalysis(pair, sample).ray_radius(grid, sep, alpha, azimuth, delta_z,
                                                    r_max, tol).radius


def contact_boundary_field(pair: HardStopPair, grid: DirectionGrid, delta_z: float = 0.0,
                           sample: SurfaceSample | None = None, r_max: float | None = None,
                           tol: float = 1e-4, workers: int = 1) -> RadialBoundaryField:
    return ContactAnalysis(pair, sample).boundary_field(grid, delta_z, r_max, tol, workers)
