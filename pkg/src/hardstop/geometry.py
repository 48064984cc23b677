"""Rigid-body kinematics, workspace coordinates and torus-cap surfaces.

Lengths are in mm and angles in radians throughout the library; degrees only
appear at the file/CLI boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SMALL_ANGLE = 1e-8


class GeometryError(ValueError):
    """Invalid geometric input (profile, pair or motion)."""


# ---------------------------------------------------------------------------
# kinematics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SixDofMotion:
    """Translation ``delta`` (mm) and axis-angle rotation ``theta`` (rad)."""

    delta: tuple[float, float, float] = (0.0, 0.0, 0.0)
    theta: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        d = tuple(float(v) for v in self.delta)
        t = tuple(float(v) for v in self.theta)
        if len(d) != 3 or len(t) != 3:
            raise GeometryError("delta and theta must have three components")
        if not all(math.isfinite(v) for v in d + t):
            raise GeometryError("motion components must be finite")
        if math.hypot(*t) >= math.pi:
            raise GeometryError("rotation magnitude must be below pi")
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "theta", t)

    @property
    def tilt(self) -> tuple[float, float]:
        return self.theta[0], self.theta[1]

    @classmethod
    def from_vector(cls, u) -> "SixDofMotion":
        u = np.asarray(u, dtype=float)
        return cls(tuple(u[:3]), tuple(u[3:6]))

    def as_vector(self) -> np.ndarray:
        return np.array(self.delta + self.theta)


@dataclass(frozen=True)
class WorkspaceVector:
    """Protected-motion coordinates: |delta_xy| (mm), |tilt| (rad), separation angle (rad)."""

    delta_a: float
    theta_a: float
    theta_sep: float = 0.0

    def __post_init__(self):
        da, ta, ts = float(self.delta_a), float(self.theta_a), float(self.theta_sep)
        if not all(math.isfinite(v) for v in (da, ta, ts)):
            raise GeometryError("workspace vector components must be finite")
        if da < 0 or ta < 0:
            raise GeometryError("delta_a and theta_a must be nonnegative")
        if not 0.0 <= ts <= math.pi:
            raise GeometryError("theta_sep must lie in [0, pi]")
        if da * ta == 0.0:
            ts = 0.0
        object.__setattr__(self, "delta_a", da)
        object.__setattr__(self, "theta_a", ta)
        object.__setattr__(self, "theta_sep", ts)


def skew(tilt) -> np.ndarray:
    tx, ty = float(tilt[0]), float(tilt[1])
    return np.array([[0.0, 0.0, ty],
                     [0.0, 0.0, -tx],
                     [-ty, tx, 0.0]])


def rodrigues_rotation(tilt) -> np.ndarray:
    """Rotation matrix for an in-plane tilt vector ``(theta_x, theta_y)``."""
    tx, ty = float(tilt[0]), float(tilt[1])
    angle = math.hypot(tx, ty)
    if not math.isfinite(angle) or angle >= math.pi:
        raise GeometryError(f"tilt magnitude {angle!r} must be finite and below pi")
    K = skew((tx, ty))
    if angle < SMALL_ANGLE:
        a = 1.0 - angle * angle / 6.0
        b = 0.5 - angle * angle / 24.0
    else:
        a = math.sin(angle) / angle
        b = (1.0 - math.cos(angle)) / angle**2
    return np.eye(3) + a * K + b * (K @ K)


def perp_deflection(tilt) -> tuple[float, float]:
    """Angular deflection vector: the tilt rotated by +90 deg in the xy-plane."""
    return -float(tilt[1]), float(tilt[0])


def decompose_motion(m: SixDofMotion) -> WorkspaceVector:
    """Workspace coordinates of a six-DOF motion; delta_z and theta_z are dropped.

    The separation angle is measured between delta_xy and the tilt vector
    turned by -90 deg, ``(theta_y, -theta_x)``.  With this orientation a tilt
    about +y combined with a translation along +x has separation 0, which is
    the parameterisation used for the torus-cap contact transform.
    """
    dx, dy, _ = m.delta
    px, py = perp_deflection(m.tilt)
    delta_a = math.hypot(dx, dy)
    theta_a = math.hypot(px, py)
    if delta_a * theta_a == 0.0:
        return WorkspaceVector(delta_a, theta_a, 0.0)
    c = -(dx * px + dy * py) / (delta_a * theta_a)
    return WorkspaceVector(delta_a, theta_a, math.acos(min(1.0, max(-1.0, c))))


def compose_motion(w: WorkspaceVector, azimuth: float = 0.0, delta_z: float = 0.0,
                   theta_z: float = 0.0) -> SixDofMotion:
    """Inverse of :func:`decompose_motion`; ``azimuth`` fixes the direction of delta_xy.

    For ``azimuth = 0`` the translation is along +x and the tilt vector points
    at ``theta_sep + 90 deg``; ``theta_sep = 0`` is a tilt about +y.
    """
    dx = w.delta_a * math.cos(azimuth)
    dy = w.delta_a * math.sin(azimuth)
    phi = azimuth + w.theta_sep + math.pi / 2
    return SixDofMotion((dx, dy, delta_z),
                        (w.theta_a * math.cos(phi), w.theta_a * math.sin(phi), theta_z))


def transform_points(X, m: SixDofMotion, anchor) -> np.ndarray:
    """Rigidly move points ``X`` (N x 3 or 3,) by ``m`` rotating about ``anchor``.

    The axial rotation theta_z is ignored: the hard-stop pair is circularly
    symmetric.
    """
    X = np.asarray(X, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    R = rodrigues_rotation(m.tilt)
    return (X - anchor) @ R.T + anchor + np.asarray(m.delta)


transform_stage_point = transform_points


# ---------------------------------------------------------------------------
# torus-cap surfaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TorusCapProfile:
    """Oblique-ellipse generating curve revolved about the z-axis.

    ``d_L``/``d_S`` are the major/minor axes, ``R_C`` the radial offset of the
    ellipse centre and ``theta_o`` the oblique inclination (rad).  The curve is
    parameterised by ``u`` in ``[R_C - d_L/2, R_C + d_L/2]``.

    For ``theta_o != 0`` the radial coordinate folds back over a thin sliver at
    one end of the ``u`` range.  Height-field queries use only the monotone part
    (``phi_range``), further limited by ``clip_diameter`` when set.
    """

    d_L: float
    d_S: float
    R_C: float
    theta_o: float = 0.0
    clip_diameter: float | None = None
    _phi: tuple[float, float] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vals = (self.d_L, self.d_S, self.R_C, self.theta_o)
        if not all(math.isfinite(float(v)) for v in vals):
            raise GeometryError("profile parameters must be finite")
        if self.d_L <= 0 or self.d_S <= 0:
            raise GeometryError("d_L and d_S must be positive")
        if self.R_C <= self.d_L / 2:
            raise GeometryError("R_C must exceed d_L/2")
        if abs(self.theta_o) >= math.pi / 2:
            raise GeometryError("|theta_o| must be below 90 deg")
        lo, hi = self._monotone_phi()
        apex = math.atan2(self.k, -math.sin(self.theta_o))
        if not lo < apex < hi:
            raise GeometryError("profile apex is not on the height-field part of the curve")
        if self.radius_phi(lo) <= 0:
            raise GeometryError("generating curve reaches a nonpositive radius")
        if self.clip_diameter is not None:
            rc = self.clip_diameter / 2
            if not self.radius_phi(lo) < rc:
                raise GeometryError("clip diameter removes the whole cap")
            if rc < self.radius_phi(hi):
                hi = self._phi_at_radius(rc, lo, hi)
        object.__setattr__(self, "_phi", (lo, hi))

    @property
    def a(self) -> float:
        return self.d_L / 2

    @property
    def k(self) -> float:
        return self.d_S / self.d_L

    @property
    def u_range(self) -> tuple[float, float]:
        return self.R_C - self.a, self.R_C + self.a

    @property
    def phi_range(self) -> tuple[float, float]:
        """Height-field (and clipped) part of the curve in the angle parameter."""
        return self._phi

    @property
    def radial_support(self) -> tuple[float, float]:
        lo, hi = self._phi
        return float(self.radius_phi(lo)), float(self.radius_phi(hi))

    def _monotone_phi(self) -> tuple[float, float]:
        # u - R_C = -a cos(phi); dX/dphi vanishes where tan(phi) = k tan(th)/cos(th)
        th = self.theta_o
        crit = math.atan(self.k * math.tan(th) / math.cos(th))
        if th > 0:
            return crit, math.pi
        if th < 0:
            return 0.0, math.pi + crit
        return 0.0, math.pi

    def _phi_at_radius(self, r, lo, hi):
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.radius_phi(mid) < r:
                lo = mid
            else:
                hi = mid
        return lo

    # the ellipse in its angle parameter: u - R_C = -a cos(phi)
    def radius_phi(self, phi):
        th = self.theta_o
        return (-self.a * np.cos(phi) * math.cos(th)
                - self.k * math.tan(th) * self.a * np.sin(phi) + self.R_C)

    def height_phi(self, phi):
        th = self.theta_o
        return -self.a * np.cos(phi) * math.sin(th) + self.k * self.a * np.sin(phi)

    def dradius_phi(self, phi):
        th = self.theta_o
        return (self.a * np.sin(phi) * math.cos(th)
                - self.k * math.tan(th) * self.a * np.cos(phi))

    def dheight_phi(self, phi):
        th = self.theta_o
        return self.a * np.sin(phi) * math.sin(th) + self.k * self.a * np.cos(phi)

    def point(self, u):
        """``(X'(u), Z'(u))`` for scalar or array ``u``."""
        u = np.asarray(u, dtype=float)
        lo, hi = self.u_range
        span = 1e-12 * max(1.0, abs(hi))
        if np.any(u < lo - span) or np.any(u > hi + span):
            raise GeometryError(f"u outside [{lo}, {hi}]")
        t = u - self.R_C
        root = np.sqrt(np.clip(self.a**2 - t * t, 0.0, None))
        th = self.theta_o
        r = t * math.cos(th) - self.k * math.tan(th) * root + self.R_C
        z = t * math.sin(th) + self.k * root
        if r.ndim == 0:
            return float(r), float(z)
        return r, z

    def height_at(self, r):
        """Height of the curve above radius ``r`` (NaN outside the radial support).

        Newton iterations on the monotone angle parameter, seeded from a
        tabulated inverse.
        """
        r = np.asarray(r, dtype=float)
        phis, radii, _ = self._table
        inside = (r >= radii[0]) & (r <= radii[-1])
        phi = np.interp(r, radii, phis)
        lo, hi = self._phi
        with np.errstate(divide="ignore", invalid="ignore"):
            for _ in range(4):
                step = (self.radius_phi(phi) - r) / self.dradius_phi(phi)
                step = np.where(np.isfinite(step), step, 0.0)
                phi = np.clip(phi - step, lo, hi)
        return np.where(inside, self.height_phi(phi), np.nan)

    @property
    def _table(self):
        cached = self.__dict__.get("_table_cache")
        if cached is None:
            lo, hi = self._phi
            phis = np.linspace(lo, hi, 4097)
            cached = (phis, self.radius_phi(phis), self.height_phi(phis))
            object.__setattr__(self, "_table_cache", cached)
        return cached

    def height_fast(self, r):
        """Height from a dense chord table; chord sag is below 1e-8 mm for mm-scale caps."""
        cached = self.__dict__.get("_dense_cache")
        if cached is None:
            lo, hi = self._phi
            phis = np.linspace(lo, hi, 65537)
            cached = (self.radius_phi(phis), self.height_phi(phis))
            object.__setattr__(self, "_dense_cache", cached)
        radii, heights = cached
        return np.interp(r, radii, heights, left=np.nan, right=np.nan)

    def arc_length(self) -> float:
        phis, r, z = self._table
        return float(np.sum(np.hypot(np.diff(r), np.diff(z))))


def profile_point(p: TorusCapProfile, u: float) -> tuple[float, float]:
    return p.point(u)


def surface_point(p: TorusCapProfile, u: float, v: float) -> np.ndarray:
    if not 0.0 <= v < 2 * math.pi:
        raise GeometryError("v must lie in [0, 2pi)")
    r, z = p.point(u)
    return np.array([r * math.cos(v), r * math.sin(v), z])


@dataclass(frozen=True)
class SurfaceSample:
    points: np.ndarray
    density: float
    area: float

    def __len__(self) -> int:
        return len(self.points)


def sample_surface(p: TorusCapProfile, density: float = 64.0, min_points: int = 50_000,
                   z_offset: float = 0.0) -> SurfaceSample:
    """Particle sampling of the (clipped) cap on a structured (arc, azimuth) grid.

    Rings are equally spaced in arc length, including both end rims; each ring
    has a point count proportional to its radius.  The spacing ``h`` is set so
    that every point represents at most ``h**2`` of area, and shrunk further when
    needed to reach ``min_points``.
    """
    if not density > 0:
        raise GeometryError("density must be positive")
    phis, r, z = p._table
    seg = np.hypot(np.diff(r), np.diff(z))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    length = s[-1]
    area = float(np.sum(np.pi * (r[1:] + r[:-1]) * seg))
    if length <= 0 or area <= 0:
        raise GeometryError("degenerate profile")
    eff = max(density, min_points / area)
    h = 1.0 / math.sqrt(eff)
    while True:
        n_s = int(math.ceil(length / h))
        s_nodes = np.linspace(0.0, length, n_s + 1)
        phi_nodes = np.interp(s_nodes, s, phis)
        rr = p.radius_phi(phi_nodes)
        zz = p.height_phi(phi_nodes)
        counts = np.maximum(np.ceil(2 * np.pi * rr / h).astype(int), 8)
        total = int(counts.sum())
        if total >= min_points:
            break
        h *= 0.98
    v = np.concatenate([np.arange(c) * (2 * np.pi / c) for c in counts])
    rad = np.repeat(rr, counts)
    pts = np.column_stack([rad * np.cos(v), rad * np.sin(v), np.repeat(zz, counts) + z_offset])
    return SurfaceSample(pts, total / area, area)


sample_stage_surface = sample_surface


@dataclass(frozen=True)
class HardStopPair:
    """Stage cap above a ground cap.

    Frame: ground ellipse centre at z = 0, stage ellipse centre at ``z_ab``,
    rotation anchor on the axis at ``z_ab + z_oa``; the load point sits ``z_Lo``
    above the anchor.
    """

    stage: TorusCapProfile
    ground: TorusCapProfile
    z_ab: float
    z_oa: float
    z_Lo: float = 9.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.z_ab, self.z_oa, self.z_Lo)):
            raise GeometryError("vertical offsets must be finite")
        gap = self.nominal_gap()
        if not gap > 0:
            raise GeometryError(f"stage and ground overlap at zero motion (gap {gap:.6g} mm)")

    @property
    def anchor(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.z_ab + self.z_oa])

    def nominal_gap(self, n: int = 20001) -> float:
        """Minimum vertical clearance between the caps at zero motion."""
        lo, hi = self.stage.phi_range
        phi = np.linspace(lo, hi, n)
        r = self.stage.radius_phi(phi)
        z = self.stage.height_phi(phi) + self.z_ab
        zg = self.ground.height_at(r)
        ok = np.isfinite(zg)
        if not ok.any():
            return math.inf
        return float(np.min(z[ok] - zg[ok]))
