"""Hard-stop workspace analysis for compliant mechanisms.

Contact boundaries of torus-cap hard-stop pairs, stress-based safe spaces,
their volume comparison, shape search and overload engagement simulation.
"""

from .contact import (ContactAnalysis, NonConvexRayWarning, ZeroClearanceError,
                      contact_boundary_field, contact_radius_along_ray, min_clearance,
                      point_to_profile_distance)
from .engage import (EngagementRecord, SimulationError, apply_surge, boundary_peak_stress,
                     engagement_intervals, simulate_engagement, simulate_free,
                     surge_envelope, synthetic_trajectory, trajectory_from_loads)
from .fields import (DirectionGrid, FieldError, GridMismatchError, RadialBoundaryField,
                     UnboundedVolumeError)
from .geometry import (GeometryError, HardStopPair, SixDofMotion, SurfaceSample,
                       TorusCapProfile, WorkspaceVector, compose_motion, decompose_motion,
                       rodrigues_rotation, sample_surface, transform_points)
from .optimizer import (DesignVariables, HardStopBuilder, OptimizationProblem,
                        OptimizationResult, OptimizationSetupError, StressTarget, optimize,
                        penalty_objective)
from .spaces import (SpaceMetrics, contains_point, field_volume, orthotope_field,
                     space_metrics, trajectory_containment, volume_fraction)
from .stress import (BaseStressError, CantileverBeam, ComplianceMatrix, LinearSuperposition,
                     OutOfHullError, Radial, StressModel, StressThresholds, Tabulated,
                     compliance_map, eval_stress, load_tabulated_grid, safe_boundary_field,
                     safe_radius_along_ray)
from .trajectory import Trajectory, TrajectoryError, TrajectorySample, read_trajectory

__version__ = "0.1.0"
