"""Transducer poses: 3D position in tracker millimeters plus a unit quaternion.

Quaternions are (qw, qx, qy, qz), scalar first. The probe frame packed into
the rotation matrix columns is: x lateral (image columns), y elevation
(plane normal), z beam direction (image rows, pointing into the tissue).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# NDI tracker working volume bounds (mm)
TRACKER_MAX_X = 250.0
TRACKER_MAX_Y = 250.0
TRACKER_MAX_Z = 500.0

UNIT_NORM_TOL = 1e-6


class PoseError(ValueError):
    """Pose outside the tracker volume or quaternion not unit."""


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = math.sqrt(float(q @ q))
    if n == 0.0:
        raise PoseError("zero quaternion cannot be normalized")
    q = q / n
    if q[0] < 0.0:  # canonical sign
        q = -q
    return q


def quat_multiply(a, b) -> np.ndarray:
    aw, ax, ay, az = np.asarray(a, dtype=np.float64)
    bw, bx, by, bz = np.asarray(b, dtype=np.float64)
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_from_axis_angle(axis, angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / math.sqrt(float(axis @ axis))
    h = 0.5 * angle_rad
    return np.concatenate(([math.cos(h)], math.sin(h) * axis))


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=np.float64)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_matrix(r) -> np.ndarray:
    """Shepperd's method, branch on the largest diagonal term."""
    r = np.asarray(r, dtype=np.float64)
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (r[2, 1] - r[1, 2]) / s,
                      (r[0, 2] - r[2, 0]) / s,
                      (r[1, 0] - r[0, 1]) / s])
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array([(r[2, 1] - r[1, 2]) / s,
                      0.25 * s,
                      (r[0, 1] + r[1, 0]) / s,
                      (r[0, 2] + r[2, 0]) / s])
    elif r[1, 1] >= r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array([(r[0, 2] - r[2, 0]) / s,
                      (r[0, 1] + r[1, 0]) / s,
                      0.25 * s,
                      (r[1, 2] + r[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array([(r[1, 0] - r[0, 1]) / s,
                      (r[0, 2] + r[2, 0]) / s,
                      (r[1, 2] + r[2, 1]) / s,
                      0.25 * s])
    return quat_normalize(q)


@dataclass(frozen=True)
class Pose:
    """Tracker reading: position (mm) and orientation as a unit quaternion."""

    position: tuple[float, float, float]
    orientation: tuple[float, float, float, float]

    def __post_init__(self):
        x, y, z = self.position
        if abs(x) > TRACKER_MAX_X or abs(y) > TRACKER_MAX_Y or not (0.0 <= z <= TRACKER_MAX_Z):
            raise PoseError(f"position {self.position} outside tracker volume")
        q = np.asarray(self.orientation, dtype=np.float64)
        if abs(float(q @ q) - 1.0) > 2.0 * UNIT_NORM_TOL:
            raise PoseError(f"quaternion norm {math.sqrt(float(q @ q)):.8f} is not unit")

    @classmethod
    def create(cls, position, orientation) -> "Pose":
        """Build a pose, renormalizing a quaternion that is close to unit."""
        q = np.asarray(orientation, dtype=np.float64)
        n = math.sqrt(float(q @ q))
        if abs(n - 1.0) > 1e-3:
            raise PoseError(f"quaternion norm {n:.6f} too far from unit to renormalize")
        q = quat_normalize(q)
        pos = tuple(float(p) for p in position)
        return cls(position=pos, orientation=tuple(float(c) for c in q))

    def as_array(self) -> np.ndarray:
        """[qw, qx, qy, qz, x, y, z] raw, unscaled."""
        return np.concatenate([np.asarray(self.orientation), np.asarray(self.position)])

    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)


def _ellipsoid_normal(p, semi_axes) -> np.ndarray:
    a, b, c = semi_axes
    n = np.array([p[0] / a**2, p[1] / b**2, p[2] / c**2])
    return n / math.sqrt(float(n @ n))


def surface_pose(u_deg: float, v_deg: float, tilt_deg: float, roll_deg: float, spec) -> Pose:
    """Pose on the upper half-ellipsoid with the beam pointing inward.

    u is the polar angle from the apex (0..90 degrees), v the azimuth. Tilt
    rocks the probe about its lateral axis, roll spins it about the beam.
    """
    if not (0.0 <= u_deg <= 90.0):
        raise PoseError(f"u={u_deg} outside [0, 90] degrees")
    if abs(tilt_deg) > 45.0:
        raise PoseError(f"tilt={tilt_deg} outside +-45 degrees")
    a, b, c = spec.surface_semi_axes
    u = math.radians(u_deg)
    v = math.radians(v_deg)
    pos = np.array([a * math.sin(u) * math.cos(v),
                    b * math.sin(u) * math.sin(v),
                    c * math.cos(u)])

    beam = -_ellipsoid_normal(pos, (a, b, c))
    ref = np.array([1.0, 0.0, 0.0])
    lat = ref - (ref @ beam) * beam
    if float(lat @ lat) < 1e-12:
        ref = np.array([0.0, 1.0, 0.0])
        lat = ref - (ref @ beam) * beam
    lat = lat / math.sqrt(float(lat @ lat))

    q = quat_from_matrix(np.column_stack([lat, np.cross(beam, lat), beam]))
    q = quat_multiply(q, quat_from_axis_angle([1.0, 0.0, 0.0], math.radians(tilt_deg)))
    q = quat_multiply(q, quat_from_axis_angle([0.0, 0.0, 1.0], math.radians(roll_deg)))
    return Pose(position=tuple(pos), orientation=tuple(quat_normalize(q)))
