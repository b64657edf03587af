"""Small planar/3D geometry helpers shared by the simulator and the caregiver."""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a > math.pi:
        a -= TWO_PI
    elif a <= -math.pi:
        a += TWO_PI
    return a


def forward_vec(yaw: float) -> np.ndarray:
    """Unit forward direction in the floor plane (x, z). yaw=0 faces +z."""
    return np.array([math.sin(yaw), math.cos(yaw)])


def bearing(from_pos, yaw: float, to_pos) -> float:
    """Signed angle from the facing direction at `from_pos` to `to_pos`.

    Increasing yaw rotates the forward vector from +z toward +x, so a positive
    bearing means yaw must increase to face the target. Coincident points
    return 0.
    """
    dx = to_pos[0] - from_pos[0]
    dz = to_pos[1] - from_pos[1]
    if dx == 0.0 and dz == 0.0:
        return 0.0
    return wrap_angle(math.atan2(dx, dz) - yaw)


def in_fov(observer_pos, observer_yaw: float, target_pos, half_angle: float) -> bool:
    """True iff `target_pos` lies inside the observer's forward cone.

    This is the single shared field-of-view predicate used both by the infant's
    observation function and by the caregiver's "infant looks at me" checks.
    """
    return abs(bearing(observer_pos, observer_yaw, target_pos)) <= half_angle


def point_segment_closest(p: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Closest point on segment ab to point p; returns (point, param t in [0,1])."""
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom <= 0.0:
        return a.copy(), 0.0
    t = float(np.dot(p - a, ab)) / denom
    t = min(1.0, max(0.0, t))
    return a + t * ab, t
