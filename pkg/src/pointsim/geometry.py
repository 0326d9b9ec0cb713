"""Pointing geometry: direction vectors, rigid frames, line distance and floor targets.

Conventions used throughout the package:

* Lengths are millimeters. Angles are radians inside the library and degrees in
  every file or CLI surface.
* Camera and robot frames are right-handed with z up. The camera x axis looks
  forward. Yaw ``gamma`` rotates about z; pitch ``beta`` is the angle between
  the finger axis and the horizontal plane, positive when pointing down.
* The robot frame origin sits above the robot's ground-projected center at the
  camera-mount height ``h``, so the floor is the plane ``z = -h``.

Every operation accepts either single vectors of shape ``(3,)`` or batches of
shape ``(n, 3)`` and broadcasts like numpy does.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNIT_TOL = 1e-9
DEGENERATE_TOL = 1e-6
ZERO_DIRECTION_TOL = 1e-12
VERTICAL_TOL = 1e-9


class GeometryError(ValueError):
    """Base class for geometric domain errors."""


class DomainError(GeometryError):
    pass


class DegenerateDirectionError(GeometryError):
    pass


class ZeroDirectionError(GeometryError):
    pass


class NoFloorIntersectionError(GeometryError):
    pass


class BelowFloorError(GeometryError):
    pass


class DegenerateProjectionError(GeometryError):
    pass


def vec3(x, y=None, z=None) -> np.ndarray:
    """Build a finite float vector from ``(x, y, z)`` or a 3-sequence."""
    if y is None and z is None:
        v = np.asarray(x, dtype=float)
    else:
        v = np.array([x, y, z], dtype=float)
    if v.shape[-1] != 3:
        raise ValueError(f"expected trailing dimension 3, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector components must be finite")
    return v


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n <= ZERO_DIRECTION_TOL):
        raise ZeroDirectionError("cannot normalize a zero-length vector")
    return v / n


def cross(a, b) -> np.ndarray:
    """Cross product along the last axis; much cheaper than ``np.cross`` for single vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.stack([
        a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
        a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
        a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
    ], axis=-1)


def norm(v):
    n = np.sqrt(np.sum(np.square(v), axis=-1))
    return float(n) if np.ndim(n) == 0 else n


def is_unit(v, tol: float = UNIT_TOL) -> bool:
    return bool(np.all(np.abs(np.linalg.norm(v, axis=-1) - 1.0) <= tol))


@dataclass(frozen=True, eq=False)
class PointingFeature:
    """Finger position (mm, camera frame) with pitch ``beta`` and yaw ``gamma`` in radians."""

    p: np.ndarray
    beta: float
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "p", vec3(self.p))
        if not (np.isfinite(self.beta) and np.isfinite(self.gamma)):
            raise ValueError("angles must be finite")
        if abs(self.beta) >= np.pi / 2:
            raise DomainError(f"|beta| must be below 90 deg, got {np.degrees(self.beta):.3f}")
        if abs(self.gamma) > np.pi + 1e-12:
            raise DomainError(f"|gamma| must be at most 180 deg, got {np.degrees(self.gamma):.3f}")

    @classmethod
    def from_degrees(cls, p, beta_deg: float, gamma_deg: float) -> "PointingFeature":
        return cls(vec3(p), float(np.radians(beta_deg)), float(np.radians(gamma_deg)))

    @property
    def beta_deg(self) -> float:
        return float(np.degrees(self.beta))

    @property
    def gamma_deg(self) -> float:
        return float(np.degrees(self.gamma))

    @property
    def direction(self) -> np.ndarray:
        return direction_from_angles(self.beta, self.gamma)

    def isclose(self, other: "PointingFeature", atol: float = 1e-9) -> bool:
        return (
            bool(np.allclose(self.p, other.p, atol=atol, rtol=0))
            and abs(self.beta - other.beta) <= atol
            and abs(wrap_angle(self.gamma - other.gamma)) <= atol
        )

    def __repr__(self) -> str:
        x, y, z = self.p
        return (
            f"PointingFeature(p=({x:.1f}, {y:.1f}, {z:.1f}) mm, "
            f"beta={self.beta_deg:.2f} deg, gamma={self.gamma_deg:.2f} deg)"
        )


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Proper rigid motion ``p -> R p + t``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = vec3(self.translation)
        if R.shape != (3, 3) or not np.all(np.isfinite(R)):
            raise ValueError("rotation must be a finite 3x3 matrix")
        if not np.allclose(R.T @ R, np.eye(3), atol=UNIT_TOL, rtol=0):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > UNIT_TOL:
            raise ValueError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_translation(cls, t) -> "RigidTransform":
        return cls(np.eye(3), vec3(t))

    @classmethod
    def from_yaw(cls, yaw: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        """Rotation by ``yaw`` radians about z, followed by ``translation``."""
        c, s = np.cos(yaw), np.sin(yaw)
        R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return cls(R, vec3(translation))

    @classmethod
    def from_matrix(cls, m) -> "RigidTransform":
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4) or not np.allclose(m[3], [0, 0, 0, 1]):
            raise ValueError("expected a 4x4 homogeneous matrix")
        return cls(m[:3, :3], m[:3, 3])

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)


@dataclass(frozen=True, eq=False)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", vec3(self.origin))
        d = vec3(self.direction)
        if not is_unit(d):
            raise ValueError("ray direction must be a unit vector")
        object.__setattr__(self, "direction", d)

    def at(self, t) -> np.ndarray:
        return self.origin + np.multiply.outer(np.asarray(t, dtype=float), self.direction)


def wrap_angle(a):
    """Wrap radians into ``(-pi, pi]``."""
    a = np.asarray(a, dtype=float)
    # leave in-range values untouched so wrapping is exact when nothing moves
    w = np.where((a > -np.pi) & (a <= np.pi), a, np.pi - np.mod(np.pi - a, 2 * np.pi))
    return float(w) if np.ndim(w) == 0 else w


def direction_from_angles(beta, gamma) -> np.ndarray:
    """Unit pointing vector ``(cos g cos b, sin g cos b, -sin b)``."""
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(np.abs(beta) >= np.pi / 2):
        raise DomainError("pitch magnitude must be below 90 degrees")
    cb = np.cos(beta)
    return np.stack([np.cos(gamma) * cb, np.sin(gamma) * cb, -np.sin(beta)], axis=-1)


def angles_from_direction(v):
    """Inverse of :func:`direction_from_angles`; returns ``(beta, gamma)`` in radians."""
    v = np.asarray(v, dtype=float)
    if not is_unit(v):
        raise ValueError("direction must be a unit vector")
    horiz = np.hypot(v[..., 0], v[..., 1])
    if np.any(horiz <= VERTICAL_TOL):
        raise DegenerateDirectionError("yaw is undefined for vertical directions")
    beta = np.arctan2(-v[..., 2], horiz)
    gamma = np.arctan2(v[..., 1], v[..., 0])
    if np.ndim(beta) == 0:
        return float(beta), float(gamma)
    return beta, gamma


def transform_point(A: RigidTransform, p) -> np.ndarray:
    return np.asarray(p, dtype=float) @ A.rotation.T + A.translation


def transform_direction(A: RigidTransform, v) -> np.ndarray:
    # Directions take the rotation only; translating a unit vector is meaningless.
    return np.asarray(v, dtype=float) @ A.rotation.T


def compose(A: RigidTransform, B: RigidTransform) -> RigidTransform:
    """Transform equivalent to applying ``B`` first, then ``A``."""
    return RigidTransform(A.rotation @ B.rotation, A.rotation @ B.translation + A.translation)


def invert(A: RigidTransform) -> RigidTransform:
    Rt = A.rotation.T
    return RigidTransform(Rt, -Rt @ A.translation)


def pointing_error(g, p_k, v_k):
    """Distance from ``g`` to the line through ``p_k`` along ``v_k``.

    ``v_k`` need not be normalized. Works on batches.
    """
    g = np.asarray(g, dtype=float)
    p_k = np.asarray(p_k, dtype=float)
    v_k = np.asarray(v_k, dtype=float)
    vn = norm(v_k)
    if np.any(vn <= ZERO_DIRECTION_TOL):
        raise ZeroDirectionError("pointing direction has zero length")
    return norm(cross(g - p_k, v_k)) / vn


def floor_distance(p_r, x_r, h):
    """Distance along ``x_r`` from ``p_r`` to the floor plane ``z = -h``."""
    p_r = np.asarray(p_r, dtype=float)
    x_r = np.asarray(x_r, dtype=float)
    xz = x_r[..., 2]
    height = p_r[..., 2] + h
    if np.any(xz >= -DEGENERATE_TOL):
        raise NoFloorIntersectionError("pointing direction does not descend toward the floor")
    if np.any(height <= 0):
        raise BelowFloorError("finger position is on or below the floor")
    d = -height / xz
    return float(d) if np.ndim(d) == 0 else d


def resolve_target(p_r, x_r, h) -> np.ndarray:
    """Floor point hit by the pointing ray, in the robot frame."""
    p_r = np.asarray(p_r, dtype=float)
    x_r = np.asarray(x_r, dtype=float)
    d = np.asarray(floor_distance(p_r, x_r, h))
    return p_r + x_r * d[..., None]


def project_to_floor_line(p_r, x_r, h) -> Ray:
    """Horizontal ray on the floor below the finger, along the pointing heading."""
    p_r = vec3(p_r)
    x_r = vec3(x_r)
    horiz = np.array([x_r[0], x_r[1], 0.0])
    if np.hypot(horiz[0], horiz[1]) <= VERTICAL_TOL:
        raise DegenerateProjectionError("vertical pointing has no floor heading")
    return Ray(np.array([p_r[0], p_r[1], -float(h)]), horiz / np.linalg.norm(horiz))
