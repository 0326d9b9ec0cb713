"""Pointing-directive geometry, perception stand-ins and robot reach simulation."""

from .geometry import (
    PointingFeature,
    Ray,
    RigidTransform,
    angles_from_direction,
    compose,
    direction_from_angles,
    floor_distance,
    invert,
    pointing_error,
    project_to_floor_line,
    resolve_target,
    transform_direction,
    transform_point,
)

__version__ = "0.1.0"

__all__ = [
    "PointingFeature",
    "Ray",
    "RigidTransform",
    "angles_from_direction",
    "compose",
    "direction_from_angles",
    "floor_distance",
    "invert",
    "pointing_error",
    "project_to_floor_line",
    "resolve_target",
    "transform_direction",
    "transform_point",
]
