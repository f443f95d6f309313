"""Manifold geometry: point/tangent types and the operation interface."""

from .base import (
    GeometryError,
    ManifoldKind,
    ManifoldPoint,
    TangentVec,
    circle,
    dist,
    euclidean,
    exp_map,
    gaussian_tangent,
    hyperboloid,
    inner,
    log_map,
    norm,
    origin,
    orthonormal_frame,
    point,
    project_ball,
    spd,
    tangent,
    transport,
)
from .constcurv import minkowski_inner, wrap_angle

__all__ = [
    "GeometryError",
    "ManifoldKind",
    "ManifoldPoint",
    "TangentVec",
    "circle",
    "dist",
    "euclidean",
    "exp_map",
    "gaussian_tangent",
    "hyperboloid",
    "inner",
    "log_map",
    "minkowski_inner",
    "norm",
    "origin",
    "orthonormal_frame",
    "point",
    "project_ball",
    "spd",
    "tangent",
    "transport",
    "wrap_angle",
]
