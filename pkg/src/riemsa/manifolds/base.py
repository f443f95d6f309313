"""Manifold interface: point/tangent types and geometry operations.

Four geometries are supported: flat Euclidean space, the SPD cone with
its affine-invariant metric, the hyperboloid model of hyperbolic space,
and the unit circle (the compact testbed).  Points and tangent vectors
are immutable values; every operation is a pure function of its inputs,
with randomness passed in as an explicit ``numpy.random.Generator``.

Coordinate conventions:

* euclidean(d): points and tangents are length-d arrays.
* spd(d): points are d x d symmetric positive definite matrices,
  tangents are d x d symmetric matrices.
* hyperboloid(d): points are length-(d+1) arrays on the sheet
  ``<x, x>_M = -1``, ``x_0 > 0``; tangents are Minkowski-orthogonal
  to the base point.
* circle: points are length-1 arrays holding an angle in (-pi, pi];
  tangents are length-1 arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GeometryError",
    "ManifoldKind",
    "ManifoldPoint",
    "TangentVec",
    "euclidean",
    "spd",
    "hyperboloid",
    "circle",
    "point",
    "tangent",
    "origin",
    "exp_map",
    "log_map",
    "dist",
    "inner",
    "norm",
    "transport",
    "project_ball",
    "gaussian_tangent",
    "orthonormal_frame",
]

_KIND_NAMES = ("euclidean", "spd", "hyperboloid", "circle")


class GeometryError(ValueError):
    """Malformed coordinates, mismatched bases, or unsupported operations."""


@dataclass(frozen=True)
class ManifoldKind:
    """Tag selecting one of the supported geometries.

    ``dim`` is the ambient dimension parameter d; the intrinsic dimension
    is d, d(d+1)/2, d and 1 for euclidean, spd, hyperboloid and circle.
    """

    name: str
    dim: int

    def __post_init__(self) -> None:
        if self.name not in _KIND_NAMES:
            raise GeometryError(f"unknown manifold kind {self.name!r}")
        if self.dim < 1:
            raise GeometryError("dimension parameter must be >= 1")
        if self.name == "circle" and self.dim != 1:
            raise GeometryError("circle has no dimension parameter")

    @property
    def intrinsic_dim(self) -> int:
        if self.name == "spd":
            return self.dim * (self.dim + 1) // 2
        if self.name == "circle":
            return 1
        return self.dim

    @property
    def coord_shape(self) -> tuple[int, ...]:
        if self.name == "spd":
            return (self.dim, self.dim)
        if self.name == "hyperboloid":
            return (self.dim + 1,)
        if self.name == "circle":
            return (1,)
        return (self.dim,)

    @property
    def is_hadamard(self) -> bool:
        return self.name != "circle"

    @property
    def curvature_bound(self) -> float:
        """Default constant kappa with sectional curvature >= -kappa^2.

        The SPD value 1/sqrt(2) is a conservative documented constant for
        the affine-invariant metric; bound evaluators accept an override.
        """
        if self.name == "hyperboloid":
            return 1.0
        if self.name == "spd":
            return 1.0 / np.sqrt(2.0)
        return 0.0


def euclidean(dim: int) -> ManifoldKind:
    return ManifoldKind("euclidean", dim)


def spd(dim: int) -> ManifoldKind:
    return ManifoldKind("spd", dim)


def hyperboloid(dim: int) -> ManifoldKind:
    return ManifoldKind("hyperboloid", dim)


def circle() -> ManifoldKind:
    return ManifoldKind("circle", 1)


def _freeze(coords: np.ndarray, copy: bool) -> np.ndarray:
    if copy:
        out = np.array(coords, dtype=float)
    else:
        # trusted internal call sites hand over freshly created arrays
        out = np.asarray(coords, dtype=float)
    if out.flags.writeable:
        out.flags.writeable = False
    return out


class ManifoldPoint:
    """A point on one of the supported manifolds (immutable)."""

    __slots__ = ("kind", "coords", "_cache")

    def __init__(self, kind: ManifoldKind, coords: np.ndarray, *, validate: bool = True):
        coords = _freeze(coords, copy=validate)
        if coords.shape != kind.coord_shape:
            raise GeometryError(
                f"{kind.name} point needs coords of shape {kind.coord_shape}, "
                f"got {coords.shape}"
            )
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "_cache", None)
        if validate:
            _validate_point(self)

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("ManifoldPoint is immutable")

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        return (
            isinstance(other, ManifoldPoint)
            and self.kind == other.kind
            and np.array_equal(self.coords, other.coords)
        )

    def __hash__(self) -> int:
        return hash((self.kind, self.coords.tobytes()))

    def __repr__(self) -> str:
        return f"ManifoldPoint({self.kind.name}, {np.array2string(self.coords, precision=6)})"

    def __reduce__(self):
        return (_rebuild_point, (self.kind, np.asarray(self.coords)))


class TangentVec:
    """A tangent vector anchored at a base point, same ambient layout."""

    __slots__ = ("base", "coords")

    def __init__(self, base: ManifoldPoint, coords: np.ndarray, *, validate: bool = True):
        coords = _freeze(coords, copy=validate)
        if coords.shape != base.kind.coord_shape:
            raise GeometryError(
                f"tangent coords shape {coords.shape} does not match "
                f"{base.kind.name} layout {base.kind.coord_shape}"
            )
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "coords", coords)
        if validate:
            _validate_tangent(self)

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("TangentVec is immutable")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TangentVec)
            and self.base == other.base
            and np.array_equal(self.coords, other.coords)
        )

    def __repr__(self) -> str:
        return f"TangentVec(base={self.base!r}, {np.array2string(self.coords, precision=6)})"

    def __reduce__(self):
        return (_rebuild_tangent, (self.base, np.asarray(self.coords)))

    def __add__(self, other: "TangentVec") -> "TangentVec":
        if not isinstance(other, TangentVec) or other.base != self.base:
            raise GeometryError("can only add tangent vectors at the same base point")
        return TangentVec(self.base, self.coords + other.coords, validate=False)

    def __sub__(self, other: "TangentVec") -> "TangentVec":
        if not isinstance(other, TangentVec) or other.base != self.base:
            raise GeometryError("can only subtract tangent vectors at the same base point")
        return TangentVec(self.base, self.coords - other.coords, validate=False)

    def __mul__(self, scalar: float) -> "TangentVec":
        return TangentVec(self.base, self.coords * float(scalar), validate=False)

    __rmul__ = __mul__


def _rebuild_point(kind: ManifoldKind, coords: np.ndarray) -> ManifoldPoint:
    return ManifoldPoint(kind, coords, validate=False)


def _rebuild_tangent(base: ManifoldPoint, coords: np.ndarray) -> TangentVec:
    return TangentVec(base, coords, validate=False)


def point(kind: ManifoldKind, coords) -> ManifoldPoint:
    """Validating constructor for :class:`ManifoldPoint`."""
    return ManifoldPoint(kind, np.asarray(coords, dtype=float))


def tangent(base: ManifoldPoint, coords) -> TangentVec:
    """Validating constructor for :class:`TangentVec`."""
    return TangentVec(base, np.asarray(coords, dtype=float))


def origin(kind: ManifoldKind) -> ManifoldPoint:
    """Canonical base point: 0, I, (1, 0, ..., 0) or angle 0."""
    if kind.name == "spd":
        return ManifoldPoint(kind, np.eye(kind.dim), validate=False)
    if kind.name == "hyperboloid":
        coords = np.zeros(kind.dim + 1)
        coords[0] = 1.0
        return ManifoldPoint(kind, coords, validate=False)
    return ManifoldPoint(kind, np.zeros(kind.coord_shape), validate=False)


# -- validation ---------------------------------------------------------

def _validate_point(p: ManifoldPoint) -> None:
    c = p.coords
    if not np.all(np.isfinite(c)):
        raise GeometryError("point has non-finite coordinates")
    name = p.kind.name
    if name == "spd":
        spd_ops.validate_point(c)
    elif name == "hyperboloid":
        constcurv.validate_hyperboloid_point(c)
    elif name == "circle":
        constcurv.validate_angle(c[0])


def _validate_tangent(v: TangentVec) -> None:
    c = v.coords
    if not np.all(np.isfinite(c)):
        raise GeometryError("tangent has non-finite coordinates")
    name = v.base.kind.name
    if name == "spd":
        spd_ops.validate_tangent(c)
    elif name == "hyperboloid":
        constcurv.validate_hyperboloid_tangent(v.base.coords, c)


def _require_same_manifold(p: ManifoldPoint, q: ManifoldPoint) -> None:
    if p.kind != q.kind:
        raise GeometryError(f"points live on different manifolds: {p.kind} vs {q.kind}")


def _require_base(v: TangentVec, p: ManifoldPoint) -> None:
    if v.base != p:
        raise GeometryError("tangent vector is anchored at a different base point")


# -- dispatched operations ----------------------------------------------

def exp_map(p: ManifoldPoint, v: TangentVec) -> ManifoldPoint:
    """Riemannian exponential: follow the geodesic from p with velocity v.

    The result is renormalized onto the manifold (re-symmetrization for
    SPD, sheet rescaling for the hyperboloid, angle wrapping for the
    circle) to bound floating-point drift over long chains.
    """
    _require_base(v, p)
    if not np.any(v.coords):
        return p  # zero velocity: stay put, exactly
    kind = p.kind
    if kind.name == "euclidean":
        out = p.coords + v.coords
    elif kind.name == "spd":
        out = spd_ops.exp(p, v.coords)
    elif kind.name == "hyperboloid":
        out = constcurv.hyperboloid_exp(p.coords, v.coords)
    else:
        out = constcurv.circle_exp(p.coords, v.coords)
    return ManifoldPoint(kind, out, validate=False)


def log_map(p: ManifoldPoint, q: ManifoldPoint) -> TangentVec:
    """Inverse exponential: the initial velocity of the geodesic p -> q.

    Rejected for exact antipodes on the circle (cut locus).
    """
    _require_same_manifold(p, q)
    kind = p.kind
    if kind.name == "euclidean":
        out = q.coords - p.coords
    elif kind.name == "spd":
        out = spd_ops.log(p, q.coords)
    elif kind.name == "hyperboloid":
        out = constcurv.hyperboloid_log(p.coords, q.coords)
    else:
        out = constcurv.circle_log(p.coords, q.coords)
    return TangentVec(p, out, validate=False)


def dist(p: ManifoldPoint, q: ManifoldPoint) -> float:
    """Geodesic distance between two points on the same manifold."""
    _require_same_manifold(p, q)
    if p is q:
        return 0.0
    kind = p.kind
    if kind.name == "euclidean":
        return float(np.linalg.norm(q.coords - p.coords))
    if kind.name == "spd":
        return spd_ops.distance(p, q.coords)
    if kind.name == "hyperboloid":
        return constcurv.hyperboloid_dist(p.coords, q.coords)
    return constcurv.circle_dist(p.coords, q.coords)


def inner(p: ManifoldPoint, u: TangentVec, v: TangentVec) -> float:
    """Riemannian inner product of two tangent vectors at p."""
    _require_base(u, p)
    _require_base(v, p)
    kind = p.kind
    if kind.name == "spd":
        return spd_ops.metric(p, u.coords, v.coords)
    if kind.name == "hyperboloid":
        return constcurv.minkowski_inner(u.coords, v.coords)
    return float(np.dot(u.coords, v.coords))


def norm(p: ManifoldPoint, v: TangentVec) -> float:
    """Metric norm ||v||_p = sqrt(inner(p, v, v))."""
    return float(np.sqrt(max(0.0, inner(p, v, v))))


def transport(p: ManifoldPoint, q: ManifoldPoint, v: TangentVec) -> TangentVec:
    """Parallel transport of v along the geodesic from p to q."""
    _require_base(v, p)
    _require_same_manifold(p, q)
    kind = p.kind
    if kind.name == "euclidean":
        out = v.coords
    elif kind.name == "spd":
        out = spd_ops.parallel_transport(p, q, v.coords)
    elif kind.name == "hyperboloid":
        out = constcurv.hyperboloid_transport(p.coords, q.coords, v.coords)
    else:
        constcurv.circle_log(p.coords, q.coords)  # rejects antipodes
        out = v.coords
    return TangentVec(q, out, validate=False)


def project_ball(center: ManifoldPoint, radius: float, p: ManifoldPoint) -> ManifoldPoint:
    """Metric projection onto the closed geodesic ball around ``center``.

    Only defined on the Hadamard kinds, where the closed ball is
    geodesically convex and the projection is a contraction.
    """
    if not center.kind.is_hadamard:
        raise GeometryError("geodesic-ball projection is not supported on the circle")
    if radius <= 0:
        raise GeometryError("projection radius must be > 0")
    _require_same_manifold(center, p)
    d = dist(center, p)
    # relative slack keeps re-projection of an already-projected point exact
    if d <= radius * (1.0 + 1e-12):
        return p
    return exp_map(center, (radius / d) * log_map(center, p))


def gaussian_tangent(
    p: ManifoldPoint, scale: float, rng: np.random.Generator
) -> TangentVec:
    """Isotropic Gaussian tangent draw at p.

    In any orthonormal frame at p the coordinates are i.i.d.
    N(0, scale^2), so E||v||_p^2 = scale^2 * intrinsic_dim.
    """
    if scale < 0:
        raise GeometryError("scale must be >= 0")
    kind = p.kind
    if scale == 0.0:
        return TangentVec(p, np.zeros(kind.coord_shape), validate=False)
    if kind.name == "euclidean":
        out = scale * rng.standard_normal(kind.dim)
    elif kind.name == "circle":
        out = scale * rng.standard_normal(1)
    elif kind.name == "spd":
        out = spd_ops.gaussian(p, scale, rng)
    else:
        coeffs = scale * rng.standard_normal(kind.dim)
        out = _hyperboloid_frame_cached(p).T @ coeffs
    return TangentVec(p, out, validate=False)


def _hyperboloid_frame_cached(p: ManifoldPoint) -> np.ndarray:
    frame = p._cache
    if frame is None:
        frame = constcurv.hyperboloid_frame(p.coords)
        object.__setattr__(p, "_cache", frame)
    return frame


def orthonormal_frame(p: ManifoldPoint) -> list[TangentVec]:
    """Deterministic orthonormal basis of the tangent space at p."""
    kind = p.kind
    if kind.name == "euclidean":
        mats = np.eye(kind.dim)
    elif kind.name == "circle":
        mats = np.ones((1, 1))
    elif kind.name == "spd":
        mats = spd_ops.frame(p)
    else:
        mats = _hyperboloid_frame_cached(p)
    return [TangentVec(p, row, validate=False) for row in mats]


# imported last: spd_ops/constcurv reference GeometryError from this module
from . import constcurv, spd_ops  # noqa: E402
