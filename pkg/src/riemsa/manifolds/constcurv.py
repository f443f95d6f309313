"""Constant-curvature geometries: hyperboloid model and unit circle.

The hyperboloid carries the Minkowski form <x, y>_M = -x0 y0 + sum_i xi yi;
points live on the upper sheet <x, x>_M = -1, x0 > 0, and the induced
metric has constant curvature -1.  The circle stores angles in (-pi, pi]
with shorter-arc geodesics; the exact antipode is the cut locus and is
rejected for log and transport.
"""

from __future__ import annotations

import numpy as np

_SHEET_TOL = 1e-10
_TANGENCY_TOL = 1e-10
_SMALL = 1e-8


def minkowski_inner(x: np.ndarray, y: np.ndarray) -> float:
    """Minkowski bilinear form -x0 y0 + sum_{i>=1} xi yi."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return float(np.dot(x[1:], y[1:]) - x[0] * y[0])


def validate_hyperboloid_point(c: np.ndarray) -> None:
    from .base import GeometryError

    q = minkowski_inner(c, c)
    if abs(q + 1.0) > _SHEET_TOL:
        raise GeometryError(f"hyperboloid point off the sheet: <x,x>_M = {q:.3e}")
    if c[0] <= 0:
        raise GeometryError("hyperboloid point must be on the upper sheet (x0 > 0)")


def validate_hyperboloid_tangent(p: np.ndarray, v: np.ndarray) -> None:
    from .base import GeometryError

    q = minkowski_inner(p, v)
    if abs(q) > _TANGENCY_TOL * max(1.0, float(np.abs(v).max())):
        raise GeometryError(f"tangent not Minkowski-orthogonal to base: <x,v>_M = {q:.3e}")


def _renormalize(x: np.ndarray) -> np.ndarray:
    return x / np.sqrt(-minkowski_inner(x, x))


def hyperboloid_exp(p: np.ndarray, v: np.ndarray) -> np.ndarray:
    t = np.sqrt(max(0.0, minkowski_inner(v, v)))
    if t < _SMALL:
        # 2nd-order Taylor of cosh / sinh(t)/t, avoids 0/0
        out = (1.0 + t * t / 2.0) * p + (1.0 + t * t / 6.0) * v
    else:
        out = np.cosh(t) * p + (np.sinh(t) / t) * v
    return _renormalize(out)


def _chord_sq(p: np.ndarray, q: np.ndarray) -> float:
    # <q - p, q - p>_M = 4 sinh^2(d/2): spacelike, and far better conditioned
    # near coincident points than the arccosh of the inner product
    return max(0.0, minkowski_inner(q - p, q - p))


def hyperboloid_log(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    s2 = _chord_sq(p, q)
    d = 2.0 * np.arcsinh(0.5 * np.sqrt(s2))
    alpha = 1.0 + s2 / 2.0  # = cosh(d) = -<p, q>_M
    u = q - alpha * p  # tangential component of q at p, norm sinh(d)
    if d < _SMALL:
        v = u / (1.0 + d * d / 6.0)  # d/sinh(d) to 2nd order, avoids 0/0
    else:
        v = (d / np.sinh(d)) * u
    # kill roundoff drift off the tangent space
    return v + minkowski_inner(p, v) * p


def hyperboloid_dist(p: np.ndarray, q: np.ndarray) -> float:
    return float(2.0 * np.arcsinh(0.5 * np.sqrt(_chord_sq(p, q))))


def hyperboloid_transport(p: np.ndarray, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    denom = 1.0 - minkowski_inner(p, q)  # = 1 + cosh(dist) >= 2
    w = v + (minkowski_inner(q, v) / denom) * (p + q)
    return w + minkowski_inner(q, w) * q


def hyperboloid_frame(p: np.ndarray) -> np.ndarray:
    """Gram-Schmidt of the ambient basis projected to the tangent space.

    Returns a (d, d+1) array of orthonormal tangent rows; deterministic
    for a given point.
    """
    n = p.shape[0]
    d = n - 1
    frame = np.empty((d, n))
    k = 0
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        u = e + minkowski_inner(p, e) * p
        for j in range(k):
            u = u - minkowski_inner(frame[j], u) * frame[j]
        nrm_sq = minkowski_inner(u, u)
        if nrm_sq <= 1e-12:
            continue
        frame[k] = u / np.sqrt(nrm_sq)
        k += 1
        if k == d:
            break
    if k != d:  # pragma: no cover - projections of the ambient basis span
        raise RuntimeError("failed to build hyperboloid frame")
    return frame


# -- circle --------------------------------------------------------------

def wrap_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    r = float((a + np.pi) % (2.0 * np.pi) - np.pi)
    if r == -np.pi:
        r = np.pi
    return r


def validate_angle(a: float) -> None:
    from .base import GeometryError

    if not (-np.pi < a <= np.pi):
        raise GeometryError(f"circle angle {a!r} outside (-pi, pi]")


def circle_exp(p: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.array([wrap_angle(p[0] + v[0])])


def circle_log(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    from .base import GeometryError

    d = wrap_angle(q[0] - p[0])
    if abs(d) == np.pi:
        raise GeometryError("antipodal pair on the circle: geodesic not unique")
    return np.array([d])


def circle_dist(p: np.ndarray, q: np.ndarray) -> float:
    return abs(wrap_angle(q[0] - p[0]))
