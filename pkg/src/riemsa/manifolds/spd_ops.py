"""Affine-invariant geometry of the SPD cone.

Metric at P: <U, V>_P = tr(P^-1 U P^-1 V).  Exp/log/distance use the
conjugation closed forms Exp_P(V) = P^(1/2) expm(P^(-1/2) V P^(-1/2)) P^(1/2)
and their inverses; parallel transport is V -> E V E^T with
E = (Q P^-1)^(1/2).  Each point lazily caches its eigendecomposition and
the derived square-root pair, which every operation at that base reuses.
"""

from __future__ import annotations

import numpy as np

from ..linalg import EIGENVALUE_FLOOR, PositiveDefiniteError

_SYM_TOL = 1e-12


def validate_point(c: np.ndarray) -> None:
    from .base import GeometryError

    scale = max(1.0, float(np.abs(c).max()))
    if np.abs(c - c.T).max() > _SYM_TOL * scale:
        raise GeometryError("SPD point matrix is not symmetric within 1e-12")
    w = np.linalg.eigvalsh((c + c.T) / 2.0)
    if w[0] <= 0.0:
        raise GeometryError(f"SPD point has non-positive eigenvalue {w[0]:.3e}")


def validate_tangent(c: np.ndarray) -> None:
    from .base import GeometryError

    scale = max(1.0, float(np.abs(c).max()))
    if np.abs(c - c.T).max() > _SYM_TOL * scale:
        raise GeometryError("SPD tangent matrix is not symmetric within 1e-12")


def _sqrt_pair(p) -> tuple[np.ndarray, np.ndarray]:
    """(P^(1/2), P^(-1/2)) of a point, cached on the point."""
    cache = p._cache
    if cache is None:
        w, q = np.linalg.eigh(p.coords)
        if w[0] <= EIGENVALUE_FLOOR:
            raise PositiveDefiniteError(
                f"SPD point lost positive definiteness (min eig {w[0]:.3e})"
            )
        root = np.sqrt(w)
        sqrt = (q * root) @ q.T
        inv_sqrt = (q / root) @ q.T
        cache = (sqrt, inv_sqrt)
        object.__setattr__(p, "_cache", cache)
    return cache


def _sym(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2.0


def exp(p, v: np.ndarray) -> np.ndarray:
    sqrt, inv_sqrt = _sqrt_pair(p)
    # conjugations are symmetric up to roundoff; eigh reads one triangle
    m = inv_sqrt @ v @ inv_sqrt
    w, q = np.linalg.eigh(m)
    e = (q * np.exp(w)) @ q.T
    return _sym(sqrt @ e @ sqrt)


def log(p, q_coords: np.ndarray) -> np.ndarray:
    # the whitened matrix has eigenvalues exp(+-O(distance)); only an exact
    # loss of positivity is an error (the 1e-12 floor guards chain states,
    # not relative matrices of far-apart pairs)
    sqrt, inv_sqrt = _sqrt_pair(p)
    m = inv_sqrt @ q_coords @ inv_sqrt
    w, q = np.linalg.eigh(m)
    if w[0] <= 0.0:
        raise PositiveDefiniteError(
            f"log target is not positive definite relative to base (min eig {w[0]:.3e})"
        )
    l = (q * np.log(w)) @ q.T
    return _sym(sqrt @ l @ sqrt)


def distance(p, q_coords: np.ndarray) -> float:
    _, inv_sqrt = _sqrt_pair(p)
    m = inv_sqrt @ q_coords @ inv_sqrt
    w = np.linalg.eigvalsh(m)
    if w[0] <= 0.0:
        raise PositiveDefiniteError(
            f"distance target is not positive definite (min eig {w[0]:.3e})"
        )
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def metric(p, u: np.ndarray, v: np.ndarray) -> float:
    _, inv_sqrt = _sqrt_pair(p)
    mu = inv_sqrt @ u @ inv_sqrt
    mv = inv_sqrt @ v @ inv_sqrt
    return float(np.sum(mu * mv))


def parallel_transport(p, q, v: np.ndarray) -> np.ndarray:
    sqrt, inv_sqrt = _sqrt_pair(p)
    m = inv_sqrt @ q.coords @ inv_sqrt
    w, qm = np.linalg.eigh(m)
    if w[0] <= 0.0:
        raise PositiveDefiniteError("transport target is not positive definite")
    m_sqrt = (qm * np.sqrt(w)) @ qm.T
    e = sqrt @ m_sqrt @ inv_sqrt
    return _sym(e @ v @ e.T)


def gaussian(p, scale: float, rng: np.random.Generator) -> np.ndarray:
    # GOE scaling (diag var scale^2, off-diag var scale^2/2) makes the
    # frame coordinates i.i.d. N(0, scale^2) under the metric at p.
    d = p.kind.dim
    g = rng.standard_normal((d, d))
    s = scale * (g + g.T) / 2.0
    sqrt, _ = _sqrt_pair(p)
    return _sym(sqrt @ s @ sqrt)


def frame(p) -> np.ndarray:
    """Orthonormal tangent basis at P: conjugated canonical symmetric basis.

    Returns an array of shape (d(d+1)/2, d, d); entries are
    P^(1/2) E_ij P^(1/2) with E_ii = e_i e_i^T and
    E_ij = (e_i e_j^T + e_j e_i^T)/sqrt(2), normalized.
    """
    d = p.kind.dim
    sqrt, inv_sqrt = _sqrt_pair(p)
    mats = np.empty((d * (d + 1) // 2, d, d))
    k = 0
    for i in range(d):
        for j in range(i, d):
            e = np.zeros((d, d))
            if i == j:
                e[i, i] = 1.0
            else:
                e[i, j] = e[j, i] = 1.0 / np.sqrt(2.0)
            f = _sym(sqrt @ e @ sqrt)
            w = inv_sqrt @ f @ inv_sqrt
            f = f / np.sqrt(np.sum(w * w))
            mats[k] = f
            k += 1
    return mats
