"""Dense symmetric-matrix kernels for the SPD manifold.

Everything here operates on small (d <= ~8) matrices: symmetric
eigendecomposition, spectral matrix functions (exp/log/sqrt/inv_sqrt)
and Wishart sampling.  All routines are deterministic for identical
inputs and reject inputs that drifted off the symmetric / positive
definite constraint instead of silently repairing them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EIGENVALUE_FLOOR",
    "PositiveDefiniteError",
    "SymEig",
    "sym_eig",
    "spd_fun",
    "wishart",
]

# Eigenvalues of a "positive definite" input below this floor signal that a
# chain escaped the PD cone; we raise rather than clamp.
EIGENVALUE_FLOOR = 1e-12

_SYMMETRY_TOL = 1e-10


class PositiveDefiniteError(ValueError):
    """A matrix expected to be positive definite has lost definiteness."""


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition A = Q diag(values) Q^T of a symmetric matrix.

    ``values`` are sorted ascending, ``vectors`` holds the corresponding
    eigenvectors as columns of an orthogonal matrix.
    """

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q = self.vectors
        return (q * self.values) @ q.T


def _as_square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def sym_eig(a: np.ndarray) -> SymEig:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending.

    The input is symmetrized on entry; asymmetry beyond 1e-10 (relative)
    is rejected.
    """
    a = _as_square(a)
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > _SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    a = (a + a.T) / 2.0
    values, vectors = np.linalg.eigh(a)
    return SymEig(values=values, vectors=vectors)


_SCALAR_FUNS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "inv_sqrt": lambda w: 1.0 / np.sqrt(w),
}


def spd_fun(a: np.ndarray, fn: str) -> np.ndarray:
    """Apply a scalar function to a symmetric matrix through its spectrum.

    ``fn`` is one of ``"exp"``, ``"log"``, ``"sqrt"``, ``"inv_sqrt"``.
    For the latter three the input must be positive definite: any
    eigenvalue at or below the 1e-12 floor raises
    :class:`PositiveDefiniteError` (clamping would hide a diverging chain).
    """
    try:
        scalar = _SCALAR_FUNS[fn]
    except KeyError:
        raise ValueError(f"unknown matrix function {fn!r}") from None
    eig = sym_eig(a)
    if fn != "exp" and eig.values[0] <= EIGENVALUE_FLOOR:
        raise PositiveDefiniteError(
            f"matrix function {fn!r} needs eigenvalues > {EIGENVALUE_FLOOR:g}, "
            f"smallest is {eig.values[0]:.3e}"
        )
    q = eig.vectors
    out = (q * scalar(eig.values)) @ q.T
    return (out + out.T) / 2.0


def wishart(dim: int, dof: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one Wishart(dof, I_dim) matrix as G G^T, G a dim x dof Gaussian.

    Requires ``dof >= dim`` so the draw is almost surely positive definite.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if dof < dim:
        raise ValueError(f"dof ({dof}) must be >= dim ({dim})")
    g = rng.standard_normal((dim, dof))
    w = g @ g.T
    return (w + w.T) / 2.0
