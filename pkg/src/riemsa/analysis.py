"""Stationary-distribution diagnostics for fixed step-size chains.

Post-burn-in trajectory tails approximate the chain's stationary law.
This module estimates its functionals and runs the three quantitative
checks the toolkit is built around: theoretical-envelope domination of
Monte-Carlo means, the first-order (in the step size) expansion of the
stationary bias on a compact manifold, and the Gaussian limit of the
sqrt(step-size)-rescaled stationary law, whose covariance solves a
Lyapunov matrix equation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import linalg
from .engine import (
    KarcherDiscrete,
    Oracle,
    Trajectory,
    oracle_draw,
)
from .lyapunov import BoundParams, bound_eval
from .manifolds import (
    ManifoldKind,
    ManifoldPoint,
    TangentVec,
    dist,
    exp_map,
    inner,
    log_map,
    orthonormal_frame,
    transport,
)

__all__ = [
    "TailSampleSet",
    "RescaledSampleSet",
    "CltInputs",
    "TailStats",
    "FitResult",
    "CltReport",
    "BiasReport",
    "DominationReport",
    "pool_tails",
    "tail_stats",
    "eta_sweep_fit",
    "rescale_samples",
    "empirical_cov",
    "lyapunov_solve",
    "estimate_a_matrix",
    "estimate_sigma",
    "oracle_noise_sampler",
    "discrete_sigma",
    "clt_check",
    "bias_check_thm6",
    "bound_dominates",
]


@dataclass(frozen=True)
class TailSampleSet:
    """Post-burn-in points (possibly pooled over replicates) for one eta."""

    kind: ManifoldKind
    eta: float
    coords: np.ndarray  # stacked point coordinates, shape (n, *coord_shape)
    burn_fraction: float

    def __post_init__(self) -> None:
        if len(self.coords) == 0:
            raise ValueError("tail sample set must be nonempty")

    def __len__(self) -> int:
        return len(self.coords)

    def point(self, i: int) -> ManifoldPoint:
        return ManifoldPoint(self.kind, self.coords[i], validate=False)

    def points(self):
        for i in range(len(self.coords)):
            yield self.point(i)


@dataclass(frozen=True)
class RescaledSampleSet:
    """Tangent frame coordinates of tail points, scaled by eta^(-1/2)."""

    eta: float
    coords: np.ndarray  # shape (n, intrinsic_dim)

    def __len__(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class CltInputs:
    """Linearization matrix A (stable) and noise covariance at the target."""

    a_matrix: np.ndarray
    sigma_matrix: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.a_matrix, dtype=float)
        s = np.asarray(self.sigma_matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != s.shape:
            raise ValueError("A and Sigma must be square matrices of equal size")
        if np.max(np.real(np.linalg.eigvals(a))) >= 0:
            raise ValueError("all eigenvalues of A must have strictly negative real part")
        scale = max(1.0, float(np.abs(s).max()))
        if np.abs(s - s.T).max() > 1e-10 * scale:
            raise ValueError("Sigma must be symmetric within 1e-10")
        if np.linalg.eigvalsh((s + s.T) / 2.0)[0] < -1e-10 * scale:
            raise ValueError("Sigma must be positive semidefinite within 1e-10")
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "sigma_matrix", (s + s.T) / 2.0)


@dataclass(frozen=True)
class TailStats:
    mean_rho_sq: float
    var_rho_sq: float
    mean_d_sq: float
    mean_v1: float
    n_tail: int


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_sq: float


@dataclass(frozen=True)
class CltReport:
    empirical_cov: np.ndarray
    predicted_v: np.ndarray
    rel_error_operator_norm: float


@dataclass(frozen=True)
class BiasReport:
    lhs: float
    rhs: float
    rel_error: float


@dataclass(frozen=True)
class DominationReport:
    checkpoints: tuple[int, ...]
    margins: tuple[float, ...]  # bound - (mc_mean - 3 se); negative = violation
    violations: tuple[int, ...]


def _tail_mask(traj: Trajectory, burn_fraction: float) -> np.ndarray:
    if not 0.0 <= burn_fraction < 1.0:
        raise ValueError("burn_fraction must lie in [0, 1)")
    cutoff = burn_fraction * traj.config.n_steps
    return traj.steps >= cutoff


def pool_tails(trajs: Sequence[Trajectory], burn_fraction: float) -> TailSampleSet:
    """Pool post-burn-in points of replicate trajectories with one eta."""
    if not trajs:
        raise ValueError("need at least one trajectory")
    eta = trajs[0].config.eta
    kind = trajs[0].config.manifold
    for t in trajs:
        if t.config.eta != eta or t.config.manifold != kind:
            raise ValueError("pooled trajectories must share eta and manifold")
    blocks = [t.points[_tail_mask(t, burn_fraction)] for t in trajs]
    coords = np.concatenate(blocks, axis=0)
    return TailSampleSet(kind=kind, eta=eta, coords=coords, burn_fraction=burn_fraction)


def tail_stats(traj: Trajectory, burn_fraction: float, target: ManifoldPoint) -> TailStats:
    """Tail means/variance of the distance diagnostics relative to target."""
    mask = _tail_mask(traj, burn_fraction)
    n_tail = int(mask.sum())
    if n_tail < 2:
        raise ValueError(f"need at least 2 post-burn records, have {n_tail}")
    if traj.rho_sq is not None and traj.config.diagnostics_target == target:
        rho_sq = traj.rho_sq[mask]
    else:
        kind = traj.config.manifold
        pts = traj.points[mask]
        rho_sq = np.array(
            [dist(target, ManifoldPoint(kind, c, validate=False)) ** 2 for c in pts]
        )
    d_sq = rho_sq / (1.0 + rho_sq)
    v1 = np.sqrt(rho_sq + 1.0) - 1.0
    return TailStats(
        mean_rho_sq=float(rho_sq.mean()),
        var_rho_sq=float(rho_sq.var(ddof=1)),
        mean_d_sq=float(d_sq.mean()),
        mean_v1=float(v1.mean()),
        n_tail=n_tail,
    )


def eta_sweep_fit(points: Sequence[tuple[float, float]]) -> FitResult:
    """Ordinary least squares of a statistic against the step size."""
    if len(points) < 2:
        raise ValueError("need at least 2 (eta, stat) points")
    x = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    if np.all(x == x[0]):
        raise ValueError("all eta values are identical; cannot fit a line")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        r_sq = 1.0  # exact horizontal line
    else:
        r_sq = max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return FitResult(slope=float(slope), intercept=float(intercept), r_sq=r_sq)


def rescale_samples(
    tail: TailSampleSet,
    target: ManifoldPoint,
    frame: Optional[Sequence[TangentVec]] = None,
) -> RescaledSampleSet:
    """Frame coordinates of eta^(-1/2) * Log_target(point) for each point.

    The Euclidean norm of each coordinate row equals eta^(-1/2) times the
    distance from the target to the point.
    """
    if target.kind != tail.kind:
        raise ValueError("target must live on the tail's manifold")
    if frame is None:
        frame = orthonormal_frame(target)
    scale = 1.0 / np.sqrt(tail.eta)
    out = np.empty((len(tail), len(frame)))
    for i in range(len(tail)):
        l = log_map(target, tail.point(i))
        out[i] = [scale * inner(target, l, e) for e in frame]
    return RescaledSampleSet(eta=tail.eta, coords=out)


def empirical_cov(samples: RescaledSampleSet) -> np.ndarray:
    """Unbiased sample covariance (about the sample mean) of the coordinates."""
    x = samples.coords
    if len(x) < 2:
        raise ValueError("need at least 2 samples for a covariance")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (len(x) - 1)
    return (cov + cov.T) / 2.0


def lyapunov_solve(inputs: CltInputs) -> np.ndarray:
    """Stationary covariance V solving A V + V A^T + Sigma = 0.

    Solved through the Kronecker-sum linear system with dense partial
    pivoting; the residual is checked against 1e-10 * max(1, ||Sigma||_F).
    """
    a = inputs.a_matrix
    s = inputs.sigma_matrix
    n = a.shape[0]
    eye = np.eye(n)
    k = np.kron(a, eye) + np.kron(eye, a)
    try:
        vec = np.linalg.solve(k, -s.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise ValueError("Lyapunov system is singular (A not stable enough)") from exc
    v = vec.reshape(n, n)
    v = (v + v.T) / 2.0
    residual = np.linalg.norm(a @ v + v @ a.T + s)
    if residual > 1e-10 * max(1.0, float(np.linalg.norm(s))):
        raise ValueError(f"Lyapunov residual too large: {residual:.3e}")
    return v


def estimate_a_matrix(
    mean_field: Callable[[ManifoldPoint], TangentVec],
    target: ManifoldPoint,
    fd_step: float,
) -> np.ndarray:
    """Jacobian of the mean field in normal coordinates at the target.

    Central finite differences of the frame coordinates of the mean field
    transported back to the target from Exp_target(+-fd_step * e_i).
    """
    if not fd_step > 0:
        raise ValueError("fd_step must be > 0")
    frame = orthonormal_frame(target)
    d = len(frame)
    a = np.empty((d, d))
    for i, e in enumerate(frame):
        plus = exp_map(target, fd_step * e)
        minus = exp_map(target, (-fd_step) * e)
        h_plus = transport(plus, target, mean_field(plus))
        h_minus = transport(minus, target, mean_field(minus))
        for j, f in enumerate(frame):
            a[j, i] = (inner(target, h_plus, f) - inner(target, h_minus, f)) / (2.0 * fd_step)
    return a


def estimate_sigma(
    noise_sampler: Callable[[np.random.Generator], TangentVec],
    target: ManifoldPoint,
    n_samples: int,
    rng: np.random.Generator,
    centered: bool = False,
) -> np.ndarray:
    """Second moment of the noise in frame coordinates at the target.

    By construction the noise is mean-zero, so no centering is applied
    unless ``centered=True`` (useful as a diagnostic for oracles whose
    mean field is only approximately subtracted).
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    frame = orthonormal_frame(target)
    d = len(frame)
    coords = np.empty((n_samples, d))
    for k in range(n_samples):
        e = noise_sampler(rng)
        if e.base != target:
            raise ValueError("noise sampler must return tangents at the target")
        coords[k] = [inner(target, e, f) for f in frame]
    if centered:
        coords = coords - coords.mean(axis=0)
        sig = coords.T @ coords / (n_samples - 1)
    else:
        sig = coords.T @ coords / n_samples
    return (sig + sig.T) / 2.0


def oracle_noise_sampler(
    oracle: Oracle, target: ManifoldPoint
) -> Callable[[np.random.Generator], TangentVec]:
    """Sampler of the zero-mean noise e(X) = H(X) - h at the target."""
    h = oracle.mean_field(target)

    def sample(rng: np.random.Generator) -> TangentVec:
        return oracle_draw(oracle, target, rng) - h

    return sample


def discrete_sigma(oracle: KarcherDiscrete, target: ManifoldPoint) -> np.ndarray:
    """Exact noise covariance of a discrete barycenter oracle at a point.

    Averages over the atoms instead of sampling; the trace equals the
    weighted mean of rho^2(target, atom) when evaluated at the barycenter.
    """
    frame = orthonormal_frame(target)
    d = len(frame)
    coords = np.empty((len(oracle.atoms), d))
    for k, x in enumerate(oracle.atoms):
        l = log_map(target, x)
        coords[k] = [inner(target, l, f) for f in frame]
    w = np.asarray(oracle.weights)
    mean = w @ coords
    centered = coords - mean
    sig = (centered * w[:, None]).T @ centered
    return (sig + sig.T) / 2.0


def _sym_operator_norm(m: np.ndarray) -> float:
    eig = linalg.sym_eig(m)
    return float(np.max(np.abs(eig.values)))


def clt_check(tail: TailSampleSet, target: ManifoldPoint, inputs: CltInputs) -> CltReport:
    """Compare the rescaled tail covariance against the Lyapunov solution.

    The error metric is the symmetric operator norm of the difference,
    relative to the operator norm of the predicted covariance.
    """
    samples = rescale_samples(tail, target)
    cov = empirical_cov(samples)
    v = lyapunov_solve(inputs)
    rel = _sym_operator_norm(cov - v) / _sym_operator_norm(v)
    return CltReport(empirical_cov=cov, predicted_v=v, rel_error_operator_norm=rel)


def bias_check_thm6(
    tail: TailSampleSet,
    f: Callable[[np.ndarray], np.ndarray],
    noise_sampler: Callable[[np.random.Generator], TangentVec],
    target: ManifoldPoint,
    fd_step: float = 1e-4,
    sigma_samples: int = 100_000,
    rng: Optional[np.random.Generator] = None,
) -> BiasReport:
    """First-order stationary-bias identity on the compact testbed (circle).

    lhs is the tail average of ||grad f||^2; rhs is (eta/2) times the
    second derivative of f at the target times the noise variance there.
    ``f`` must accept an array of angles and evaluate elementwise.
    """
    if tail.kind.name != "circle":
        raise ValueError("bias check requires the compact kind (circle)")
    if rng is None:
        rng = np.random.default_rng(0)
    angles = tail.coords[:, 0]
    grad = (f(angles + fd_step) - f(angles - fd_step)) / (2.0 * fd_step)
    lhs = float(np.mean(grad**2))
    t0 = float(target.coords[0])
    hess = float((f(np.array([t0 + fd_step])) - 2.0 * f(np.array([t0]))
                  + f(np.array([t0 - fd_step])))[0] / fd_step**2)
    sigma = estimate_sigma(noise_sampler, target, sigma_samples, rng)
    rhs = 0.5 * tail.eta * hess * float(sigma[0, 0])
    if rhs == 0.0:
        rel = 0.0 if abs(lhs) < 1e-12 else np.inf
    else:
        rel = abs(lhs - rhs) / abs(rhs)
    return BiasReport(lhs=lhs, rhs=rhs, rel_error=rel)


def bound_dominates(
    trajs: Sequence[Trajectory],
    kind: str,
    params: BoundParams,
    checkpoints: Sequence[int],
    value_fn: Callable[[ManifoldPoint], float],
) -> DominationReport:
    """Check that the Monte-Carlo mean of a Lyapunov value stays under the bound.

    At each checkpoint n the ensemble mean of ``value_fn`` at the recorded
    point, minus three standard errors, must not exceed
    ``bound_eval(kind, params, eta, n)``.
    """
    if len(trajs) < 30:
        raise ValueError("need at least 30 replicates for the Monte-Carlo mean")
    eta = trajs[0].config.eta
    margins: list[float] = []
    violations: list[int] = []
    for n in checkpoints:
        values = np.empty(len(trajs))
        for r, t in enumerate(trajs):
            idx = int(np.searchsorted(t.steps, n))
            if idx >= len(t.steps) or t.steps[idx] != n:
                raise ValueError(f"checkpoint {n} was not recorded in replicate {r}")
            values[r] = value_fn(t.point(idx))
        mc_mean = float(values.mean())
        se = float(values.std(ddof=1) / np.sqrt(len(values)))
        bound = bound_eval(kind, params, eta, int(n))
        margin = bound - (mc_mean - 3.0 * se)
        margins.append(margin)
        if margin < 0:
            violations.append(int(n))
    return DominationReport(
        checkpoints=tuple(int(n) for n in checkpoints),
        margins=tuple(margins),
        violations=tuple(violations),
    )
