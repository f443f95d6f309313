"""Fixed step-size stochastic approximation chains with pluggable oracles.

A chain is theta_{n+1} = proj(Exp_{theta_n}(eta * H(theta_n, X_{n+1})))
where the oracle H supplies a noisy update direction whose expectation
is the mean field h.  Chains are reproducible: replicate r of a config
with seed s draws from the counter-based Philox substream keyed by
(s, r), so replicates are independent and individually re-runnable.

Also provides the deterministic fixed-point solver used to compute
reference barycenters (the ground truth the diagnostics compare against).
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import linalg
from .manifolds import (
    GeometryError,
    ManifoldKind,
    ManifoldPoint,
    TangentVec,
    dist,
    exp_map,
    gaussian_tangent,
    log_map,
    norm,
    origin,
    project_ball,
    spd,
)

__all__ = [
    "WishartSampler",
    "DiscreteSampler",
    "SgdQuadratic",
    "LinearPull",
    "KarcherDiscrete",
    "KarcherRescaled",
    "CosineWell",
    "Oracle",
    "ProjectionSpec",
    "SaConfig",
    "Trajectory",
    "chain_rng",
    "aux_rng",
    "oracle_draw",
    "oracle_mean_field",
    "sa_step",
    "run_chain",
    "run_ensemble",
    "karcher_reference",
]


def chain_rng(seed: int, replicate: int = 0) -> np.random.Generator:
    """Counter-based generator for replicate ``replicate`` of seed ``seed``."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(0, int(replicate)))
    return np.random.Generator(np.random.Philox(seq))


def aux_rng(seed: int, channel: int) -> np.random.Generator:
    """Side stream (atom generation, Monte-Carlo estimates) independent
    of every chain substream."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(1, int(channel)))
    return np.random.Generator(np.random.Philox(seq))


# -- samplers over distributions on the manifold -------------------------

@dataclass(frozen=True)
class WishartSampler:
    """Draws (Wishart(dof, I) / scale) points on the SPD manifold."""

    dim: int
    dof: int
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.dof < self.dim:
            raise ValueError("Wishart dof must be >= dim")
        if not self.scale > 0:
            raise ValueError("scale must be > 0")

    @property
    def kind(self) -> ManifoldKind:
        return spd(self.dim)

    def sample(self, rng: np.random.Generator) -> ManifoldPoint:
        w = linalg.wishart(self.dim, self.dof, rng) / self.scale
        return ManifoldPoint(self.kind, w, validate=False)


@dataclass(frozen=True)
class DiscreteSampler:
    """Draws from a finite weighted set of points."""

    atoms: tuple[ManifoldPoint, ...]
    weights: tuple[float, ...]
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        _check_weights(self.atoms, self.weights)
        object.__setattr__(self, "_cum", np.cumsum(np.asarray(self.weights)))

    @property
    def kind(self) -> ManifoldKind:
        return self.atoms[0].kind

    def sample(self, rng: np.random.Generator) -> ManifoldPoint:
        i = int(np.searchsorted(self._cum, rng.random(), side="right"))
        return self.atoms[min(i, len(self.atoms) - 1)]


def _check_weights(atoms: Sequence[ManifoldPoint], weights: Sequence[float]) -> None:
    if len(atoms) == 0:
        raise ValueError("atom list must be nonempty")
    if len(weights) != len(atoms):
        raise ValueError("weights and atoms must have equal length")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must sum to 1 within 1e-12")
    kind = atoms[0].kind
    for a in atoms:
        if a.kind != kind:
            raise ValueError("atoms must all live on one manifold")


def uniform_weights(n: int) -> tuple[float, ...]:
    return tuple(np.full(n, 1.0 / n))


# -- oracle variants ------------------------------------------------------

@dataclass(frozen=True)
class SgdQuadratic:
    """Noisy gradient step for the quadratic objective rate * rho^2 / 2.

    Draws rate * Log_p(target) + isotropic Gaussian noise of scale
    ``noise_scale``.
    """

    target: ManifoldPoint
    rate: float
    noise_scale: float
    reg_noise: float = 0.0

    @property
    def kind(self) -> ManifoldKind:
        return self.target.kind

    def draw(self, p: ManifoldPoint, rng: np.random.Generator) -> TangentVec:
        v = self.rate * log_map(p, self.target)
        if self.noise_scale > 0:
            v = v + gaussian_tangent(p, self.noise_scale, rng)
        return _with_reg_noise(v, p, self.reg_noise, rng)

    def mean_field(self, p: ManifoldPoint) -> TangentVec:
        return self.rate * log_map(p, self.target)


@dataclass(frozen=True)
class LinearPull:
    """Linear pull toward a target: rate * Log_p(target) plus noise.

    The testbed field for limit-law checks; its linearization at the
    target is exactly -rate * Identity in normal coordinates.
    """

    target: ManifoldPoint
    rate: float
    noise_scale: float
    reg_noise: float = 0.0

    @property
    def kind(self) -> ManifoldKind:
        return self.target.kind

    def draw(self, p: ManifoldPoint, rng: np.random.Generator) -> TangentVec:
        v = self.rate * log_map(p, self.target)
        if self.noise_scale > 0:
            v = v + gaussian_tangent(p, self.noise_scale, rng)
        return _with_reg_noise(v, p, self.reg_noise, rng)

    def mean_field(self, p: ManifoldPoint) -> TangentVec:
        return self.rate * log_map(p, self.target)


@dataclass(frozen=True)
class KarcherDiscrete:
    """Barycenter oracle for a finite distribution: Log_p(X), X ~ atoms."""

    atoms: tuple[ManifoldPoint, ...]
    weights: tuple[float, ...] = ()
    reg_noise: float = 0.0
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.atoms) == 0:
            raise ValueError("atom list must be nonempty")
        if not self.weights:
            object.__setattr__(self, "weights", uniform_weights(len(self.atoms)))
        _check_weights(self.atoms, self.weights)
        object.__setattr__(self, "_cum", np.cumsum(np.asarray(self.weights)))

    @property
    def kind(self) -> ManifoldKind:
        return self.atoms[0].kind

    def draw(self, p: ManifoldPoint, rng: np.random.Generator) -> TangentVec:
        i = int(np.searchsorted(self._cum, rng.random(), side="right"))
        x = self.atoms[min(i, len(self.atoms) - 1)]
        v = log_map(p, x)
        return _with_reg_noise(v, p, self.reg_noise, rng)

    def mean_field(self, p: ManifoldPoint) -> TangentVec:
        acc = np.zeros(p.kind.coord_shape)
        for w, x in zip(self.weights, self.atoms):
            acc = acc + w * log_map(p, x).coords
        return TangentVec(p, acc, validate=False)


@dataclass(frozen=True)
class KarcherRescaled:
    """Rescaled barycenter oracle for a general distribution pi.

    One draw is (1/2) Log_p(X1) / sqrt(rho^2(p, X2)/2 + 1) with X1, X2
    independent samples from pi; ``batch_size`` > 1 averages that many
    independent full draws (each with its own X1, X2 pair).
    """

    sampler: WishartSampler | DiscreteSampler
    batch_size: int = 1
    reg_noise: float = 0.0

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @property
    def kind(self) -> ManifoldKind:
        return self.sampler.kind

    def draw(self, p: ManifoldPoint, rng: np.random.Generator) -> TangentVec:
        acc = np.zeros(p.kind.coord_shape)
        for _ in range(self.batch_size):
            x1 = self.sampler.sample(rng)
            x2 = self.sampler.sample(rng)
            denom = np.sqrt(dist(p, x2) ** 2 / 2.0 + 1.0)
            acc = acc + log_map(p, x1).coords / (2.0 * denom)
        v = TangentVec(p, acc / self.batch_size, validate=False)
        return _with_reg_noise(v, p, self.reg_noise, rng)

    def mean_field(self, p: ManifoldPoint) -> TangentVec:
        if not isinstance(self.sampler, DiscreteSampler):
            raise NotImplementedError(
                "exact mean field only available for discrete distributions"
            )
        atoms, weights = self.sampler.atoms, self.sampler.weights
        g = np.zeros(p.kind.coord_shape)
        scale = 0.0
        for w, x in zip(weights, atoms):
            g = g + w * log_map(p, x).coords
            scale += w / np.sqrt(dist(p, x) ** 2 / 2.0 + 1.0)
        return TangentVec(p, g * scale / 2.0, validate=False)


@dataclass(frozen=True)
class CosineWell:
    """Circle-only gradient oracle for f(phi) = amplitude * (1 - cos(phi - center)).

    The smooth compact-manifold testbed: mean field -amplitude * sin(phi -
    center) plus Gaussian angle noise.
    """

    amplitude: float
    noise_scale: float
    center: float = 0.0

    @property
    def kind(self) -> ManifoldKind:
        from .manifolds import circle

        return circle()

    def draw(self, p: ManifoldPoint, rng: np.random.Generator) -> TangentVec:
        drift = -self.amplitude * np.sin(p.coords[0] - self.center)
        noise = self.noise_scale * rng.standard_normal() if self.noise_scale > 0 else 0.0
        return TangentVec(p, np.array([drift + noise]), validate=False)

    def mean_field(self, p: ManifoldPoint) -> TangentVec:
        drift = -self.amplitude * np.sin(p.coords[0] - self.center)
        return TangentVec(p, np.array([drift]), validate=False)

    def objective(self, angles: np.ndarray) -> np.ndarray:
        return self.amplitude * (1.0 - np.cos(np.asarray(angles) - self.center))


Oracle = SgdQuadratic | LinearPull | KarcherDiscrete | KarcherRescaled | CosineWell


def _with_reg_noise(
    v: TangentVec, p: ManifoldPoint, scale: float, rng: np.random.Generator
) -> TangentVec:
    if scale > 0:
        return v + gaussian_tangent(p, scale, rng)
    return v


def oracle_draw(oracle: Oracle, p: ManifoldPoint, rng: np.random.Generator) -> TangentVec:
    """One stochastic update direction H_p(X) at the current point."""
    if p.kind != oracle.kind:
        raise GeometryError("point is not on the oracle's manifold")
    return oracle.draw(p, rng)


def oracle_mean_field(oracle: Oracle) -> Callable[[ManifoldPoint], TangentVec]:
    """Noise-free mean field evaluator h(p) for the oracle, if exact."""
    return oracle.mean_field


# -- chain configuration and trajectories ---------------------------------

@dataclass(frozen=True)
class ProjectionSpec:
    center: ManifoldPoint
    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError("projection radius must be > 0")


@dataclass(frozen=True)
class SaConfig:
    """Specification of one chain: geometry, oracle, step size and length."""

    manifold: ManifoldKind
    oracle: Oracle
    eta: float
    n_steps: int
    projection: Optional[ProjectionSpec] = None
    seed: int = 0
    record_every: int = 1
    diagnostics_target: Optional[ManifoldPoint] = None
    theta0: Optional[ManifoldPoint] = None

    def __post_init__(self) -> None:
        if not self.eta >= 0:
            raise ValueError("eta must be >= 0")
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.oracle.kind != self.manifold:
            raise ValueError("oracle manifold does not match config manifold")
        for pt in (self.theta0, self.diagnostics_target):
            if pt is not None and pt.kind != self.manifold:
                raise ValueError("configured point is not on the configured manifold")
        if self.projection is not None and self.projection.center.kind != self.manifold:
            raise ValueError("projection center is not on the configured manifold")


@dataclass(frozen=True)
class Trajectory:
    """Recorded chain: step indices, points, and optional diagnostics.

    Points are stored stacked in one array (row k is the point recorded
    at ``steps[k]``); diagnostics are present when the config carried a
    target.
    """

    config: SaConfig
    replicate: int
    steps: np.ndarray
    points: np.ndarray
    rho_sq: Optional[np.ndarray] = None
    d_sq: Optional[np.ndarray] = None
    v1: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.steps)

    def point(self, i: int) -> ManifoldPoint:
        return ManifoldPoint(self.config.manifold, self.points[i], validate=False)

    def final_point(self) -> ManifoldPoint:
        return self.point(len(self.steps) - 1)

    def records(self):
        """Iterate (step, point, rho_sq, d_sq, v1) tuples."""
        for i, s in enumerate(self.steps):
            yield (
                int(s),
                self.point(i),
                None if self.rho_sq is None else float(self.rho_sq[i]),
                None if self.d_sq is None else float(self.d_sq[i]),
                None if self.v1 is None else float(self.v1[i]),
            )


def sa_step(config: SaConfig, state: ManifoldPoint, rng: np.random.Generator) -> ManifoldPoint:
    """One update: project(exp(state, eta * oracle_draw(state)))."""
    h = oracle_draw(config.oracle, state, rng)
    if config.eta == 0.0:
        return state  # degenerate step size: identity map, draw still consumed
    nxt = exp_map(state, config.eta * h)
    if config.projection is not None:
        nxt = project_ball(config.projection.center, config.projection.radius, nxt)
    return nxt


def run_chain(config: SaConfig, replicate: int = 0) -> Trajectory:
    """Run the chain from theta_0 and record every ``record_every`` steps.

    Identical (config, replicate) pairs produce bit-identical trajectories.
    """
    state = config.theta0 if config.theta0 is not None else origin(config.manifold)
    rng = chain_rng(config.seed, replicate)
    target = config.diagnostics_target

    n_rec = 1 + config.n_steps // config.record_every
    steps = np.empty(n_rec, dtype=np.int64)
    points = np.empty((n_rec,) + config.manifold.coord_shape)
    diag = None
    if target is not None:
        diag = (np.empty(n_rec), np.empty(n_rec), np.empty(n_rec))

    def record(k: int, step: int, pt: ManifoldPoint) -> None:
        steps[k] = step
        points[k] = pt.coords
        if diag is not None:
            r2 = dist(target, pt) ** 2
            diag[0][k] = r2
            diag[1][k] = r2 / (1.0 + r2)
            diag[2][k] = np.sqrt(r2 + 1.0) - 1.0

    record(0, 0, state)
    k = 1
    for step in range(1, config.n_steps + 1):
        state = sa_step(config, state, rng)
        if step % config.record_every == 0:
            record(k, step, state)
            k += 1
    return Trajectory(
        config=config,
        replicate=replicate,
        steps=steps,
        points=points,
        rho_sq=None if diag is None else diag[0],
        d_sq=None if diag is None else diag[1],
        v1=None if diag is None else diag[2],
    )


def _ensemble_worker(args: tuple[SaConfig, int]) -> Trajectory:
    config, replicate = args
    return run_chain(config, replicate)


def run_ensemble(
    config: SaConfig, replicates: int, max_workers: Optional[int] = None
) -> list[Trajectory]:
    """Run independent replicates 0..replicates-1, possibly in parallel.

    Results are returned ordered by replicate index and do not depend on
    the worker count (each replicate owns its rng substream).
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    if max_workers is None:
        max_workers = os.cpu_count() or 1
    tasks = [(config, r) for r in range(replicates)]
    if max_workers <= 1 or replicates == 1:
        return [_ensemble_worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(max_workers, replicates)) as pool:
        return list(pool.map(_ensemble_worker, tasks))


# -- deterministic barycenter reference -----------------------------------

def karcher_reference(
    kind: ManifoldKind,
    atoms: Sequence[ManifoldPoint],
    weights: Optional[Sequence[float]] = None,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> ManifoldPoint:
    """Weighted barycenter via guarded fixed-point iteration.

    Iterates theta <- Exp_theta(tau * sum_i w_i Log_theta(x_i)) with tau
    starting at 1 and halved whenever the mean-tangent norm fails to
    decrease; stops when that norm is <= tol.  (The mean-tangent norm is
    the guard rather than the weighted mean squared distance: the latter
    is flat to within summation rounding near the optimum and stalls the
    line search, while the norm keeps decreasing geometrically.)
    """
    if not kind.is_hadamard:
        raise GeometryError("barycenter solver requires a Hadamard kind")
    atoms = list(atoms)
    if not atoms:
        raise ValueError("atom list must be nonempty")
    if weights is None:
        weights = uniform_weights(len(atoms))
    _check_weights(atoms, weights)
    w = np.asarray(weights, dtype=float)

    def mean_log(p: ManifoldPoint) -> tuple[TangentVec, float]:
        acc = np.zeros(kind.coord_shape)
        for wi, x in zip(w, atoms):
            acc = acc + wi * log_map(p, x).coords
        g = TangentVec(p, acc, validate=False)
        return g, norm(p, g)

    theta = atoms[0]
    g, gn = mean_log(theta)
    for _ in range(max_iter):
        if gn <= tol:
            return theta
        tau = 1.0
        while True:
            trial = exp_map(theta, tau * g)
            g_trial, gn_trial = mean_log(trial)
            if gn_trial < gn:
                theta, g, gn = trial, g_trial, gn_trial
                break
            tau /= 2.0
            if tau < 1e-14:
                raise RuntimeError(
                    "barycenter iteration stalled before reaching tolerance"
                )
    if gn <= tol:
        return theta
    raise RuntimeError(f"barycenter iteration did not converge in {max_iter} steps")


def karcher_mean_field_zero_check(
    theta: ManifoldPoint, atoms: Sequence[ManifoldPoint], weights: Optional[Sequence[float]] = None
) -> float:
    """Norm of the weighted mean log at theta (zero at the barycenter)."""
    atoms = list(atoms)
    if weights is None:
        weights = uniform_weights(len(atoms))
    acc = np.zeros(theta.kind.coord_shape)
    for wi, x in zip(weights, atoms):
        acc = acc + wi * log_map(theta, x).coords
    return norm(theta, TangentVec(theta, acc, validate=False))
