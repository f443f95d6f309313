"""Lyapunov functions and closed-form non-asymptotic bound evaluators.

Two chain-stability certificates are provided: a Huberized distance
(asymptotically linear in the distance to the target, hence with a
geodesically Lipschitz gradient on curved spaces) and a cutoff-truncated
squared distance.  ``bound_eval`` computes the matching theoretical
envelopes for the mean behavior of a fixed step-size chain; each bound
is only valid for step sizes up to ``eta_bar`` and larger values are
rejected outright.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .manifolds import ManifoldPoint, TangentVec, dist, log_map

__all__ = [
    "HuberParams",
    "CutoffParams",
    "BoundParams",
    "BOUND_KINDS",
    "v1",
    "grad_v1",
    "v2",
    "d_theta_sq",
    "eta_bar",
    "bound_eval",
]

BOUND_KINDS = ("thm1a", "thm1b", "thm1c", "thm15", "cor9", "prop11", "prop12", "thm13")


@dataclass(frozen=True)
class HuberParams:
    """Scale delta and target point of the Huberized distance function."""

    delta: float
    target: ManifoldPoint

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise ValueError("delta must be > 0")


@dataclass(frozen=True)
class CutoffParams:
    """Cutoff diameter D_H and target of the truncated squared distance."""

    d_h: float
    target: ManifoldPoint

    def __post_init__(self) -> None:
        if not self.d_h > 0:
            raise ValueError("d_h must be > 0")


@dataclass(frozen=True)
class BoundParams:
    """Constants feeding the closed-form bound evaluators.

    Only the constants used by a given bound kind need to be set; the
    evaluator raises a descriptive error when a required one is missing.
    """

    L: Optional[float] = None                # geodesic Lipschitz constant of grad V
    c1: Optional[float] = None               # drift offset constant
    c2: Optional[float] = None               # drift coupling constant
    lam: Optional[float] = None              # decay rate outside the core set
    sigma0_sq: Optional[float] = None        # absolute noise level
    sigma1_sq: Optional[float] = None        # relative noise level
    v_sup_kstar: float = 0.0                 # sup of V on the core set
    h_sup_kstar: float = 0.0                 # sup of ||h|| on the core set
    kappa: Optional[float] = None            # curvature constant
    lambda_f: Optional[float] = None         # strong convexity constant
    l_f: Optional[float] = None              # gradient Lipschitz constant
    c_f: Optional[float] = None              # bounded-gradient constant
    lambda_tilde_f: Optional[float] = None   # Huberized convexity constant
    c_pi: Optional[float] = None             # barycenter constant C_pi
    b_pi: Optional[float] = None             # barycenter constant B_pi
    v1_theta0: Optional[float] = None        # Huber Lyapunov value at theta_0
    v0: Optional[float] = None               # V(theta_0) (or f(theta_0) - f*)
    l_pi: Optional[float] = None             # discrete-barycenter smoothness constant
    d_diam: Optional[float] = None           # max distance from theta_0 to an atom
    c_universal: float = 1.0                 # unspecified universal constant, default 1


def _need(params: BoundParams, kind: str, *names: str) -> list[float]:
    out = []
    for name in names:
        value = getattr(params, name)
        if value is None:
            raise ValueError(f"bound kind {kind!r} needs constant {name!r}")
        out.append(float(value))
    return out


def v1(params: HuberParams, p: ManifoldPoint) -> float:
    """Huberized distance: delta^2 * (sqrt((rho/delta)^2 + 1) - 1)."""
    rho = dist(params.target, p)
    d2 = params.delta**2
    return float(d2 * np.sqrt((rho / params.delta) ** 2 + 1.0) - d2)


def grad_v1(params: HuberParams, p: ManifoldPoint) -> TangentVec:
    """Gradient of v1 at p: -Log_p(target) / sqrt((rho/delta)^2 + 1)."""
    l = log_map(p, params.target)
    rho = dist(params.target, p)
    denom = np.sqrt((rho / params.delta) ** 2 + 1.0)
    return (-1.0 / denom) * l


def _chi(rho: float, d_h: float) -> float:
    # quintic smoothstep cutoff: 1 on [0, d_h], 0 beyond d_h + 1, C^2 blend
    if rho <= d_h:
        return 1.0
    if rho >= d_h + 1.0:
        return 0.0
    t = rho - d_h
    return 1.0 - (6.0 * t**5 - 15.0 * t**4 + 10.0 * t**3)


def v2(params: CutoffParams, p: ManifoldPoint) -> float:
    """Truncated squared distance: chi * rho^2 + (1 - chi) * d_h^2."""
    if not p.kind.is_hadamard:
        raise ValueError("v2 is defined on Hadamard kinds only")
    rho = dist(params.target, p)
    chi = _chi(rho, params.d_h)
    return float(chi * rho**2 + (1.0 - chi) * params.d_h**2)


def d_theta_sq(p: ManifoldPoint, q: ManifoldPoint) -> float:
    """Bounded distance-like function rho^2 / (1 + rho^2), in [0, 1)."""
    r2 = dist(p, q) ** 2
    return float(r2 / (1.0 + r2))


def eta_bar(kind: str, params: BoundParams) -> float:
    """Largest admissible step size for the given bound kind."""
    if kind not in BOUND_KINDS:
        raise ValueError(f"unknown bound kind {kind!r}")
    if kind in ("thm1a", "thm1b", "thm1c"):
        c2, L, s1 = _need(params, kind, "c2", "L", "sigma1_sq")
        return 1.0 / (2.0 * c2 * L * (1.0 + s1))
    if kind == "thm15":
        lam, L, s1 = _need(params, kind, "lam", "L", "sigma1_sq")
        return lam / (2.0 * (1.0 + s1) * L)
    if kind == "cor9":
        l_f, s1 = _need(params, kind, "l_f", "sigma1_sq")
        return 1.0 / (2.0 * l_f * (1.0 + s1))
    if kind == "prop11":
        c_f, lt, kap, s1 = _need(params, kind, "c_f", "lambda_tilde_f", "kappa", "sigma1_sq")
        return 1.0 / ((8.0 * c_f / lt) * (1.0 + kap) * (1.0 + s1))
    if kind == "prop12":
        l_pi, = _need(params, kind, "l_pi")
        return 1.0 / (params.c_universal * l_pi**2)
    return np.inf  # thm13 holds for every positive step size


def bound_eval(kind: str, params: BoundParams, eta: float, n: int) -> float:
    """Closed-form theoretical envelope for the chain at step (or horizon) n.

    Rejects eta outside (0, eta_bar(kind, params)]; the bounds are
    conditional on that range and extrapolating them is meaningless.
    Averaged bounds (thm1a/thm1b/thm15/prop11/thm13) need n >= 1, the
    last-iterate bounds (thm1c/cor9/prop12) accept n >= 0.
    """
    if kind not in BOUND_KINDS:
        raise ValueError(f"unknown bound kind {kind!r}")
    if not eta > 0:
        raise ValueError("eta must be > 0")
    limit = eta_bar(kind, params)
    if eta > limit:
        raise ValueError(f"eta = {eta:g} exceeds eta_bar = {limit:g} for {kind!r}")
    min_n = 1 if kind in ("thm1a", "thm1b", "thm15", "prop11", "thm13") else 0
    if not isinstance(n, (int, np.integer)) or n < min_n:
        raise ValueError(f"bound kind {kind!r} needs integer n >= {min_n}")

    if kind in ("thm1a", "thm1b", "thm1c"):
        v0, L, c1, s0, s1 = _need(params, kind, "v0", "L", "c1", "sigma0_sq", "sigma1_sq")
        b = 2.0 * L * (s0 + c1 * (1.0 + s1))
        if kind == "thm1a":
            return 2.0 * v0 / (n * eta) + eta * b
        lam, = _need(params, kind, "lam")
        a = lam / 2.0
        if kind == "thm1b":
            return v0 / (a * n * eta) + eta * b / (2.0 * a)
        return (1.0 - eta * a) ** n * v0 + params.v_sup_kstar + eta * b / (2.0 * a)
    if kind == "thm15":
        v0, L, lam, s0, s1 = _need(params, kind, "v0", "L", "lam", "sigma0_sq", "sigma1_sq")
        a = lam / 2.0
        b_tilde = L * ((1.0 + s1) * params.h_sup_kstar**2 + s0)
        return v0 / (a * n * eta) + eta * b_tilde / a
    if kind == "cor9":
        v0, lam_f, l_f, s0 = _need(params, kind, "v0", "lambda_f", "l_f", "sigma0_sq")
        return (1.0 - eta * lam_f / 2.0) ** n * v0 + 2.0 * eta * l_f * s0 / lam_f
    if kind == "prop11":
        v1_0, lt, kap, s0 = _need(params, kind, "v1_theta0", "lambda_tilde_f", "kappa", "sigma0_sq")
        return 4.0 * v1_0 / (n * eta * lt) + 4.0 * eta * (1.0 + kap) * s0 / lt
    if kind == "prop12":
        v0, l_pi, d_diam = _need(params, kind, "v0", "l_pi", "d_diam")
        return (1.0 - eta / 4.0) ** n * v0 + params.c_universal * eta * l_pi * d_diam**2
    # thm13
    v1_0, c_pi, b_pi = _need(params, kind, "v1_theta0", "c_pi", "b_pi")
    return 4.0 * v1_0 * np.sqrt(c_pi) / (eta * n) + 4.0 * eta * b_pi
