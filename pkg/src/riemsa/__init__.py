"""Fixed step-size stochastic approximation on Riemannian manifolds.

Subpackages and modules:

* :mod:`riemsa.manifolds` -- geometry kernels (points, tangents, exp/log,
  transport, ball projection, tangent Gaussians, frames).
* :mod:`riemsa.linalg` -- symmetric eigendecomposition, spectral matrix
  functions, Wishart sampling.
* :mod:`riemsa.lyapunov` -- Lyapunov functions and closed-form bound
  evaluators for the chain's mean behavior.
* :mod:`riemsa.engine` -- the SA recursion with pluggable noisy oracles,
  trajectory recording, and the deterministic barycenter reference solver.
* :mod:`riemsa.analysis` -- stationary-distribution estimators and the
  bound-domination / bias-expansion / rescaled-CLT checks.
* :mod:`riemsa.experiments` -- JSON-configured experiment runner.
* :mod:`riemsa.cli` -- command line entry point.
"""

__version__ = "0.1.0"

from . import analysis, engine, experiments, linalg, lyapunov, manifolds

__all__ = [
    "analysis",
    "engine",
    "experiments",
    "linalg",
    "lyapunov",
    "manifolds",
    "__version__",
]
