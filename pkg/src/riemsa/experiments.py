"""JSON-configured experiment runner.

A single JSON file specifies one experiment: the manifold, the oracle,
the step-size grid, chain lengths (directly or as ceil(c/eta)), replicate
counts and analysis constants.  Runners write CSV artifacts plus a plain
``report.txt``; identical config and seed give byte-identical outputs.

CSV schemas (header row, UNIX line endings, '.' decimal separator,
17-significant-digit numerics):

* trajectories.csv -- replicate, step, eta, rho_sq, d_sq, v1
* sweep.csv        -- eta, replicate, stat_name, value
* fits.csv         -- stat_name, slope, intercept, r_sq
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import manifolds as mf
from .analysis import (
    CltInputs,
    bias_check_thm6,
    bound_dominates,
    clt_check,
    estimate_a_matrix,
    estimate_sigma,
    eta_sweep_fit,
    oracle_noise_sampler,
    pool_tails,
    tail_stats,
)
from .engine import (
    CosineWell,
    DiscreteSampler,
    KarcherDiscrete,
    KarcherRescaled,
    LinearPull,
    Oracle,
    ProjectionSpec,
    SaConfig,
    SgdQuadratic,
    WishartSampler,
    aux_rng,
    karcher_mean_field_zero_check,
    karcher_reference,
    run_ensemble,
)
from .lyapunov import BOUND_KINDS, BoundParams, HuberParams, grad_v1, v1

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "serialize_config", "run_experiment"]

EXPERIMENTS = ("geom-test", "run", "sweep", "karcher", "clt", "bias", "bounds")

# aux rng channels (independent of every chain substream)
_CH_ATOMS = 2
_CH_TARGET = 3
_CH_SIGMA = 4
_CH_GEOM = 5


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    manifold: Optional[dict] = None
    oracle: Optional[dict] = None
    eta: Optional[float] = None
    eta_grid: Optional[tuple[float, ...]] = None
    n_steps: Optional[int] = None
    n_rule: Optional[dict] = None
    replicates: int = 1
    seed: int = 0
    burn_fraction: float = 0.5
    record_every: int = 1
    theta0: Optional[tuple] = None
    target: Optional[tuple] = None
    target_sample_count: int = 4096
    projection: Optional[dict] = None
    bounds: Optional[dict] = None
    bound_kind: Optional[str] = None
    bound_value: Optional[str] = None
    checkpoints: Optional[tuple[int, ...]] = None
    tolerance: Optional[float] = None
    min_r_sq: Optional[float] = None
    sigma_samples: int = 100_000
    fd_step: float = 1e-3
    batch_size: Optional[int] = None
    out: Optional[str] = None
    threads: Optional[int] = None


_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}

_ORACLE_KEYS = {
    "sgd_quadratic": {"variant", "rate", "noise_scale", "target", "reg_noise"},
    "linear_pull": {"variant", "rate", "noise_scale", "target", "reg_noise"},
    "karcher_discrete": {"variant", "atoms", "weights", "reg_noise"},
    "karcher_rescaled": {"variant", "distribution", "batch_size", "reg_noise"},
    "cosine_well": {"variant", "amplitude", "noise_scale", "center"},
}


def _listify(value):
    """JSON arrays to tuples, recursively, so configs compare by value."""
    if isinstance(value, list):
        return tuple(_listify(v) for v in value)
    if isinstance(value, dict):
        return {k: _listify(v) for k, v in value.items()}
    return value


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment config; defaults filled in.

    Unknown keys are rejected with a message naming the key; invariant
    violations name the offending field.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in raw:
        if key not in _FIELD_NAMES:
            raise ConfigError(f"unknown key {key!r}")
    cfg = ExperimentConfig(**{k: _listify(v) for k, v in raw.items()})
    _validate(cfg)
    return cfg


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical JSON for a config (parse -> serialize -> parse is identity)."""
    out: dict[str, Any] = {}
    for f in fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        if value != f.default:
            out[f.name] = _untuple(value)
    return json.dumps(out, indent=2, sort_keys=True)


def _untuple(value):
    if isinstance(value, tuple):
        return [_untuple(v) for v in value]
    if isinstance(value, dict):
        return {k: _untuple(v) for k, v in value.items()}
    return value


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(
            f"experiment must be one of {EXPERIMENTS}, got {cfg.experiment!r}"
        )
    if cfg.eta is not None and cfg.eta_grid is not None:
        raise ConfigError("give either 'eta' or 'eta_grid', not both")
    if cfg.eta is not None and not cfg.eta > 0:
        raise ConfigError("eta must be > 0")
    if cfg.eta_grid is not None:
        grid = cfg.eta_grid
        if len(grid) == 0:
            raise ConfigError("eta_grid must be nonempty")
        if any(not e > 0 for e in grid):
            raise ConfigError("eta_grid entries must be > 0")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("eta_grid must be strictly increasing")
    if cfg.n_steps is not None and cfg.n_rule is not None:
        raise ConfigError("give either 'n_steps' or 'n_rule', not both")
    if cfg.n_steps is not None and cfg.n_steps < 0:
        raise ConfigError("n_steps must be >= 0")
    if cfg.n_rule is not None:
        extra = set(cfg.n_rule) - {"c"}
        if extra:
            raise ConfigError(f"unknown key {extra.pop()!r} in n_rule")
        if "c" not in cfg.n_rule or not cfg.n_rule["c"] > 0:
            raise ConfigError("n_rule.c must be > 0")
    if cfg.replicates < 1:
        raise ConfigError("replicates must be >= 1")
    if not 0.0 <= cfg.burn_fraction < 1.0:
        raise ConfigError("burn_fraction must lie in [0, 1)")
    if cfg.record_every < 1:
        raise ConfigError("record_every must be >= 1")
    if cfg.seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    if cfg.manifold is not None:
        extra = set(cfg.manifold) - {"kind", "dim"}
        if extra:
            raise ConfigError(f"unknown key {extra.pop()!r} in manifold")
        _build_kind(cfg)
    if cfg.oracle is not None:
        variant = cfg.oracle.get("variant")
        if variant not in _ORACLE_KEYS:
            raise ConfigError(f"oracle.variant must be one of {sorted(_ORACLE_KEYS)}")
        extra = set(cfg.oracle) - _ORACLE_KEYS[variant]
        if extra:
            raise ConfigError(f"unknown key {sorted(extra)[0]!r} in oracle")
    if cfg.projection is not None:
        extra = set(cfg.projection) - {"radius", "center"}
        if extra:
            raise ConfigError(f"unknown key {extra.pop()!r} in projection")
        if not cfg.projection.get("radius", 0) > 0:
            raise ConfigError("projection.radius must be > 0")
    if cfg.bound_kind is not None and cfg.bound_kind not in BOUND_KINDS:
        raise ConfigError(f"bound_kind must be one of {BOUND_KINDS}")
    if cfg.bounds is not None:
        valid = {f.name for f in fields(BoundParams)}
        extra = set(cfg.bounds) - valid
        if extra:
            raise ConfigError(f"unknown key {sorted(extra)[0]!r} in bounds")
    if cfg.checkpoints is not None:
        if any((not isinstance(n, int)) or n < 0 for n in cfg.checkpoints):
            raise ConfigError("checkpoints must be nonnegative integers")
    if cfg.bound_value is not None and cfg.bound_value not in (
        "quadratic_gap", "rho_sq", "v1", "d_sq"
    ):
        raise ConfigError("bound_value must be quadratic_gap, rho_sq, v1 or d_sq")
    if cfg.threads is not None and cfg.threads < 1:
        raise ConfigError("threads must be >= 1")


# -- builders ---------------------------------------------------------------

def _build_kind(cfg: ExperimentConfig) -> mf.ManifoldKind:
    if cfg.manifold is None:
        raise ConfigError("manifold is required for this experiment")
    kind = cfg.manifold.get("kind")
    if kind not in ("euclidean", "spd", "hyperboloid", "circle"):
        raise ConfigError(f"manifold.kind {kind!r} is not supported")
    dim = cfg.manifold.get("dim", 1)
    try:
        return mf.ManifoldKind(kind, int(dim))
    except mf.GeometryError as exc:
        raise ConfigError(f"manifold.dim invalid: {exc}") from None


def _point_from(kind: mf.ManifoldKind, coords, field: str) -> mf.ManifoldPoint:
    try:
        return mf.point(kind, np.asarray(coords, dtype=float))
    except (mf.GeometryError, ValueError) as exc:
        raise ConfigError(f"{field} is not a valid {kind.name} point: {exc}") from None


def _build_atoms(cfg: ExperimentConfig, kind: mf.ManifoldKind, spec, field: str):
    if isinstance(spec, dict):
        source = spec.get("source")
        if source == "wishart":
            extra = set(spec) - {"source", "count", "dof", "scale"}
            if extra:
                raise ConfigError(f"unknown key {extra.pop()!r} in {field}")
            if kind.name != "spd":
                raise ConfigError(f"{field}: wishart atoms need an spd manifold")
            count = int(spec.get("count", 1))
            sampler = WishartSampler(
                dim=kind.dim, dof=int(spec.get("dof", kind.dim)),
                scale=float(spec.get("scale", 1.0)),
            )
            rng = aux_rng(cfg.seed, _CH_ATOMS)
            return tuple(sampler.sample(rng) for _ in range(count))
        if source == "explicit":
            extra = set(spec) - {"source", "points"}
            if extra:
                raise ConfigError(f"unknown key {extra.pop()!r} in {field}")
            return tuple(_point_from(kind, c, field) for c in spec.get("points", ()))
        raise ConfigError(f"{field}.source must be 'wishart' or 'explicit'")
    raise ConfigError(f"{field} must be an object")


def _build_sampler(cfg: ExperimentConfig, kind: mf.ManifoldKind, spec):
    source = spec.get("source")
    if source == "wishart":
        extra = set(spec) - {"source", "dof", "scale"}
        if extra:
            raise ConfigError(f"unknown key {extra.pop()!r} in oracle.distribution")
        if kind.name != "spd":
            raise ConfigError("wishart distribution needs an spd manifold")
        return WishartSampler(
            dim=kind.dim, dof=int(spec.get("dof", kind.dim)),
            scale=float(spec.get("scale", 1.0)),
        )
    if source == "explicit":
        extra = set(spec) - {"source", "points", "weights"}
        if extra:
            raise ConfigError(f"unknown key {extra.pop()!r} in oracle.distribution")
        atoms = tuple(
            _point_from(kind, c, "oracle.distribution.points")
            for c in spec.get("points", ())
        )
        weights = spec.get("weights")
        if weights is None:
            weights = tuple(1.0 / len(atoms) for _ in atoms)
        return DiscreteSampler(atoms=atoms, weights=tuple(float(w) for w in weights))
    raise ConfigError("oracle.distribution.source must be 'wishart' or 'explicit'")


def _build_oracle(cfg: ExperimentConfig, kind: mf.ManifoldKind) -> Oracle:
    if cfg.oracle is None:
        raise ConfigError("oracle is required for this experiment")
    spec = cfg.oracle
    variant = spec["variant"]
    try:
        if variant in ("sgd_quadratic", "linear_pull"):
            target = spec.get("target")
            pt = mf.origin(kind) if target is None else _point_from(kind, target, "oracle.target")
            cls = SgdQuadratic if variant == "sgd_quadratic" else LinearPull
            return cls(
                target=pt,
                rate=float(spec.get("rate", 1.0)),
                noise_scale=float(spec.get("noise_scale", 0.0)),
                reg_noise=float(spec.get("reg_noise", 0.0)),
            )
        if variant == "karcher_discrete":
            atoms = _build_atoms(cfg, kind, spec.get("atoms"), "oracle.atoms")
            weights = spec.get("weights")
            return KarcherDiscrete(
                atoms=atoms,
                weights=() if weights is None else tuple(float(w) for w in weights),
                reg_noise=float(spec.get("reg_noise", 0.0)),
            )
        if variant == "karcher_rescaled":
            dist_spec = spec.get("distribution")
            if not isinstance(dist_spec, dict):
                raise ConfigError("oracle.distribution is required for karcher_rescaled")
            return KarcherRescaled(
                sampler=_build_sampler(cfg, kind, dist_spec),
                batch_size=int(spec.get("batch_size", 1)),
                reg_noise=float(spec.get("reg_noise", 0.0)),
            )
        # cosine_well
        if kind.name != "circle":
            raise ConfigError("oracle.variant cosine_well needs the circle manifold")
        return CosineWell(
            amplitude=float(spec.get("amplitude", 1.0)),
            noise_scale=float(spec.get("noise_scale", 0.0)),
            center=float(spec.get("center", 0.0)),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"oracle: {exc}") from None


def _resolve_target(cfg: ExperimentConfig, kind: mf.ManifoldKind, oracle: Oracle) -> mf.ManifoldPoint:
    """Diagnostics target: explicit, the oracle's own target, or a computed
    barycenter reference (exact for discrete atoms, sampled else)."""
    if cfg.target is not None:
        return _point_from(kind, cfg.target, "target")
    if isinstance(oracle, (SgdQuadratic, LinearPull)):
        return oracle.target
    if isinstance(oracle, CosineWell):
        return mf.point(kind, [oracle.center])
    if isinstance(oracle, KarcherDiscrete):
        return karcher_reference(kind, oracle.atoms, oracle.weights)
    if isinstance(oracle, KarcherRescaled) and isinstance(oracle.sampler, DiscreteSampler):
        return karcher_reference(kind, oracle.sampler.atoms, oracle.sampler.weights)
    rng = aux_rng(cfg.seed, _CH_TARGET)
    sample = [oracle.sampler.sample(rng) for _ in range(cfg.target_sample_count)]
    return karcher_reference(kind, sample, tol=1e-8)


def _n_steps_for(cfg: ExperimentConfig, eta: float) -> int:
    if cfg.n_steps is not None:
        return cfg.n_steps
    if cfg.n_rule is not None:
        return int(math.ceil(cfg.n_rule["c"] / eta))
    raise ConfigError("one of 'n_steps' or 'n_rule' is required")


def _single_eta(cfg: ExperimentConfig) -> float:
    if cfg.eta is None:
        raise ConfigError("'eta' is required for this experiment")
    return cfg.eta


def _etas(cfg: ExperimentConfig) -> tuple[float, ...]:
    if cfg.eta_grid is not None:
        return cfg.eta_grid
    if cfg.eta is not None:
        return (cfg.eta,)
    raise ConfigError("one of 'eta' or 'eta_grid' is required")


def _sa_config(cfg: ExperimentConfig, kind, oracle, target, eta: float) -> SaConfig:
    projection = None
    if cfg.projection is not None:
        center = cfg.projection.get("center")
        projection = ProjectionSpec(
            center=mf.origin(kind) if center is None else _point_from(kind, center, "projection.center"),
            radius=float(cfg.projection["radius"]),
        )
    theta0 = None if cfg.theta0 is None else _point_from(kind, cfg.theta0, "theta0")
    return SaConfig(
        manifold=kind,
        oracle=oracle,
        eta=eta,
        n_steps=_n_steps_for(cfg, eta),
        projection=projection,
        seed=cfg.seed,
        record_every=cfg.record_every,
        diagnostics_target=target,
        theta0=theta0,
    )


def _bound_params(cfg: ExperimentConfig) -> BoundParams:
    if cfg.bounds is None:
        raise ConfigError("'bounds' constants are required for this experiment")
    return BoundParams(**{k: float(v) for k, v in cfg.bounds.items()})


# -- CSV / report emission ------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


class _Writer:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.report_lines: list[str] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header: list[str], rows) -> None:
        path = self.out_dir / name
        lines = [",".join(header)]
        lines.extend(",".join(_fmt(v) for v in row) for row in rows)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")

    def report(self, line: str = "") -> None:
        self.report_lines.append(line)

    def finish(self, status: int) -> None:
        self.report(f"status: {'PASS' if status == 0 else 'FAIL'}")
        path = self.out_dir / "report.txt"
        path.write_text("\n".join(self.report_lines) + "\n", encoding="utf-8", newline="\n")


def _trajectory_rows(trajs):
    for traj in trajs:
        eta = traj.config.eta
        for i, step in enumerate(traj.steps):
            yield (
                traj.replicate,
                int(step),
                eta,
                traj.rho_sq[i],
                traj.d_sq[i],
                traj.v1[i],
            )


# -- experiment bodies -------------------------------------------------------------

def _run_geom_test(cfg: ExperimentConfig, w: _Writer) -> int:
    rng = aux_rng(cfg.seed, _CH_GEOM)
    kinds = [mf.euclidean(3), mf.spd(3), mf.hyperboloid(2), mf.circle()]
    rows = []
    failures = 0

    def check(kind_name: str, name: str, err: float, tol: float) -> None:
        nonlocal failures
        ok = err <= tol
        failures += 0 if ok else 1
        rows.append((0.0, 0, f"{kind_name}/{name}", err))
        w.report(f"{'PASS' if ok else 'FAIL'} {kind_name:12s} {name:24s} max_err={err:.3e} tol={tol:g}")

    def rand_pt(kind, spread=1.0):
        p0 = mf.origin(kind)
        return mf.exp_map(p0, mf.gaussian_tangent(p0, spread, rng))

    for kind in kinds:
        cap = 2.0 if kind.name == "circle" else 5.0
        spread = 0.3 if kind.name == "hyperboloid" else 1.0
        rt_err = tr_err = 0.0
        for _ in range(1000):
            p = rand_pt(kind, spread)
            v = mf.gaussian_tangent(p, 1.0, rng)
            n = mf.norm(p, v)
            if n > 0:
                v = (cap * rng.random() / n) * v
            q = mf.exp_map(p, v)
            back = mf.log_map(p, q)
            rt_err = max(rt_err, mf.norm(p, back - v) / max(1.0, mf.norm(p, v)))
            u = mf.gaussian_tangent(p, 1.0, rng)
            tu = mf.transport(p, q, u)
            tr_err = max(tr_err, abs(mf.norm(q, tu) - mf.norm(p, u)))
        check(kind.name, "exp_log_round_trip", rt_err, 1e-8)
        check(kind.name, "transport_isometry", tr_err, 1e-8)

        frame = mf.orthonormal_frame(rand_pt(kind, spread))
        gram = np.array(
            [[mf.inner(frame[0].base, a, b) for b in frame] for a in frame]
        )
        check(kind.name, "frame_orthonormality", float(np.abs(gram - np.eye(len(frame))).max()), 1e-12)

        fd_err = 0.0
        target = rand_pt(kind, 0.5)
        params = HuberParams(1.0, target)
        for _ in range(25):
            p = rand_pt(kind, spread)
            g = grad_v1(params, p)
            u = mf.gaussian_tangent(p, 1.0, rng)
            nu = mf.norm(p, u)
            if nu == 0:
                continue
            u = (1.0 / nu) * u
            step = 1e-4
            fd = (v1(params, mf.exp_map(p, step * u))
                  - v1(params, mf.exp_map(p, (-step) * u))) / (2.0 * step)
            fd_err = max(fd_err, abs(fd - mf.inner(p, g, u)))
        check(kind.name, "grad_v1_finite_diff", fd_err, 1e-5)

    # affine invariance of the spd distance, d <= 4
    for d in (2, 3, 4):
        kind = mf.spd(d)
        inv_err = 0.0
        for _ in range(34):
            p, q = rand_pt(kind), rand_pt(kind)
            m = rng.standard_normal((d, d))
            while abs(np.linalg.det(m)) < 1e-3:
                m = rng.standard_normal((d, d))
            pc = mf.point(kind, (m @ p.coords @ m.T + (m @ p.coords @ m.T).T) / 2.0)
            qc = mf.point(kind, (m @ q.coords @ m.T + (m @ q.coords @ m.T).T) / 2.0)
            inv_err = max(inv_err, abs(mf.dist(pc, qc) - mf.dist(p, q)))
        check(f"spd{d}", "affine_invariance", inv_err, 1e-8)

    w.csv("sweep.csv", ["eta", "replicate", "stat_name", "value"], rows)
    return 0 if failures == 0 else 1


def _run_run(cfg: ExperimentConfig, w: _Writer, threads: Optional[int]) -> int:
    kind = _build_kind(cfg)
    oracle = _build_oracle(cfg, kind)
    target = _resolve_target(cfg, kind, oracle)
    sa = _sa_config(cfg, kind, oracle, target, _single_eta(cfg))
    trajs = run_ensemble(sa, cfg.replicates, max_workers=threads)
    w.csv(
        "trajectories.csv",
        ["replicate", "step", "eta", "rho_sq", "d_sq", "v1"],
        _trajectory_rows(trajs),
    )
    stats = tail_stats(trajs[0], cfg.burn_fraction, target) if sa.n_steps >= 2 else None
    w.report(f"chains: {cfg.replicates} x {sa.n_steps} steps at eta={sa.eta:g}")
    if stats is not None:
        w.report(f"replicate 0 tail: mean_rho_sq={stats.mean_rho_sq:.6g} "
                 f"var_rho_sq={stats.var_rho_sq:.6g} mean_d_sq={stats.mean_d_sq:.6g} "
                 f"mean_v1={stats.mean_v1:.6g} n_tail={stats.n_tail}")
    return 0


def _run_sweep(cfg: ExperimentConfig, w: _Writer, threads: Optional[int]) -> int:
    kind = _build_kind(cfg)
    oracle = _build_oracle(cfg, kind)
    target = _resolve_target(cfg, kind, oracle)
    rows = []
    mean_pts, var_pts = [], []
    for eta in _etas(cfg):
        sa = _sa_config(cfg, kind, oracle, target, eta)
        # final iterate only: set recording to the last step
        sa = SaConfig(
            manifold=sa.manifold, oracle=sa.oracle, eta=eta, n_steps=sa.n_steps,
            projection=sa.projection, seed=sa.seed, record_every=max(1, sa.n_steps),
            diagnostics_target=target, theta0=sa.theta0,
        )
        trajs = run_ensemble(sa, cfg.replicates, max_workers=threads)
        finals = np.array([t.rho_sq[-1] for t in trajs])
        rows.extend((eta, t.replicate, "rho_sq_final", t.rho_sq[-1]) for t in trajs)
        mean_pts.append((eta, float(finals.mean())))
        var_pts.append((eta, float(finals.var(ddof=1)) if len(finals) > 1 else 0.0))
        w.report(f"eta={eta:g}: n={sa.n_steps} mean_rho_sq={finals.mean():.6g} "
                 f"var_rho_sq={var_pts[-1][1]:.6g} over {cfg.replicates} replicates")
    w.csv("sweep.csv", ["eta", "replicate", "stat_name", "value"], rows)
    status = 0
    fit_rows = []
    if len(mean_pts) >= 2:
        fits = {"mean_rho_sq": eta_sweep_fit(mean_pts), "var_rho_sq": eta_sweep_fit(var_pts)}
        for name, fit in fits.items():
            fit_rows.append((name, fit.slope, fit.intercept, fit.r_sq))
            w.report(f"fit {name}: slope={fit.slope:.6g} intercept={fit.intercept:.6g} "
                     f"r_sq={fit.r_sq:.6g}")
        if cfg.min_r_sq is not None:
            for name, fit in fits.items():
                ok = fit.r_sq >= cfg.min_r_sq and fit.slope > 0
                w.report(f"{'PASS' if ok else 'FAIL'} {name}: r_sq >= {cfg.min_r_sq:g} "
                         f"and positive slope")
                status = status if ok else 1
    w.csv("fits.csv", ["stat_name", "slope", "intercept", "r_sq"], fit_rows)
    return status


def _run_karcher(cfg: ExperimentConfig, w: _Writer) -> int:
    kind = _build_kind(cfg)
    oracle = _build_oracle(cfg, kind)
    if not isinstance(oracle, KarcherDiscrete):
        raise ConfigError("karcher experiment needs a karcher_discrete oracle")
    ref = karcher_reference(kind, oracle.atoms, oracle.weights)
    grad_norm = karcher_mean_field_zero_check(ref, oracle.atoms, oracle.weights)
    rows = [(0.0, 0, "grad_norm", grad_norm)]
    flat = ref.coords.reshape(-1)
    rows.extend((0.0, 0, f"coord_{i}", c) for i, c in enumerate(flat))
    w.csv("sweep.csv", ["eta", "replicate", "stat_name", "value"], rows)
    w.report(f"barycenter of {len(oracle.atoms)} atoms on {kind.name}(d={kind.dim})")
    w.report(f"gradient norm at solution: {grad_norm:.3e}")
    return 0


def _run_clt(cfg: ExperimentConfig, w: _Writer, threads: Optional[int]) -> int:
    kind = _build_kind(cfg)
    oracle = _build_oracle(cfg, kind)
    target = _resolve_target(cfg, kind, oracle)
    eta = _single_eta(cfg)
    sa = _sa_config(cfg, kind, oracle, target, eta)
    trajs = run_ensemble(sa, cfg.replicates, max_workers=threads)
    tail = pool_tails(trajs, cfg.burn_fraction)
    a = estimate_a_matrix(oracle.mean_field, target, cfg.fd_step)
    sigma = estimate_sigma(
        oracle_noise_sampler(oracle, target), target, cfg.sigma_samples,
        aux_rng(cfg.seed, _CH_SIGMA),
    )
    report = clt_check(tail, target, CltInputs(a, sigma))
    rows = [(eta, 0, "n_tail", float(len(tail)))]
    d = report.predicted_v.shape[0]
    for i in range(d):
        for j in range(d):
            rows.append((eta, 0, f"cov_emp_{i}{j}", report.empirical_cov[i, j]))
            rows.append((eta, 0, f"v_pred_{i}{j}", report.predicted_v[i, j]))
    rows.append((eta, 0, "rel_error_operator_norm", report.rel_error_operator_norm))
    w.csv("sweep.csv", ["eta", "replicate", "stat_name", "value"], rows)
    w.report(f"pooled tail samples: {len(tail)} (burn_fraction={cfg.burn_fraction:g})")
    w.report("empirical covariance of rescaled samples:")
    for i in range(d):
        w.report("  " + "  ".join(f"{report.empirical_cov[i, j]: .6e}" for j in range(d)))
    w.report("predicted stationary covariance:")
    for i in range(d):
        w.report("  " + "  ".join(f"{report.predicted_v[i, j]: .6e}" for j in range(d)))
    tol = 0.15 if cfg.tolerance is None else cfg.tolerance
    ok = report.rel_error_operator_norm <= tol
    w.report(f"{'PASS' if ok else 'FAIL'} rel_error={report.rel_error_operator_norm:.4f} "
             f"(threshold {tol:g})")
    return 0 if ok else 1


def _run_bias(cfg: ExperimentConfig, w: _Writer, threads: Optional[int]) -> int:
    kind = _build_kind(cfg)
    if kind.name != "circle":
        raise ConfigError("bias experiment runs on the circle manifold")
    oracle = _build_oracle(cfg, kind)
    if not isinstance(oracle, CosineWell):
        raise ConfigError("bias experiment needs a cosine_well oracle")
    target = _resolve_target(cfg, kind, oracle)
    tol = 0.15 if cfg.tolerance is None else cfg.tolerance
    rows = []
    status = 0
    for eta in _etas(cfg):
        sa = _sa_config(cfg, kind, oracle, target, eta)
        trajs = run_ensemble(sa, cfg.replicates, max_workers=threads)
        tail = pool_tails(trajs, cfg.burn_fraction)
        report = bias_check_thm6(
            tail, oracle.objective, oracle_noise_sampler(oracle, target), target,
            fd_step=cfg.fd_step, sigma_samples=cfg.sigma_samples,
            rng=aux_rng(cfg.seed, _CH_SIGMA),
        )
        rows.extend([
            (eta, 0, "lhs", report.lhs),
            (eta, 0, "rhs", report.rhs),
            (eta, 0, "lhs_over_eta", report.lhs / eta),
            (eta, 0, "rel_error", report.rel_error),
        ])
        ok = report.rel_error <= tol
        status = status if ok else 1
        w.report(f"{'PASS' if ok else 'FAIL'} eta={eta:g}: lhs={report.lhs:.6e} "
                 f"rhs={report.rhs:.6e} lhs/eta={report.lhs / eta:.6e} "
                 f"rel_error={report.rel_error:.4f} (threshold {tol:g})")
    w.csv("sweep.csv", ["eta", "replicate", "stat_name", "value"], rows)
    return status


def _run_bounds(cfg: ExperimentConfig, w: _Writer, threads: Optional[int]) -> int:
    kind = _build_kind(cfg)
    oracle = _build_oracle(cfg, kind)
    target = _resolve_target(cfg, kind, oracle)
    if cfg.bound_kind is None:
        raise ConfigError("'bound_kind' is required for the bounds experiment")
    if cfg.checkpoints is None:
        raise ConfigError("'checkpoints' are required for the bounds experiment")
    params = _bound_params(cfg)
    eta = _single_eta(cfg)
    sa = _sa_config(cfg, kind, oracle, target, eta)
    trajs = run_ensemble(sa, cfg.replicates, max_workers=threads)

    value_name = cfg.bound_value or "rho_sq"
    rate = getattr(oracle, "rate", 1.0)

    def value_fn(p: mf.ManifoldPoint) -> float:
        r2 = mf.dist(target, p) ** 2
        if value_name == "quadratic_gap":
            return 0.5 * rate * r2
        if value_name == "v1":
            return float(np.sqrt(r2 + 1.0) - 1.0)
        if value_name == "d_sq":
            return r2 / (1.0 + r2)
        return r2

    report = bound_dominates(trajs, cfg.bound_kind, params, cfg.checkpoints, value_fn)
    rows = []
    for n, margin in zip(report.checkpoints, report.margins):
        rows.append((eta, 0, f"margin_at_{n}", margin))
        w.report(f"{'PASS' if margin >= 0 else 'FAIL'} checkpoint n={n}: "
                 f"bound margin {margin:.6g}")
    w.csv("sweep.csv", ["eta", "replicate", "stat_name", "value"], rows)
    w.report(f"violations: {list(report.violations)}")
    return 0 if not report.violations else 1


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: Optional[str] = None,
    seed_override: Optional[int] = None,
    threads: Optional[int] = None,
) -> int:
    """Run one configured experiment; returns the process exit status.

    0 on success, 1 when a tolerance or invariant check fails, 2 on a
    configuration error.  CSV artifacts and ``report.txt`` are written to
    ``out_dir`` (or the config's ``out``, or the working directory).
    """
    if seed_override is not None:
        cfg = ExperimentConfig(**{**{f.name: getattr(cfg, f.name) for f in fields(cfg)},
                                  "seed": seed_override})
    directory = Path(out_dir or cfg.out or os.getcwd())
    w = _Writer(directory)
    w.report(f"experiment: {cfg.experiment}")
    w.report(f"seed: {cfg.seed}")
    w.report("")
    threads = threads if threads is not None else cfg.threads
    try:
        if cfg.experiment == "geom-test":
            status = _run_geom_test(cfg, w)
        elif cfg.experiment == "run":
            status = _run_run(cfg, w, threads)
        elif cfg.experiment == "sweep":
            status = _run_sweep(cfg, w, threads)
        elif cfg.experiment == "karcher":
            status = _run_karcher(cfg, w)
        elif cfg.experiment == "clt":
            status = _run_clt(cfg, w, threads)
        elif cfg.experiment == "bias":
            status = _run_bias(cfg, w, threads)
        else:
            status = _run_bounds(cfg, w, threads)
    except ConfigError as exc:
        w.report(f"config error: {exc}")
        w.finish(2)
        raise
    w.report("")
    w.finish(status)
    return status
