"""Stationary-distribution estimators and the quantitative theory checks."""

import numpy as np
import pytest

import riemsa.manifolds as mf
from riemsa.analysis import (
    CltInputs,
    TailSampleSet,
    bias_check_thm6,
    bound_dominates,
    clt_check,
    discrete_sigma,
    empirical_cov,
    estimate_a_matrix,
    estimate_sigma,
    eta_sweep_fit,
    lyapunov_solve,
    oracle_noise_sampler,
    pool_tails,
    rescale_samples,
    RescaledSampleSet,
    tail_stats,
)
from riemsa.engine import (
    CosineWell,
    KarcherDiscrete,
    LinearPull,
    SaConfig,
    SgdQuadratic,
    chain_rng,
    karcher_reference,
    run_chain,
    run_ensemble,
)
from riemsa.lyapunov import BoundParams


def random_point(kind, rng, spread=1.0):
    p0 = mf.origin(kind)
    return mf.exp_map(p0, mf.gaussian_tangent(p0, spread, rng))


def constant_trajectory(kind, pt, n_steps=10, eta=0.1, target=None):
    oracle = SgdQuadratic(target=pt, rate=1.0, noise_scale=0.0)
    config = SaConfig(manifold=kind, oracle=oracle, eta=eta, n_steps=n_steps,
                      theta0=pt, diagnostics_target=target)
    return run_chain(config)


# -- tail_stats ---------------------------------------------------------------

def test_tail_stats_constant_at_target():
    k = mf.euclidean(2)
    t = mf.point(k, [1.0, 1.0])
    traj = constant_trajectory(k, t)
    stats = tail_stats(traj, 0.5, t)
    assert stats.mean_rho_sq == 0.0
    assert stats.var_rho_sq == 0.0
    assert stats.mean_d_sq == 0.0
    assert stats.mean_v1 == 0.0


def test_tail_stats_constant_at_distance_one():
    k = mf.euclidean(2)
    pt = mf.point(k, [1.0, 0.0])
    target = mf.origin(k)
    traj = constant_trajectory(k, pt)
    stats = tail_stats(traj, 0.5, target)
    assert stats.mean_rho_sq == pytest.approx(1.0)
    assert stats.mean_d_sq == pytest.approx(0.5)
    assert stats.var_rho_sq == pytest.approx(0.0, abs=1e-15)


def test_tail_stats_ar1_closed_form():
    # theta' = (1 - eta*lam) theta + eta * N(0, sigma^2):
    # stationary E[rho^2] = eta sigma^2 / (lam (2 - eta lam))
    k = mf.euclidean(1)
    eta, lam, sigma = 0.1, 1.0, 1.0
    oracle = SgdQuadratic(target=mf.origin(k), rate=lam, noise_scale=sigma)
    config = SaConfig(manifold=k, oracle=oracle, eta=eta, n_steps=400_000, seed=123,
                      diagnostics_target=mf.origin(k))
    traj = run_chain(config)
    stats = tail_stats(traj, 0.5, mf.origin(k))
    expect = eta * sigma**2 / (lam * (2.0 - eta * lam))
    assert expect == pytest.approx(0.0526316, abs=1e-6)
    assert stats.mean_rho_sq == pytest.approx(expect, rel=0.05)
    assert stats.n_tail == 200_001


def test_tail_stats_needs_two_records():
    k = mf.euclidean(1)
    traj = constant_trajectory(k, mf.origin(k), n_steps=0)
    with pytest.raises(ValueError):
        tail_stats(traj, 0.5, mf.origin(k))


# -- eta_sweep_fit ----------------------------------------------------------------

def test_eta_sweep_fit_exact_line():
    fit = eta_sweep_fit([(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)])
    assert fit.slope == pytest.approx(2.0)
    assert fit.intercept == pytest.approx(0.0, abs=1e-12)
    assert fit.r_sq == pytest.approx(1.0)


def test_eta_sweep_fit_two_points_exact():
    fit = eta_sweep_fit([(1.0, 1.0), (3.0, 2.0)])
    assert fit.r_sq == pytest.approx(1.0)
    assert fit.slope == pytest.approx(0.5)


def test_eta_sweep_fit_noisy_line_slope_recovery():
    rng = np.random.default_rng(0)
    slope, intercept, noise = 3.0, 0.5, 0.05
    x = np.linspace(0.01, 0.1, 20)
    pts = [(xi, slope * xi + intercept + noise * rng.standard_normal()) for xi in x]
    fit = eta_sweep_fit(pts)
    # OLS sampling distribution: se(slope) = noise / (sqrt(n) * std(x))
    se = noise / (np.sqrt(len(x)) * x.std())
    assert abs(fit.slope - slope) <= 3.0 * se


def test_eta_sweep_fit_rejects_degenerate():
    with pytest.raises(ValueError):
        eta_sweep_fit([(1.0, 2.0)])
    with pytest.raises(ValueError):
        eta_sweep_fit([(1.0, 2.0), (1.0, 3.0)])


# -- rescale_samples / empirical_cov ------------------------------------------------

def tail_from_points(kind, pts, eta):
    return TailSampleSet(kind=kind, eta=eta,
                         coords=np.stack([p.coords for p in pts]), burn_fraction=0.0)


def test_rescale_samples_at_target_is_zero():
    k = mf.spd(2)
    rng = np.random.default_rng(1)
    t = random_point(k, rng)
    rs = rescale_samples(tail_from_points(k, [t, t], 0.04), t)
    np.testing.assert_allclose(rs.coords, 0.0, atol=1e-12)


def test_rescale_samples_flat_example():
    k = mf.euclidean(2)
    t = mf.origin(k)
    pt = mf.point(k, [0.3, 0.4])
    rs = rescale_samples(tail_from_points(k, [pt], 0.01), t)
    np.testing.assert_allclose(rs.coords[0], [3.0, 4.0], atol=1e-12)


def test_rescale_samples_norm_identity_hyperbolic():
    k = mf.hyperboloid(2)
    rng = np.random.default_rng(2)
    t = random_point(k, rng)
    pts = [random_point(k, rng, 1.2) for _ in range(100)]
    eta = 0.02
    rs = rescale_samples(tail_from_points(k, pts, eta), t)
    for i, p in enumerate(pts):
        expect = mf.dist(t, p) / np.sqrt(eta)
        assert np.linalg.norm(rs.coords[i]) == pytest.approx(expect, abs=1e-10)


def test_empirical_cov_degenerate_and_two_sample():
    rs = RescaledSampleSet(eta=0.1, coords=np.zeros((5, 2)))
    np.testing.assert_allclose(empirical_cov(rs), np.zeros((2, 2)))
    rs2 = RescaledSampleSet(eta=0.1, coords=np.array([[-1.0], [1.0]]))
    assert empirical_cov(rs2)[0, 0] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        empirical_cov(RescaledSampleSet(eta=0.1, coords=np.zeros((1, 2))))


def test_empirical_cov_known_gaussian():
    rng = np.random.default_rng(3)
    cov = np.array([[2.0, 0.6], [0.6, 1.0]])
    l = np.linalg.cholesky(cov)
    x = rng.standard_normal((100_000, 2)) @ l.T
    est = empirical_cov(RescaledSampleSet(eta=1.0, coords=x))
    assert np.abs(est - cov).max() <= 0.03 * np.abs(cov).max()


def test_empirical_cov_frame_invariant_spectrum():
    # spectra agree between the default frame and a rotated frame
    k = mf.hyperboloid(2)
    rng = np.random.default_rng(4)
    t = random_point(k, rng, 0.5)
    pts = [random_point(k, rng, 0.8) for _ in range(400)]
    tail = tail_from_points(k, pts, 0.05)
    frame = mf.orthonormal_frame(t)
    c, s = np.cos(0.7), np.sin(0.7)
    rotated = [c * frame[0] + s * frame[1], (-s) * frame[0] + c * frame[1]]
    cov1 = empirical_cov(rescale_samples(tail, t))
    cov2 = empirical_cov(rescale_samples(tail, t, frame=rotated))
    e1 = np.linalg.eigvalsh(cov1)
    e2 = np.linalg.eigvalsh(cov2)
    np.testing.assert_allclose(e1, e2, atol=1e-10)


# -- lyapunov_solve ------------------------------------------------------------------

def test_lyapunov_solve_identity_example():
    v = lyapunov_solve(CltInputs(-np.eye(2), 2.0 * np.eye(2)))
    np.testing.assert_allclose(v, np.eye(2), atol=1e-12)


def test_lyapunov_solve_diagonal_example():
    v = lyapunov_solve(CltInputs(np.diag([-1.0, -2.0]), np.diag([2.0, 4.0])))
    np.testing.assert_allclose(v, np.eye(2), atol=1e-12)


def test_lyapunov_solve_random_stable_residuals():
    rng = np.random.default_rng(5)
    for _ in range(100):
        d = int(rng.integers(1, 7))
        m = rng.standard_normal((d, d))
        shift = max(0.0, np.max(np.real(np.linalg.eigvals(m)))) + 0.3
        a = m - shift * np.eye(d)
        g = rng.standard_normal((d, d))
        sigma = g @ g.T
        inputs = CltInputs(a, sigma)
        v = lyapunov_solve(inputs)
        res = np.linalg.norm(a @ v + v @ a.T + sigma)
        assert res <= 1e-10 * max(1.0, np.linalg.norm(sigma))
        assert np.linalg.eigvalsh(v)[0] >= -1e-10


def test_clt_inputs_validation():
    with pytest.raises(ValueError):
        CltInputs(np.eye(2), np.eye(2))  # unstable A
    with pytest.raises(ValueError):
        CltInputs(-np.eye(2), np.array([[1.0, 0.5], [0.0, 1.0]]))  # asymmetric
    with pytest.raises(ValueError):
        CltInputs(-np.eye(2), -np.eye(2))  # not PSD


# -- estimate_a_matrix ----------------------------------------------------------------

def test_estimate_a_euclidean_linear_field():
    k = mf.euclidean(3)
    t = mf.point(k, [0.5, -1.0, 2.0])
    lam = 0.7
    field = SgdQuadratic(target=t, rate=lam, noise_scale=0.0).mean_field
    a = estimate_a_matrix(field, t, fd_step=1e-4)
    np.testing.assert_allclose(a, -lam * np.eye(3), atol=1e-8)


def test_estimate_a_hyperbolic_linear_pull():
    k = mf.hyperboloid(2)
    rng = np.random.default_rng(6)
    t = random_point(k, rng)
    field = LinearPull(target=t, rate=1.0, noise_scale=0.0).mean_field
    a = estimate_a_matrix(field, t, fd_step=1e-3)
    np.testing.assert_allclose(a, -np.eye(2), atol=1e-5)


def test_estimate_a_gradient_field_is_symmetric():
    k = mf.hyperboloid(2)
    rng = np.random.default_rng(7)
    atoms = tuple(random_point(k, rng) for _ in range(5))
    oracle = KarcherDiscrete(atoms=atoms)
    t = karcher_reference(k, atoms)
    a = estimate_a_matrix(oracle.mean_field, t, fd_step=1e-3)
    assert np.abs(a - a.T).max() <= 1e-5


def test_estimate_a_rejects_bad_step():
    k = mf.euclidean(1)
    field = SgdQuadratic(target=mf.origin(k), rate=1.0, noise_scale=0.0).mean_field
    with pytest.raises(ValueError):
        estimate_a_matrix(field, mf.origin(k), fd_step=0.0)


# -- estimate_sigma ------------------------------------------------------------------

def test_estimate_sigma_zero_noise():
    k = mf.euclidean(2)
    t = mf.origin(k)
    sampler = oracle_noise_sampler(SgdQuadratic(target=t, rate=1.0, noise_scale=0.0), t)
    sig = estimate_sigma(sampler, t, 10, chain_rng(0))
    np.testing.assert_allclose(sig, np.zeros((2, 2)))


def test_estimate_sigma_isotropic():
    k = mf.hyperboloid(2)
    rng = np.random.default_rng(8)
    t = random_point(k, rng)
    sigma = 0.4
    sampler = oracle_noise_sampler(LinearPull(target=t, rate=1.0, noise_scale=sigma), t)
    sig = estimate_sigma(sampler, t, 100_000, chain_rng(1))
    assert np.abs(sig - sigma**2 * np.eye(2)).max() <= 0.03 * sigma**2


def test_discrete_sigma_trace_identity_at_barycenter():
    k = mf.spd(2)
    rng = np.random.default_rng(9)
    atoms = tuple(random_point(k, rng) for _ in range(5))
    oracle = KarcherDiscrete(atoms=atoms)
    t = karcher_reference(k, atoms)
    sig = discrete_sigma(oracle, t)
    expect = np.mean([mf.dist(t, x) ** 2 for x in atoms])
    assert np.trace(sig) == pytest.approx(expect, abs=1e-10)


# -- clt_check ------------------------------------------------------------------------

def test_clt_check_degenerate_tail_gives_unit_error():
    k = mf.euclidean(2)
    t = mf.origin(k)
    tail = tail_from_points(k, [t, t, t], 0.01)
    report = clt_check(tail, t, CltInputs(-np.eye(2), 0.09 * np.eye(2)))
    np.testing.assert_allclose(report.empirical_cov, np.zeros((2, 2)))
    assert report.rel_error_operator_norm == pytest.approx(1.0)


def test_clt_check_hyperbolic_prediction_matches_half_sigma_sq():
    report_v = lyapunov_solve(CltInputs(-np.eye(2), 0.09 * np.eye(2)))
    np.testing.assert_allclose(report_v, 0.045 * np.eye(2), atol=1e-12)


# -- bias_check -------------------------------------------------------------------------

def test_bias_check_zero_noise():
    k = mf.circle()
    t = mf.origin(k)
    oracle = CosineWell(amplitude=1.0, noise_scale=0.0)
    tail = tail_from_points(k, [t, t], 0.01)
    report = bias_check_thm6(
        tail, oracle.objective, oracle_noise_sampler(oracle, t), t,
        sigma_samples=10,
    )
    assert report.lhs == pytest.approx(0.0, abs=1e-12)
    assert report.rhs == pytest.approx(0.0, abs=1e-12)
    assert report.rel_error == 0.0


def test_bias_check_rejects_noncompact():
    k = mf.euclidean(1)
    t = mf.origin(k)
    tail = tail_from_points(k, [t, t], 0.01)
    with pytest.raises(ValueError):
        bias_check_thm6(tail, lambda a: a**2, lambda rng: None, t)


def test_bias_check_cosine_well_first_order():
    # linearized stationary variance: E[sin^2 phi]/eta -> sigma^2/2
    k = mf.circle()
    t = mf.origin(k)
    sigma, eta = 0.5, 1e-2
    oracle = CosineWell(amplitude=1.0, noise_scale=sigma)
    config = SaConfig(manifold=k, oracle=oracle, eta=eta, n_steps=400_000,
                      seed=21, diagnostics_target=t)
    traj = run_chain(config)
    tail = pool_tails([traj], 0.5)
    report = bias_check_thm6(
        tail, oracle.objective, oracle_noise_sampler(oracle, t), t,
        sigma_samples=20_000, rng=chain_rng(77),
    )
    assert report.lhs >= 0.0
    assert report.lhs / eta == pytest.approx(sigma**2 / 2.0, rel=0.15)
    assert report.rel_error <= 0.15


# -- bound_dominates -----------------------------------------------------------------------

def cor9_setup(n_steps, sigma, seed=5, replicates=40):
    k = mf.euclidean(1)
    target = mf.point(k, [2.0])
    oracle = SgdQuadratic(target=target, rate=1.0, noise_scale=sigma)
    config = SaConfig(manifold=k, oracle=oracle, eta=0.25, n_steps=n_steps, seed=seed,
                      record_every=1, diagnostics_target=target)
    trajs = run_ensemble(config, replicates, max_workers=1)

    def value(p):
        return 0.5 * mf.dist(target, p) ** 2

    params = BoundParams(v0=value(mf.origin(k)), lambda_f=1.0, l_f=1.0,
                         sigma0_sq=sigma**2, sigma1_sq=0.0)
    return trajs, params, value


def test_bound_dominates_deterministic_contraction():
    trajs, params, value = cor9_setup(n_steps=100, sigma=0.0)
    report = bound_dominates(trajs, "cor9", params, [0, 10, 50, 100], value)
    assert report.violations == ()
    assert all(m >= 0 for m in report.margins)


def test_bound_dominates_noisy_zero_violations():
    trajs, params, value = cor9_setup(n_steps=200, sigma=1.0)
    report = bound_dominates(trajs, "cor9", params, [0, 10, 100, 200], value)
    assert report.violations == ()


def test_bound_dominates_trivial_n0():
    trajs, params, value = cor9_setup(n_steps=5, sigma=0.5)
    report = bound_dominates(trajs, "cor9", params, [0], value)
    assert report.violations == ()


def test_bound_dominates_needs_30_replicates():
    trajs, params, value = cor9_setup(n_steps=5, sigma=0.5, replicates=40)
    with pytest.raises(ValueError):
        bound_dominates(trajs[:10], "cor9", params, [0], value)


def test_bound_dominates_flags_violation():
    trajs, params, value = cor9_setup(n_steps=10, sigma=0.0)
    # sabotage: claim a much smaller starting value than the chain used
    bad = BoundParams(v0=1e-6, lambda_f=1.0, l_f=1.0, sigma0_sq=0.0, sigma1_sq=0.0)
    report = bound_dominates(trajs, "cor9", bad, [0], value)
    assert report.violations == (0,)


def test_bound_dominates_missing_checkpoint():
    trajs, params, value = cor9_setup(n_steps=10, sigma=0.0)
    with pytest.raises(ValueError):
        bound_dominates(trajs, "cor9", params, [11], value)


# -- pool_tails ------------------------------------------------------------------------------

def test_pool_tails_counts():
    k = mf.euclidean(1)
    oracle = SgdQuadratic(target=mf.origin(k), rate=1.0, noise_scale=1.0)
    config = SaConfig(manifold=k, oracle=oracle, eta=0.1, n_steps=100, seed=0)
    trajs = run_ensemble(config, 3, max_workers=1)
    tail = pool_tails(trajs, 0.5)
    assert len(tail) == 3 * 51
    assert tail.eta == 0.1


def test_pool_tails_rejects_mixed_eta():
    k = mf.euclidean(1)
    oracle = SgdQuadratic(target=mf.origin(k), rate=1.0, noise_scale=1.0)
    t1 = run_chain(SaConfig(manifold=k, oracle=oracle, eta=0.1, n_steps=10))
    t2 = run_chain(SaConfig(manifold=k, oracle=oracle, eta=0.2, n_steps=10))
    with pytest.raises(ValueError):
        pool_tails([t1, t2], 0.5)
