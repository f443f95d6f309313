"""Symmetric-matrix kernels: eigendecomposition, matrix functions, Wishart."""

import numpy as np
import pytest

import riemsa.manifolds as mf
from riemsa.linalg import PositiveDefiniteError, spd_fun, sym_eig, wishart


def random_spd(rng, d, spread=1.0):
    g = rng.standard_normal((d, d))
    a = spread * (g + g.T) / 2.0
    return spd_fun(a, "exp")


def test_sym_eig_identity():
    eig = sym_eig(np.eye(3))
    np.testing.assert_allclose(eig.values, [1.0, 1.0, 1.0])


def test_sym_eig_diagonal_sorted_ascending():
    eig = sym_eig(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_allclose(eig.values, [1.0, 2.0, 3.0])


def test_sym_eig_reconstruction_residual():
    rng = np.random.default_rng(0)
    for _ in range(50):
        g = rng.standard_normal((6, 6))
        a = (g + g.T) / 2.0
        eig = sym_eig(a)
        res = np.linalg.norm(eig.reconstruct() - a)
        assert res <= 1e-10 * max(1.0, np.linalg.norm(a))
        orth = np.linalg.norm(eig.vectors.T @ eig.vectors - np.eye(6))
        assert orth <= 1e-10


def test_sym_eig_deterministic():
    rng = np.random.default_rng(1)
    g = rng.standard_normal((5, 5))
    a = (g + g.T) / 2.0
    e1, e2 = sym_eig(a), sym_eig(a.copy())
    np.testing.assert_array_equal(e1.values, e2.values)
    np.testing.assert_array_equal(e1.vectors, e2.vectors)


def test_sym_eig_rejects_bad_input():
    with pytest.raises(ValueError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        sym_eig(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        sym_eig(np.ones((2, 3)))


def test_spd_fun_log_of_identity_is_zero():
    np.testing.assert_allclose(spd_fun(np.eye(3), "log"), np.zeros((3, 3)), atol=1e-14)


def test_spd_fun_sqrt_diagonal():
    np.testing.assert_allclose(spd_fun(np.diag([4.0, 9.0]), "sqrt"), np.diag([2.0, 3.0]), atol=1e-12)


def test_spd_fun_sqrt_composition():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a = random_spd(rng, 5)
        r = spd_fun(a, "sqrt")
        np.testing.assert_allclose(r @ r, a, rtol=1e-9, atol=1e-12)


def test_spd_fun_log_exp_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = random_spd(rng, 4)
        back = spd_fun(spd_fun(a, "log"), "exp")
        np.testing.assert_allclose(back, a, rtol=1e-9, atol=1e-12)


def test_spd_fun_inv_sqrt():
    rng = np.random.default_rng(4)
    a = random_spd(rng, 4)
    s = spd_fun(a, "inv_sqrt")
    np.testing.assert_allclose(s @ a @ s, np.eye(4), atol=1e-10)


def test_spd_fun_rejects_floor():
    with pytest.raises(PositiveDefiniteError):
        spd_fun(np.diag([1.0, 1e-13]), "log")
    with pytest.raises(PositiveDefiniteError):
        spd_fun(np.diag([1.0, -0.5]), "sqrt")
    # exp is fine on indefinite symmetric input
    spd_fun(np.diag([1.0, -0.5]), "exp")


def test_spd_fun_unknown_name():
    with pytest.raises(ValueError):
        spd_fun(np.eye(2), "cbrt")


def test_wishart_chi_square_mean():
    rng = np.random.default_rng(5)
    n = 100_000
    acc = 0.0
    for _ in range(n):
        acc += wishart(1, 5, rng)[0, 0]
    assert acc / n == pytest.approx(5.0, rel=0.03)


def test_wishart_mean_matches_dof_identity():
    rng = np.random.default_rng(6)
    n = 100_000
    acc = np.zeros((3, 3))
    for _ in range(n):
        acc += wishart(3, 10, rng)
    assert np.abs(acc / n - 10.0 * np.eye(3)).max() <= 0.15


def test_wishart_always_spd():
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        w = wishart(2, 3, rng)
        assert np.linalg.eigvalsh(w)[0] > 0.0


def test_wishart_rejects_low_dof():
    rng = np.random.default_rng(8)
    with pytest.raises(ValueError):
        wishart(3, 2, rng)


# -- metric-level properties backed by the kernels -------------------------

def test_spd_distance_affine_invariance():
    rng = np.random.default_rng(9)
    for d in (2, 3, 4):
        k = mf.spd(d)
        for _ in range(34):
            p = mf.point(k, random_spd(rng, d))
            q = mf.point(k, random_spd(rng, d))
            m = rng.standard_normal((d, d))
            while abs(np.linalg.det(m)) < 1e-3:
                m = rng.standard_normal((d, d))
            pc = mf.point(k, (m @ p.coords @ m.T + (m @ p.coords @ m.T).T) / 2.0)
            qc = mf.point(k, (m @ q.coords @ m.T + (m @ q.coords @ m.T).T) / 2.0)
            assert mf.dist(pc, qc) == pytest.approx(mf.dist(p, q), abs=1e-8, rel=1e-8)


def test_spd_distance_commuting_closed_form():
    k = mf.spd(3)
    p = mf.point(k, np.diag([1.0, 2.0, 0.5]))
    q = mf.point(k, np.diag([3.0, 2.0, 4.0]))
    oracle = np.sqrt(np.log(3.0) ** 2 + np.log(8.0) ** 2)
    assert mf.dist(p, q) == pytest.approx(oracle, abs=1e-10)


def test_spd_geodesic_midpoint_geometric_mean():
    k = mf.spd(2)
    p = mf.point(k, np.diag([1.0, 4.0]))
    q = mf.point(k, np.diag([9.0, 16.0]))
    mid = mf.exp_map(p, 0.5 * mf.log_map(p, q))
    np.testing.assert_allclose(mid.coords, np.diag([3.0, 8.0]), atol=1e-10)
