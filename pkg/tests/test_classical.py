import numpy as np
import pytest
from hypothesis import given, strategies as st

from entroflux import classical as cl
from entroflux import ldp
from entroflux.numerics import POS_INF, DomainError


@pytest.fixture(scope="module")
def small():
    cfg = cl.ChainConfig.from_temperatures(2.0, 1.0, N=2, M=60)
    return cfg, cl.chain_build(cfg)


def test_config():
    cfg = cl.ChainConfig.from_temperatures(2.0, 1.0)
    assert cfg.beta == pytest.approx(2 / 3)
    assert np.allclose(cfg.X, [2 / 3 - 0.5, 2 / 3 - 1.0])
    with pytest.raises(ValueError):
        cl.ChainConfig(N=5, M=5)
    with pytest.raises(DomainError):
        cl.ChainConfig(beta_L=-1.0)


def test_kappa_and_steady():
    assert cl.KAPPA == pytest.approx((np.sqrt(5) - 1) / (2 * np.pi))
    s = cl.chain_steady(0.5, 1.0)
    assert s.flux == pytest.approx(cl.KAPPA * 1.0)
    assert s.entropy_production == pytest.approx(cl.KAPPA * 1.0 / 2.0)
    assert np.allclose(s.clt_covariance, cl.KAPPA * 5 * np.array([[1, -1], [-1, 1]]))
    eq = cl.chain_steady(0.7, 0.7)
    assert eq.flux == 0 and eq.entropy_production == 0


def test_dynamics_structure(small):
    _, ops = small
    U = ops.propagator(1.3)
    assert np.abs(U.T @ ops.h @ U - ops.h).max() < 1e-12
    assert np.abs(U.T @ ops.j @ U - ops.j).max() < 1e-12
    assert np.abs(ops.propagator(0.4) @ ops.propagator(0.9) - U).max() < 1e-12
    # generator check by a central difference
    d = (ops.propagator(1e-5) - ops.propagator(-1e-5)) / 2e-5
    assert np.abs(d - ops.L).max() < 1e-8


def test_finite_es_symmetry(small):
    cfg, ops = small
    X = cfg.X
    assert cl.chain_et(ops, 7.0, 0.0) == 0.0
    assert cl.chain_et(ops, 7.0, 1.0) == pytest.approx(0, abs=1e-12)
    assert cl.chain_et(ops, 7.0, 0.3) == pytest.approx(cl.chain_et(ops, 7.0, 0.7), abs=1e-12)
    Y = np.array([0.1, 0.3])
    assert cl.chain_gt(ops, 7.0, X, Y) == pytest.approx(cl.chain_gt(ops, 7.0, X, X - Y), abs=1e-12)
    assert cl.chain_gt(ops, 7.0, X, (50.0, -50.0)) is POS_INF


def test_mean_ep_two_routes(small):
    _, ops = small
    ts = [0.5, 3.0, 11.0]
    fast = cl.chain_mean_ep(ops, ts)
    for t, v in zip(ts, fast):
        assert v == pytest.approx(cl.chain_mean_ep_direct(ops, t), abs=1e-12)
        assert v >= 0
    assert cl.chain_mean_ep(ops, [0.0])[0] == 0.0


def test_mean_ep_derivative_of_et(small):
    _, ops = small
    h = 1e-4
    t = 5.0
    d = (cl.chain_et(ops, t, h) - cl.chain_et(ops, t, -h)) / (2 * h)
    assert -d / t == pytest.approx(cl.chain_mean_ep(ops, [t])[0], abs=1e-6)


@given(st.floats(-0.5, 1.5))
def test_closed_forms(alpha):
    X = np.array([2 / 3 - 0.5, 2 / 3 - 1.0])
    assert cl.chain_g_closed(2 / 3, X, alpha * X) == pytest.approx(cl.chain_e_closed(2.0, 1.0, alpha), abs=1e-14)
    assert cl.chain_e_closed(2.0, 1.0, alpha) == pytest.approx(cl.chain_e_closed(2.0, 1.0, 1 - alpha), abs=1e-14)


def test_closed_g_symmetry_and_domain():
    b, X = 2 / 3, np.array([1 / 6, -1 / 3])
    Y = np.array([0.1, 0.3])
    assert cl.chain_g_closed(b, X, Y) == pytest.approx(cl.chain_g_closed(b, X, X - Y), abs=1e-14)
    lo, hi = cl.chain_diagonal_domain(b, X)
    assert lo == pytest.approx(-1.0) and hi == pytest.approx(0.5)
    assert cl.chain_g_closed(b, X, (0.0, hi + 1e-6)) is POS_INF
    assert np.isfinite(cl.chain_g_closed(b, X, (0.0, hi - 1e-6)))


def test_rate_is_legendre_of_diagonal_cgf():
    b, X = 2 / 3, np.array([1 / 6, -1 / 3])
    lo, hi = cl.chain_diagonal_domain(b, X)
    e = ldp.ConvexFn(cl.chain_diagonal_cgf(b, X), lo, hi)
    th = np.linspace(-1.5, 1.5, 13)
    sl, sr, F = cl.chain_rate(b, X, th)
    assert np.allclose(sr, -sl)
    assert np.abs(ldp.legendre(e, sl) - F).max() < 1e-9
    # zero of the rate at the mean flux
    flux = cl.chain_steady(0.5, 1.0).flux
    z = np.arcsinh(flux * (b - 0.5 * X.sum()) / cl.KAPPA)
    assert cl.chain_rate(b, X, z)[2] == pytest.approx(0, abs=1e-12)


def test_onsager_relations():
    L, D = cl.chain_onsager_fd(0.8)
    assert np.allclose(L, L.T, atol=1e-6)
    assert np.allclose(D, 2 * L, atol=1e-6)
    assert L[0, 0] == pytest.approx(cl.KAPPA / 0.64, rel=1e-5)
    assert L[0, 0] + L[1, 0] == pytest.approx(0, abs=1e-6)


def test_onshell_s():
    s = cl.chain_onshell_s(0.7, 4)
    assert np.allclose(s.conj().T @ s, np.eye(2))
    with pytest.raises(DomainError):
        cl.chain_onshell_s(0.0, 4)


def test_flux_forms(small):
    _, ops = small
    phiL, phiR = ops.flux_ops()
    assert phiL.shape == ops.h.shape and np.allclose(phiL, phiL.T)
    # reservoir energy balance: d/dt k(Y) along the flow is -(Y_L phi_L + Y_R phi_R)
    Y = np.array([0.2, -0.1])
    kdot = ops.L.T @ ops.k(Y) + ops.k(Y) @ ops.L
    assert np.abs(kdot + Y[0] * phiL + Y[1] * phiR).max() < 1e-12


@pytest.mark.slow
def test_flux_and_variance_slopes():
    cfg = cl.ChainConfig.from_temperatures(2.0, 1.0, N=2, M=200)
    ops = cl.chain_build(cfg)
    X = cfg.X
    fam = lambda t: (lambda y: cl.chain_gt(ops, t, X, (-y, 0.0)))
    rep = ldp.cumulants_from_cgf(fam, [60.0, 120.0], order=2)
    st_ = cl.chain_steady(cfg.beta_L, cfg.beta_R)
    mean_slope, var_slope = rep.slopes()[0]
    assert mean_slope == pytest.approx(st_.flux, rel=1e-2)
    assert var_slope == pytest.approx(st_.clt_covariance[0, 0], rel=1e-2)
