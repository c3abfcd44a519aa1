import numpy as np
import pytest
from hypothesis import given, strategies as st
from math import comb

from entroflux import classical as cl
from entroflux import ldp
from entroflux import quasifree as qf
from entroflux.modular import AtomicMeasure
from entroflux.numerics import POS_INF, StepSelectionFailure


def quad(m=0.3, v=2.0, L=10.0):
    return ldp.ConvexFn(lambda s: m * s + 0.5 * v * s * s, -L, L)


@given(st.floats(-5, 5))
def test_legendre_quadratic(theta):
    e = quad()
    assert ldp.legendre(e, theta) == pytest.approx(ldp.gaussian_rate(0.3, 2.0, theta), abs=1e-10)


def test_legendre_linear_and_argmax():
    e = ldp.ConvexFn(lambda s: 0.5 * s, -1.0, 2.0)
    # sup over [-1, 2] of (theta - 1/2) s is attained at an endpoint
    assert ldp.legendre(e, 1.5) == pytest.approx(2.0)
    assert ldp.legendre(e, -0.5) == pytest.approx(1.0)
    val, arg = ldp.legendre(quad(), 1.3, return_argmax=True)
    assert arg == pytest.approx(0.5, abs=1e-6)
    assert np.shape(ldp.legendre(quad(), [0.1, 0.2])) == (2,)


def test_convex_fn_domain():
    e = quad(L=1.0)
    assert e(2.0) is POS_INF
    assert e.convexity_defect() <= 0
    bad = ldp.ConvexFn(lambda s: -s * s, -1, 1)
    assert bad.convexity_defect() > 0
    with pytest.raises(ValueError):
        ldp.ConvexFn(lambda s: s, 1.0, 1.0)


def test_biconjugate_and_young(rng):
    e = ldp.ConvexFn(lambda s: np.log(0.7 + 0.3 * np.exp(s)), -4.0, 4.0)
    for s in (-1.0, 0.0, 0.7):
        assert ldp.biconjugate(e, s, (0.0, 1.0)) == pytest.approx(e(s), abs=1e-8)
    assert ldp.young_check(e, rng, 500, (-0.5, 1.5)) >= -1e-12
    r = ldp.rate_function(e, np.linspace(0.01, 0.99, 41))
    assert r.convexity_defect() < 1e-8
    assert r.to_csv().startswith("theta,phi\n")


def test_entropic_cgf_flip():
    c = ldp.entropic_cgf(lambda a: a * a - a, -1.0, 3.0)
    assert (c.a, c.b) == (-3.0, 1.0)
    assert c(-2.0) == pytest.approx(2.0)


def chain_domain(TL=2.0, TR=1.0):
    c = (TL - TR) ** 2 / (TL * TR)
    r = np.sqrt(1 + 4 / c) / 2
    return 0.5 - r + 1e-9, 0.5 + r - 1e-9


def test_entropic_rate_symmetry_chain():
    a, b = chain_domain()
    e = lambda x: cl.chain_e_closed(2.0, 1.0, x)
    s = np.linspace(0.01, 0.3, 12)
    assert ldp.rate_symmetry_check(e, a, b, s) < 1e-9


def test_entropic_rate_symmetry_xy_and_ebb():
    s = np.linspace(0.0, 0.02, 6)
    e = lambda x: qf.xy_eplus_closed(1.0, 0.5, 1.0, 0.3, x)
    assert ldp.rate_symmetry_check(e, -0.5, 1.5, s) < 1e-9
    e2 = lambda x: qf.ebb_two_lead_closed(1.0, 0.5, 0.0, 0.0, x)
    assert ldp.rate_symmetry_check(e2, -0.5, 1.5, s) < 1e-9


def test_rate_symmetry_rejects():
    with pytest.raises(ValueError):
        ldp.rate_symmetry_check(lambda a: a * a, 0.0, 1.0, [0.1])
    with pytest.raises(ValueError):
        ldp.rate_symmetry_check(lambda a: a * a, 0.0, 2.0, [0.1])


def test_entropic_rate_minimum_at_mean():
    a, b = chain_domain()
    r = ldp.entropic_rate(lambda x: cl.chain_e_closed(2.0, 1.0, x), a, b, np.linspace(-0.2, 0.4, 61))
    ep = cl.chain_steady(0.5, 1.0).entropy_production
    assert r.x[int(np.argmin(r.values))] == pytest.approx(ep, abs=0.01)
    assert r.values.min() == pytest.approx(0, abs=1e-4)


def test_cumulants_gaussian_and_poisson():
    gauss = lambda t: (lambda s: t * (0.4 * s + 0.5 * 1.5 * s * s))
    rep = ldp.cumulants_from_cgf(gauss, [1.0, 10.0])
    assert np.allclose(rep.cumulants, [[0.4, 1.5, 0, 0], [4.0, 15.0, 0, 0]], atol=1e-6)
    assert np.allclose(rep.slopes(), [[0.4, 1.5, 0, 0]], atol=1e-6)
    pois = lambda t: (lambda s: 2.0 * t * np.expm1(s))
    rep = ldp.cumulants_from_cgf(pois, [3.0])
    assert np.allclose(rep.cumulants[0], 6.0, rtol=1e-4)
    assert rep.scaled()[0, 0] == pytest.approx(2.0)
    assert rep.normalized()[0, 1] == pytest.approx(1.0)


def test_cumulants_step_failure():
    with pytest.raises(StepSelectionFailure):
        ldp.cumulants_from_cgf(lambda t: (lambda s: t * abs(s)), [1.0])
    with pytest.raises(ValueError):
        ldp.cumulants_from_cgf(lambda t: (lambda s: s), [1.0], order=5)


def test_entropic_family():
    fam = ldp.entropic_family(lambda t: (lambda a: t * a * a - t * a))
    assert fam(2.0)(0.5) == pytest.approx(2.0 * 0.25 + 2.0 * 0.5)


def binomial_measure(p):
    def at(t):
        n = int(t)
        k = np.arange(n + 1)
        w = np.array([comb(n, j) * p ** j * (1 - p) ** (n - j) for j in k])
        return AtomicMeasure(k / n, 2.0 * w)  # unnormalized on purpose
    return at


def test_tail_bound_binomial():
    p = 0.3
    e = ldp.ConvexFn(lambda s: np.log(1 - p + p * np.exp(s)), -20.0, 20.0)
    rep = ldp.ge_tail_bound_check(e, binomial_measure(p), 0.5, ladder=(10, 20, 40, 80))
    assert rep.chernoff_holds
    assert np.all(rep.log_tail <= -rep.rate + 1e-12)
    assert rep.delta_decreasing
    kl = 0.5 * np.log(0.5 / p) + 0.5 * np.log(0.5 / (1 - p))
    assert rep.rate == pytest.approx(kl, abs=1e-10)
    # polynomial prefactor: the gap closes like log(t)/t
    gap = -rep.rate - rep.log_tail
    assert gap[-1] < gap[0] and gap[-1] < 0.05


def test_tail_empty():
    e = quad()
    rep = ldp.ge_tail_bound_check(e, lambda t: AtomicMeasure([0.0], [1.0]), 1.0, ladder=(5, 10))
    assert np.all(np.isneginf(rep.log_tail)) and rep.chernoff_holds
    assert np.all(rep.delta == 0)
