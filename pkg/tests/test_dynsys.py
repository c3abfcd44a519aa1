import numpy as np
import pytest
from hypothesis import given, strategies as st

from entroflux import dynsys as ds
from entroflux.numerics import DimensionMismatch, adaptive_gauss, evolve, random_hermitian
from entroflux.states import DensityMatrix, random_density

seeds = st.integers(0, 2 ** 31 - 1)


def test_system_validation(rng):
    h = random_hermitian(2, rng)
    with pytest.raises(ValueError):
        ds.QuantumDynamicalSystem(h, np.diag([1.0, 0.0]))
    with pytest.raises(DimensionMismatch):
        ds.QuantumDynamicalSystem(h, DensityMatrix.chaotic(3))
    hc = np.array([[0, 1j], [-1j, 0]])
    with pytest.raises(ds.NotTimeReversalInvariant):
        ds.QuantumDynamicalSystem(hc, DensityMatrix.chaotic(2), theta=True)
    w = random_density(2, rng)
    with pytest.raises(ValueError):
        ds.QuantumDynamicalSystem(h, w, charges=[np.eye(2)])


@given(seeds, st.floats(-1, 2), st.sampled_from([1.0, 2.0, 3.0, np.inf]))
def test_ept_symmetry_tri(seed, a, p):
    s = ds.random_system(3, np.random.default_rng(seed), tri=True)
    assert ds.e_pt(s, 1.1, a, p) == pytest.approx(ds.e_pt(s, 1.1, 1 - a, p), abs=1e-9)


@pytest.mark.parametrize("p", [1.0, 2.0, 5.0, np.inf])
def test_ept_endpoints_and_convexity(rng, p):
    s = ds.random_system(4, rng)
    assert ds.e_pt(s, 0.9, 0.0, p) == pytest.approx(0, abs=1e-12)
    assert ds.e_pt(s, 0.9, 1.0, p) == pytest.approx(0, abs=1e-12)
    al = np.linspace(-1, 2, 31)
    vals = np.array([ds.e_pt(s, 0.9, a, p) for a in al])
    assert np.all(np.diff(vals, 2) >= -1e-10)
    inner = vals[(al > 0) & (al < 1)]
    assert np.all(inner <= 1e-12)


def test_ept_time_zero_and_stationary(rng):
    s = ds.random_system(3, rng)
    assert ds.e_pt(s, 0.0, 0.4) == pytest.approx(0, abs=1e-12)
    h = random_hermitian(3, rng)
    st_ = ds.QuantumDynamicalSystem(h, DensityMatrix.gibbs(h, 1.3))
    assert ds.e_pt(st_, 2.0, 0.4) == pytest.approx(0, abs=1e-12)


def test_ept_decreasing_in_p(rng):
    s = ds.random_system(3, rng)
    for a in (-0.5, 0.3, 0.8, 1.5):
        vals = [ds.e_pt(s, 1.3, a, p) for p in (1, 1.5, 2, 4, 10, np.inf)]
        assert np.all(np.diff(vals) <= 1e-10)


@pytest.mark.parametrize("p", [2.0, np.inf])
def test_ept_derivatives(rng, p):
    s = ds.random_system(3, rng)
    d = ds.e_pt_derivatives(s, 1.3, p)
    assert d.d1_at0 == pytest.approx(d.ref_d1_at0, abs=1e-8)
    assert d.d1_at1 == pytest.approx(d.ref_d1_at1, abs=1e-8)
    assert d.d2_at0 == pytest.approx(d.ref_d2_at0, abs=1e-6)


def test_ept_multi_reduces_to_single():
    o = ds.random_open_toy(np.random.default_rng(4))
    s = o.sys
    for a in (0.2, 0.9, 1.4):
        for p in (2.0, np.inf):
            assert ds.e_pt_multi(s, 1.5, [a] * 5, p) == pytest.approx(ds.e_pt(s, 1.5, a, p), abs=1e-10)
    with pytest.raises(DimensionMismatch):
        ds.e_pt_multi(s, 1.0, [0.1, 0.2])


def test_entropy_balance(rng):
    s = ds.random_system(3, rng)
    sig = ds.entropy_production(s)
    assert s.expect(sig) == pytest.approx(0, abs=1e-12)
    for t in (0.5, 2.0, 7.0):
        st_ = ds.mean_entropy_production(s, t)
        assert s.expect(st_).real >= -1e-12
        assert ds.es_failure_value(s, t) >= 1 - 1e-12
    h = random_hermitian(3, rng)
    eq = ds.QuantumDynamicalSystem(h, DensityMatrix.gibbs(h, 0.5))
    assert ds.es_failure_value(eq, 3.0) == pytest.approx(1.0, abs=1e-12)


def test_mean_entropy_production_is_time_average(rng):
    s = ds.random_system(3, rng)
    t = 1.7
    avg = ds.time_integral(ds.entropy_production(s), s.H, 0.0, t) / t
    assert np.abs(avg - ds.mean_entropy_production(s, t)).max() < 1e-10


def test_time_integral_quadrature(rng):
    h = random_hermitian(3, rng)
    h[0, 0] = h[1, 1]  # encourage near-degenerate gaps
    a = random_hermitian(3, rng)
    exact = ds.time_integral(a, h, 0.3, 2.1)
    for i, j in ((0, 0), (0, 1), (2, 1)):
        f = np.vectorize(lambda s: evolve(a, h, s)[i, j])
        re = adaptive_gauss(lambda s: f(s).real, 0.3, 2.1)[0]
        im = adaptive_gauss(lambda s: f(s).imag, 0.3, 2.1)[0]
        assert exact[i, j] == pytest.approx(re + 1j * im, abs=1e-10)


def test_kubo_mari(rng):
    rho = random_density(3, rng)
    assert ds.kubo_mari(rho, np.eye(3), np.eye(3)) == pytest.approx(1.0)
    d = DensityMatrix.from_matrix(np.diag([0.2, 0.3, 0.5]))
    a, b = np.diag([1.0, 2.0, -1.0]), np.diag([0.5, 0.1, 3.0])
    assert ds.kubo_mari(d, a, b) == pytest.approx(np.trace(d.matrix @ a @ b))
    x = random_hermitian(3, rng)
    assert ds.kubo_mari(rho, x, x).real >= 0
    assert ds.log_mean(2.0, 2.0 + 1e-9) == pytest.approx(2.0, rel=1e-8)


def test_kms_and_cocycle(rng):
    h = random_hermitian(3, rng)
    a, b = random_hermitian(3, rng), random_hermitian(3, rng)
    assert ds.kms_defect(h, 0.8, a, b) < 1e-10
    v = random_hermitian(3, rng, 0.3)
    s, t = 0.4, 1.1
    lhs = ds.interaction_propagator(h, v, s + t)
    rhs = ds.interaction_propagator(h, v, t) @ evolve(ds.interaction_propagator(h, v, s), h, t)
    assert np.abs(lhs - rhs).max() < 1e-10
    z = 0.3 - 0.2j
    assert np.abs(ds.interaction_propagator(h, np.zeros((3, 3)), z) - np.eye(3)).max() < 1e-12


def test_open_system_structure():
    o = ds.random_open_toy(np.random.default_rng(1), mu=(0.3, -0.2))
    assert ds.open_sigma_decomposition(o) < 1e-10
    # total charge is conserved by the coupled dynamics
    assert np.abs(o.H_V @ o.N_total - o.N_total @ o.H_V).max() < 1e-12
    hr = sum(o.H_j)
    assert np.abs(sum(o.energy_fluxes) + 1j * (o.H_V @ hr - hr @ o.H_V)).max() < 1e-12


def test_gauge_violation():
    n1 = np.diag([1.0, 0.0])
    res = [ds.Reservoir(n1.copy(), n1.copy(), 1.0)]
    bad = np.kron(np.array([[0, 1.0], [1.0, 0]]), np.eye(2))
    spec = ds.OpenSystemSpec(n1.copy(), n1.copy(), res, [bad])
    with pytest.raises(ds.GaugeViolation):
        ds.build_open_system(spec)


def test_transport_two_routes():
    o = ds.random_open_toy(np.random.default_rng(2))
    fam = ds.linear_response_family(o, 0.8)
    la, lb = ds.finite_time_transport(fam, 2.0)
    assert np.abs(la - lb).max() < 1e-8
    assert np.abs(la - la.T).max() < 1e-8


def test_e_gen_matches_ept():
    o = ds.random_open_toy(np.random.default_rng(0))
    fam = ds.linear_response_family(o, 0.8)
    X = np.array([0.1, -0.2, 0.05, 0.0])
    sx, _ = fam(X)
    for a in (0.3, 0.7, 1.2):
        assert ds.e_gen(fam, 1.3, X, a * X) == pytest.approx(ds.e_pt(sx, 1.3, a, np.inf), abs=1e-9)
    assert ds.e_gen(fam, 1.3, X, np.zeros(4)) == 0.0


def test_reference_state_bound(rng):
    s1 = ds.random_system(3, rng)
    s2 = ds.QuantumDynamicalSystem(s1.H.entries, random_density(3, rng))
    for a in (-0.5, 0.4, 1.7):
        lhs, rhs = ds.reference_state_bound(s1, s2, 1.2, a)
        assert lhs <= rhs + 1e-12
