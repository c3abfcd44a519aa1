import numpy as np
import pytest
from hypothesis import given, strategies as st

from entroflux.numerics import (
    EXP, LOG, PAULI, SQRT, BadExponent, DimensionMismatch, DomainError, HermitianOperator,
    NonHermitian, OperatorFunction, adaptive_gauss, eig_hermitian, evolve, expm_h, logm_h,
    matfun, partial_trace, random_hermitian, schatten_norm, tensor_embed,
)
from entroflux.states import alt_sequence, holder_gap, minkowski_gap, random_density

seeds = st.integers(0, 2 ** 31 - 1)


@pytest.mark.parametrize("name", ["1", "3"])
def test_pauli_spectrum(name):
    sd = eig_hermitian(PAULI[name])
    assert np.allclose(sd.eigenvalues, [-1, 1])


def test_non_hermitian_rejected():
    with pytest.raises(NonHermitian):
        eig_hermitian(np.array([[0, 1], [0, 0]]))


@given(seeds, st.integers(2, 8))
def test_reconstruction_and_phases(seed, d):
    a = random_hermitian(d, np.random.default_rng(seed))
    sd = eig_hermitian(a)
    assert np.max(np.abs(sd.rebuild() - a)) < 1e-10 * max(1, np.abs(a).max())
    assert sd.unitarity_defect() < 1e-10
    assert np.all(np.diff(sd.eigenvalues) >= 0)
    u = sd.eigenvectors
    piv = u[np.argmax(np.abs(u), axis=0), np.arange(d)]
    assert np.allclose(piv.imag, 0) and np.all(piv.real > 0)


def test_matfun_examples():
    assert np.allclose(matfun(np.diag([0, np.log(2)]), EXP), np.diag([1, 2]))
    assert np.allclose(matfun(np.diag([4.0, 9.0]), SQRT), np.diag([2, 3]))
    with pytest.raises(DomainError):
        matfun(np.diag([-1.0, 1.0]), LOG)
    clamp = OperatorFunction(np.log, "log", domain=(0.0, np.inf), policy="clamp")
    assert np.isfinite(matfun(np.diag([0.0, 1.0]), clamp)).all()


def test_log_exp_round_trip(rng):
    rho = random_density(4, rng).matrix
    assert np.max(np.abs(expm_h(logm_h(rho)) - rho)) < 1e-10


@pytest.mark.parametrize("p,val", [(1, 7.0), (np.inf, 4.0), (2, 5.0)])
def test_schatten_diag(p, val):
    assert schatten_norm(np.diag([3.0, -4.0]), p) == pytest.approx(val)


def test_schatten_bad_exponent():
    with pytest.raises(BadExponent):
        schatten_norm(np.eye(2), 0.5)


@given(seeds)
def test_schatten_monotone_in_p(seed):
    r = np.random.default_rng(seed)
    a = r.standard_normal((5, 5)) + 1j * r.standard_normal((5, 5))
    vals = [schatten_norm(a, p) for p in (1, 1.5, 2, 4, np.inf)]
    assert np.all(np.diff(vals) <= 1e-12)
    assert schatten_norm(a.conj().T, 3) == pytest.approx(schatten_norm(a, 3))


@given(seeds, st.floats(1.05, 20))
def test_holder_and_minkowski(seed, p):
    r = np.random.default_rng(seed)
    a = r.standard_normal((4, 4)) + 1j * r.standard_normal((4, 4))
    b = r.standard_normal((4, 4)) + 1j * r.standard_normal((4, 4))
    assert holder_gap(a, b, p) >= -1e-11
    assert minkowski_gap(a, b, p) >= -1e-11


def test_abba_norms(rng):
    a, b = random_hermitian(4, rng), random_hermitian(4, rng)
    for p in (1, 2, 3, np.inf):
        assert schatten_norm(a @ b, p) == pytest.approx(schatten_norm(b @ a, p), rel=1e-12)


def test_partial_trace(rng):
    a = random_hermitian(3, rng)
    b = random_hermitian(2, rng)
    assert np.allclose(partial_trace(np.kron(a, b), [3, 2], [0]), np.trace(b) * a)
    rho = random_density(3, rng).matrix
    ch = np.eye(2) / 2
    assert np.allclose(partial_trace(np.kron(ch, rho), [2, 3], [1]), rho)
    big = random_density(6, rng).matrix
    assert abs(np.trace(partial_trace(big, [2, 3], [0])) - 1) < 1e-12
    x = random_hermitian(2, rng)
    lhs = np.trace(partial_trace(big, [2, 3], [0]) @ x)
    assert abs(lhs - np.trace(tensor_embed([(x, 0)], [2, 3]) @ big)) < 1e-12
    with pytest.raises(DimensionMismatch):
        partial_trace(big, [2, 2], [0])


def test_evolve_examples(rng):
    assert np.allclose(evolve(PAULI["1"], PAULI["3"], np.pi), PAULI["1"])
    a = random_hermitian(4, rng)
    h = random_hermitian(4, rng)
    assert np.allclose(evolve(a, h, 0.0), a)


@given(seeds, st.floats(-3, 3), st.floats(-3, 3))
def test_evolve_group_law(seed, s, t):
    r = np.random.default_rng(seed)
    a, h = random_hermitian(4, r), random_hermitian(4, r)
    assert np.max(np.abs(evolve(evolve(a, h, s), h, t) - evolve(a, h, s + t))) < 1e-10


def test_evolve_complex_time(rng):
    h = random_hermitian(3, rng)
    a = random_hermitian(3, rng)
    z = 0.3 - 0.7j
    direct = expm_h(h, 1j * z) @ a @ expm_h(h, -1j * z)
    assert np.allclose(evolve(a, h, z), direct)


def test_tensor_embed(rng):
    s0 = tensor_embed([(PAULI["3"], 0)], [2, 2])
    s1 = tensor_embed([(PAULI["3"], 1)], [2, 2])
    assert np.allclose(s0 @ s1, s1 @ s0)
    a, b = random_hermitian(2, rng), random_hermitian(3, rng)
    prod = tensor_embed([(a, 0)], [2, 3]) @ tensor_embed([(b, 1)], [2, 3])
    assert np.trace(prod) == pytest.approx(np.trace(a) * np.trace(b))
    w = np.sort(np.linalg.eigvalsh(tensor_embed([(a, 0)], [2, 3])))
    assert np.allclose(w, np.sort(np.repeat(np.linalg.eigvalsh(a), 3)))
    assert np.allclose(tensor_embed([(a, 0), (b, 1)], [2, 3]), tensor_embed([(b, 1), (a, 0)], [2, 3]))
    with pytest.raises(DimensionMismatch):
        tensor_embed([(a, 0), (a, 0)], [2, 2])


def test_lie_product_formula(rng):
    a, b = random_hermitian(4, rng), random_hermitian(4, rng)
    target = expm_h(a + b)
    errs = []
    for n in (1, 2, 4, 8, 16, 32, 64):
        step = expm_h(a, 1 / n) @ expm_h(b, 1 / n)
        errs.append(schatten_norm(np.linalg.matrix_power(step, n) - target, np.inf))
    assert np.all(np.diff(errs) < 0)


def test_alt_sequence_monotone(rng):
    a, b = random_hermitian(4, rng), random_hermitian(4, rng)
    seq = alt_sequence(a, b, [1, 2, 4, 8, 1e4, np.inf])
    assert np.all(np.diff(seq) <= 1e-10 * seq[0])
    assert seq[-2] == pytest.approx(seq[-1], rel=1e-3)


def test_hermitian_operator_tolerance():
    m = np.array([[1.0, 1e-13j], [0, 1.0]])
    assert HermitianOperator(m).dim == 2


def test_adaptive_gauss():
    val, err = adaptive_gauss(np.exp, 0.0, 1.0)
    assert val == pytest.approx(np.e - 1, rel=1e-13)
