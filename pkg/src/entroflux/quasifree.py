"""Quasi-free fermions from one-particle data.

A gauge-invariant quasi-free state is fixed by its density 0 <= T <= 1 and a
free dynamics by a one-particle Hamiltonian h; every entropic functional
reduces to a determinant on the one-particle space. A dense Fock-space oracle
(occupation basis, Jordan-Wigner signs) is provided for small dimensions.

Models: the electronic black box (a finite sample coupled to tight-binding
leads), its large-time scattering formulas, and the XY spin chain.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Callable, Optional, Sequence

import numpy as np

from .numerics import (
    KTOL,
    DimensionMismatch,
    DimensionTooLarge,
    DomainError,
    adaptive_gauss,
    as_matrix,
    commutator,
    expm_h,
    spectral,
)

FOCK_DMAX = 10


class NonFaithfulDensity(ValueError):
    pass


# ---------------------------------------------------------------------------
# one-particle helpers

def _herm(a):
    a = np.asarray(a, dtype=complex)
    return 0.5 * (a + a.conj().T)


def kernel(T, ktol=KTOL) -> np.ndarray:
    """k = log(T (1-T)^{-1}); requires 0 < T < 1."""
    sd = spectral(_herm(T))
    w = sd.eigenvalues
    if w.min() <= ktol or w.max() >= 1 - ktol:
        raise NonFaithfulDensity(f"spectrum of T in [{w.min():.3e}, {w.max():.3e}]")
    return sd.rebuild(np.log(w) - np.log1p(-w))


def fermi_density(k) -> np.ndarray:
    """T = (1 + e^{-k})^{-1}."""
    sd = spectral(_herm(k))
    return sd.rebuild(0.5 * (1 + np.tanh(0.5 * sd.eigenvalues)))


def _log1p_exp(x):
    return np.logaddexp(0.0, x)


def _log_one_minus(T):
    return np.sum(np.log1p(-np.clip(spectral(_herm(T)).eigenvalues, None, 1 - 1e-300)))


def _logdet_1p_psd(y, q=1.0):
    """sum log(1 + lambda^q) over the spectrum of a positive matrix y."""
    w = np.clip(spectral(_herm(y)).eigenvalues, 0.0, None)
    return float(np.sum(np.log1p(w ** q)))


# ---------------------------------------------------------------------------
# Fock space oracle

@lru_cache(maxsize=None)
def _fock_tables(d):
    n = np.arange(2 ** d)
    bits = (n[:, None] >> np.arange(d)[None, :]) & 1
    below = np.cumsum(bits, axis=1) - bits  # occupied modes with smaller index
    return n, bits, below


def annihilators(d) -> list:
    """a_i on the 2^d occupation basis, basis index = sum of 2^i over occupied i."""
    if d > FOCK_DMAX:
        raise DimensionTooLarge(f"d = {d} > {FOCK_DMAX}")
    n, bits, below = _fock_tables(d)
    out = []
    for i in range(d):
        a = np.zeros((2 ** d, 2 ** d))
        src = n[bits[:, i] == 1]
        a[src - (1 << i), src] = (-1.0) ** below[src, i]
        out.append(a)
    return out


def d_gamma(A) -> np.ndarray:
    """Second quantization dGamma(A) = sum_ij A_ij a*_i a_j."""
    A = as_matrix(A)
    d = A.shape[0]
    if d > FOCK_DMAX:
        raise DimensionTooLarge(f"d = {d} > {FOCK_DMAX}")
    n, bits, below = _fock_tables(d)
    out = np.zeros((2 ** d, 2 ** d), dtype=complex)
    for j in range(d):
        src = n[bits[:, j] == 1]
        s1 = (-1.0) ** below[src, j]
        mid = src - (1 << j)
        for i in range(d):
            if A[i, j] == 0:
                continue
            ok = ((mid >> i) & 1) == 0
            m = mid[ok]
            s2 = (-1.0) ** _fock_tables(d)[2][m, i]
            out[m + (1 << i), src[ok]] += A[i, j] * s1[ok] * s2
    return out


def gamma(A) -> np.ndarray:
    """Gamma(A): A^{wedge m} on each m-particle sector, entries are minors of A."""
    A = as_matrix(A)
    d = A.shape[0]
    if d > FOCK_DMAX:
        raise DimensionTooLarge(f"d = {d} > {FOCK_DMAX}")
    out = np.zeros((2 ** d, 2 ** d), dtype=complex)
    out[0, 0] = 1.0
    for m in range(1, d + 1):
        subs = np.array(list(combinations(range(d), m)))
        idx = np.sum(1 << subs, axis=1)
        blocks = A[subs[:, None, :, None], subs[None, :, None, :]]
        out[np.ix_(idx, idx)] = np.linalg.det(blocks)
    return out


def fock_oracle(A):
    """(Gamma(A), dGamma(A)) as dense 2^d matrices, d <= 10."""
    return gamma(A), d_gamma(A)


def number_operator(d) -> np.ndarray:
    return d_gamma(np.eye(d))


def fock_state(T) -> np.ndarray:
    """Density matrix of the quasi-free state with 0 <= T < 1."""
    T = _herm(T)
    d = T.shape[0]
    one = np.eye(d)
    g = gamma(T @ np.linalg.inv(one - T))
    g = 0.5 * (g + g.conj().T)
    return g / np.real(np.trace(g))


def _creation(vec, ops):
    return sum(v * a.T for v, a in zip(vec, ops))


def _annihilation(vec, ops):
    return sum(np.conj(v) * a for v, a in zip(vec, ops))


def fock_expectation(rho, creates: Sequence, annihilates: Sequence) -> complex:
    """rho(a*(phi_n)...a*(phi_1) a(psi_1)...a(psi_m)) on the Fock oracle."""
    d = int(round(np.log2(rho.shape[0])))
    ops = annihilators(d)
    x = np.eye(2 ** d, dtype=complex)
    for phi in reversed(creates):
        x = x @ _creation(phi, ops)
    for psi in annihilates:
        x = x @ _annihilation(psi, ops)
    return complex(np.trace(rho @ x))


def quasifree_expectation(T, creates: Sequence, annihilates: Sequence) -> complex:
    """delta_nm det[<psi_i|T phi_j>] for a*(phi_n)...a*(phi_1) a(psi_1)...a(psi_m)."""
    if len(creates) != len(annihilates):
        return 0.0 + 0.0j
    if not creates:
        return 1.0 + 0.0j
    T = np.asarray(T, dtype=complex)
    phi = np.array(creates, dtype=complex)
    psi = np.array(annihilates, dtype=complex)
    g = psi.conj() @ T @ phi.T
    return complex(np.linalg.det(g))


def fock_trace_identity(A) -> float:
    """|tr Gamma(A) - det(1 + A)|."""
    A = as_matrix(A)
    return float(abs(np.trace(gamma(A)) - np.linalg.det(np.eye(A.shape[0]) + A)))


# ---------------------------------------------------------------------------
# one-particle models

@dataclass
class OnePartModel:
    """Free Fermi gas data.

    Attributes
    ----------
    h : (d, d) one-particle Hamiltonian.
    T : (d, d) density of the reference state.
    charges : commuting one-particle operators with sum equal to log(T/(1-T)),
        used by the multi-parameter functionals.
    blocks : named index arrays (sample, leads).
    """

    h: np.ndarray
    T: np.ndarray
    charges: Optional[list] = None
    blocks: dict = field(default_factory=dict)

    def __post_init__(self):
        self.h = _herm(self.h)
        self.T = _herm(self.T)
        if self.h.shape != self.T.shape:
            raise DimensionMismatch("h and T must act on the same space")
        w = spectral(self.T).eigenvalues
        if w.min() < -KTOL or w.max() > 1 + KTOL:
            raise DomainError(w, "T must satisfy 0 <= T <= 1")
        self._k0 = None
        self._sd = None

    @property
    def dim(self):
        return self.h.shape[0]

    @property
    def k0(self):
        if self._k0 is None:
            self._k0 = kernel(self.T)
        return self._k0

    @property
    def spectral_h(self):
        if self._sd is None:
            self._sd = spectral(self.h)
        return self._sd

    def propagator(self, t):
        """e^{-ith}."""
        sd = self.spectral_h
        u = sd.eigenvectors
        return (u * np.exp(-1j * t * sd.eigenvalues)) @ u.conj().T

    def evolve(self, a, t):
        """e^{-ith} a e^{ith}, the one-particle picture of omega_t."""
        u = self.propagator(t)
        return u @ a @ u.conj().T

    def k_alpha(self, alphas):
        if self.charges is None:
            raise ValueError("model has no charge decomposition")
        al = np.asarray(alphas, dtype=float)
        if al.shape != (len(self.charges),):
            raise DimensionMismatch("one exponent per charge required")
        return sum(a * q for a, q in zip(al, self.charges))

    def to_fock(self, theta=None):
        """Many-body QuantumDynamicalSystem on the 2^d oracle space."""
        from .dynsys import QuantumDynamicalSystem

        omega = fock_state(self.T)
        H = d_gamma(self.h)
        charges = None
        if self.charges is not None:
            charges = [d_gamma(q) for q in self.charges]
            charges[0] = charges[0] + _log_one_minus(self.T) * np.eye(H.shape[0])
        return QuantumDynamicalSystem(H, omega, theta=theta, charges=charges)


def qf_e_pt(model: OnePartModel, t, alpha, p=2.0) -> float:
    """Entropic functional e_{p,t}(alpha) through one-particle determinants.

    Uses 1 + T0(e^{-k0} Y^{p/2} - 1) = (1 - T0)(1 + Y^{p/2}) with
    Y = e^{k0(1-a)/p} e^{2a k_t/p} e^{k0(1-a)/p}.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    k0 = model.k0
    kt = model.evolve(k0, t)
    base = _log_one_minus(model.T)
    if np.isinf(p):
        w = spectral(_herm((1 - alpha) * k0 + alpha * kt)).eigenvalues
        return float(base + np.sum(_log1p_exp(w)))
    a = expm_h(k0, (1 - alpha) / p)
    c = expm_h(kt, alpha / p)
    # Y = (c a)^* (c a): singular values avoid square roots of tiny eigenvalues
    sv = np.linalg.svd(c @ a, compute_uv=False)
    return float(base + np.sum(np.log1p(sv ** p)))


def qf_e2_multi(model: OnePartModel, t, alphas) -> float:
    """log det(1 + T0(e^{-k(a)} e^{k_t(a)} - 1))."""
    ka = model.k_alpha(alphas)
    kta = model.evolve(ka, t)
    c = expm_h(model.k0 - ka, 0.5)
    return float(_log_one_minus(model.T) + _logdet_1p_psd(c @ expm_h(kta) @ c))


def qf_naive(model: OnePartModel, t, alphas) -> float:
    """log det(1 + T0(e^{k_{-t}(a) - k(a)} - 1))."""
    ka = model.k_alpha(alphas)
    x = model.evolve(ka, -t) - ka
    c = expm_h(model.k0, 0.5)
    return float(_log_one_minus(model.T) + _logdet_1p_psd(c @ expm_h(x) @ c))


def qf_relative_hamiltonian(T1, T):
    """(c, K) with log omega_{T1} - log omega_T = c + dGamma(K)."""
    k1, k = kernel(T1), kernel(T)
    c = _log_one_minus(T1) - _log_one_minus(T)
    return float(c), k1 - k


def qf_relative_entropy(T1, T) -> float:
    """omega_{T1}(log omega_T - log omega_{T1}) from one-particle data."""
    c, K = qf_relative_hamiltonian(T1, T)
    return float(-(c + np.real(np.trace(_herm(T1) @ K))))


# ---------------------------------------------------------------------------
# electronic black box: finite model

def chain_hamiltonian(n) -> np.ndarray:
    """-1/2 Dirichlet Laplacian on n sites: 1 - (adjacency)/2."""
    return np.eye(n) - 0.5 * (np.eye(n, k=1) + np.eye(n, k=-1))


def dispersion(xi):
    return 1.0 - np.cos(xi)


@dataclass
class LeadSpec:
    """Thermal tight-binding lead; chi is the sample vector it couples to."""

    beta: float
    mu: float = 0.0
    chi: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError(self.beta, "beta must be positive")


@dataclass
class EBBModel(OnePartModel):
    lam: float = 0.0
    leads: list = field(default_factory=list)
    h_leads: list = field(default_factory=list)  # embedded lead Hamiltonians h_j
    one_leads: list = field(default_factory=list)  # embedded projections 1_j
    delta0: list = field(default_factory=list)  # first lead site of each lead
    chis: list = field(default_factory=list)  # embedded coupling vectors

    def flux_ops(self):
        """One-particle energy and charge fluxes -i[h, h_j], -i[h, 1_j]."""
        en = [-1j * commutator(self.h, hj) for hj in self.h_leads]
        ch = [-1j * commutator(self.h, pj) for pj in self.one_leads]
        return en, ch

    def fluxes(self, t):
        """omega_0(tau^t(Phi_j)) and omega_0(tau^t(J_j)) from the overlap form."""
        u = self.propagator(-t)  # e^{ith}
        en, ch = [], []
        for hj, d0, chi in zip(self.h_leads, self.delta0, self.chis):
            uchi = self.T @ (u @ chi)
            en.append(2 * self.lam * np.imag(np.vdot(u @ (hj @ d0), uchi)))
            ch.append(2 * self.lam * np.imag(np.vdot(u @ d0, uchi)))
        return np.array(en), np.array(ch)

    def fluxes_trace(self, t):
        """Same quantities as tr(T0 e^{ith} phi e^{-ith})."""
        en, ch = self.flux_ops()
        f = lambda a: float(np.real(np.trace(self.T @ self.evolve(a, -t))))
        return np.array([f(a) for a in en]), np.array([f(a) for a in ch])

    def averaged_fluxes(self, t):
        """(1/t) int_0^t of the fluxes, exactly in the eigenbasis of h."""
        sd = self.spectral_h
        u, e = sd.eigenvectors, sd.eigenvalues
        de = e[:, None] - e[None, :]
        x = t * de
        with np.errstate(invalid="ignore", divide="ignore"):
            f = np.where(np.abs(x) < 1e-12, 1.0 + 0j, (np.exp(1j * x) - 1) / (1j * x))
        tt = u.conj().T @ self.T @ u
        en, ch = self.flux_ops()

        def avg(a):
            at = u.conj().T @ a @ u
            return float(np.real(np.sum(tt.T * at * f)))

        return np.array([avg(a) for a in en]), np.array([avg(a) for a in ch])

    def sample_charge(self):
        """One-particle Q_S = log(T_S (1-T_S)^{-1}) embedded."""
        return self.charges[0]


def ebb_build(h_S, leads: Sequence[LeadSpec], lam, M, T_S=None) -> EBBModel:
    """Sample h_S coupled by lam(|chi_j><delta_0| + h.c.) to M-site leads.

    Site order: sample first, then each lead; delta_0 is the lead site adjacent
    to the sample. Charges are [k_S, -beta_j h_j ..., beta_j mu_j 1_j ...].
    """
    if M < 1:
        raise DomainError(M, "lead size must be >= 1")
    h_S = as_matrix(h_S)
    dS, n = h_S.shape[0], len(leads)
    d = dS + n * M
    h = np.zeros((d, d), dtype=complex)
    h[:dS, :dS] = h_S
    T = np.zeros((d, d), dtype=complex)
    T_S = 0.5 * np.eye(dS) if T_S is None else as_matrix(T_S)
    T[:dS, :dS] = T_S
    hl = chain_hamiltonian(M)
    sd = spectral(hl)
    h_leads, ones, d0s, chis = [], [], [], []
    blocks = {"sample": np.arange(dS)}
    for j, lead in enumerate(leads):
        sl = slice(dS + j * M, dS + (j + 1) * M)
        blocks[f"lead{j}"] = np.arange(sl.start, sl.stop)
        h[sl, sl] = hl
        T[sl, sl] = sd.rebuild(0.5 * (1 - np.tanh(0.5 * lead.beta * (sd.eigenvalues - lead.mu))))
        hj = np.zeros((d, d))
        hj[sl, sl] = hl
        pj = np.zeros((d, d))
        pj[sl, sl] = np.eye(M)
        d0 = np.zeros(d, dtype=complex)
        d0[sl.start] = 1.0
        chi = np.zeros(d, dtype=complex)
        c = np.zeros(dS) if lead.chi is None else np.asarray(lead.chi, dtype=complex)
        if lead.chi is None:
            c[0 if j == 0 else dS - 1] = 1.0
        chi[:dS] = c
        h += lam * (np.outer(chi, d0.conj()) + np.outer(d0, chi.conj()))
        h_leads.append(hj)
        ones.append(pj)
        d0s.append(d0)
        chis.append(chi)
    kS = np.zeros((d, d), dtype=complex)
    kS[:dS, :dS] = kernel(T_S)
    charges = [kS]
    charges += [-lead.beta * hj for lead, hj in zip(leads, h_leads)]
    charges += [lead.beta * lead.mu * pj for lead, pj in zip(leads, ones)]
    return EBBModel(h=h, T=T, charges=charges, blocks=blocks, lam=lam, leads=list(leads),
                    h_leads=h_leads, one_leads=ones, delta0=d0s, chis=chis)


# ---------------------------------------------------------------------------
# scattering data and large-time formulas

@dataclass
class ScatteringData:
    """On-shell scattering matrix xi -> s(xi), vectorized: (N,) -> (N, n, n)."""

    s: Callable
    n: int

    def __call__(self, xi):
        return self.s(np.atleast_1d(np.asarray(xi, dtype=float)))

    def transmission(self, xi):
        s = self(xi)
        return np.abs(s - np.eye(self.n)) ** 2

    def unitarity_defect(self, xi) -> float:
        s = self(xi)
        g = np.einsum("nji,njk->nik", s.conj(), s) - np.eye(self.n)
        return float(np.abs(g).max())


def ebb_scattering(h_S, chis: Sequence, lam) -> ScatteringData:
    """Scattering matrix of a finite sample with semi-infinite leads.

    s_jk = delta_jk - 4 i lam^2 sin(xi) <chi_j|G(E + i0)|chi_k>,
    G(z) = (z - h_S + 2 lam^2 e^{i xi} sum_j |chi_j><chi_j|)^{-1}, E = 1 - cos xi.
    """
    h_S = as_matrix(h_S)
    C = np.array(chis, dtype=complex)  # (n, dS)
    P = C.T @ C.conj()
    one = np.eye(h_S.shape[0])
    n = C.shape[0]

    def s(xi):
        E = dispersion(xi)
        m = (E[:, None, None] * one - h_S) + 2 * lam ** 2 * np.exp(1j * xi)[:, None, None] * P
        G = np.linalg.solve(m, np.broadcast_to(C.T, (len(xi),) + C.T.shape))
        amp = np.einsum("jd,ndk->njk", C.conj(), G)
        return np.eye(n) - 4j * lam ** 2 * np.sin(xi)[:, None, None] * amp

    return ScatteringData(s, n)


def chain_scattering(l, sign=1) -> ScatteringData:
    """Two-lead Dirichlet chain: s(xi) = e^{2 i l xi} [[0, 1], [1, 0]]."""
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])

    def s(xi):
        return np.exp(sign * 2j * l * xi)[:, None, None] * swap

    return ScatteringData(s, 2)


def _lead_k(leads, xi, alphas=None):
    """Diagonal k(xi) = -beta_j (eps - mu_j), or its multi-parameter version."""
    eps = dispersion(xi)[:, None]
    b = np.array([l.beta for l in leads])[None, :]
    mu = np.array([l.mu for l in leads])[None, :]
    if alphas is None:
        return -b * (eps - mu)
    n = len(leads)
    al = np.asarray(alphas, dtype=float)
    if al.shape == (2 * n + 1,):
        al = al[1:]
    if al.shape != (2 * n,):
        raise DimensionMismatch("expected 2n (or 2n+1) exponents")
    return -b * (al[None, :n] * eps - al[None, n:] * mu)


def _batched_logdet_1p(y, q=1.0):
    y = 0.5 * (y + np.conj(np.swapaxes(y, -1, -2)))
    w = np.clip(np.linalg.eigvalsh(y), 0.0, None)
    return np.sum(np.log1p(w ** q), axis=-1)


def _conj_by(d, m):
    """diag(d) m diag(d) for batched vectors d."""
    return d[:, :, None] * m * d[:, None, :]


def scattering_logdet(k, s, alpha, p=2.0):
    """log det(1 + T(e^{-k}(e^{k(1-a)/p} s e^{2ak/p} s* e^{k(1-a)/p})^{p/2} - 1)), T = (1+e^{-k})^{-1}.

    k has shape (N, n) (diagonal), s shape (N, n, n).
    """
    base = np.sum(-_log1p_exp(k), axis=-1)  # log(1 - T)
    sh = np.conj(np.swapaxes(s, -1, -2))
    if np.isinf(p):
        x = (1 - alpha) * k[:, :, None] * np.eye(k.shape[1]) + alpha * (s * k[:, None, :]) @ sh
        x = 0.5 * (x + np.conj(np.swapaxes(x, -1, -2)))
        w = np.linalg.eigvalsh(x)
        return base + np.sum(_log1p_exp(w), axis=-1)
    y = _conj_by(np.exp(k * (1 - alpha) / p), (s * np.exp(2 * alpha * k / p)[:, None, :]) @ sh)
    return base + _batched_logdet_1p(y, p / 2)


def _integrate_xi(f, rtol):
    val, _ = adaptive_gauss(lambda xi: f(xi) * np.sin(xi) / (2 * np.pi), 0.0, np.pi,
                            rtol=rtol, atol=1e-13, n=32)
    return float(val)


def ebb_e2plus(leads: Sequence[LeadSpec], scattering: ScatteringData, alpha, p=2.0, rtol=1e-8) -> float:
    """Large-time entropic functional from on-shell scattering data.

    Scalar alpha: e_{p,+}(alpha). Vector alpha (2n or 2n+1 entries, the sample
    entry is ignored): the multi-parameter e_{2,+}.
    """
    if np.ndim(alpha) == 0:
        def f(xi):
            return scattering_logdet(_lead_k(leads, xi), scattering(xi), float(alpha), p)
    else:
        def f(xi):
            k = _lead_k(leads, xi)
            ka = _lead_k(leads, xi, alpha)
            s = scattering(xi)
            sh = np.conj(np.swapaxes(s, -1, -2))
            y = _conj_by(np.exp(0.5 * (k - ka)), (s * np.exp(ka)[:, None, :]) @ sh)
            return np.sum(-_log1p_exp(k), axis=-1) + _batched_logdet_1p(y)
    return _integrate_xi(f, rtol)


def ebb_naive_plus(leads: Sequence[LeadSpec], scattering: ScatteringData, alpha, rtol=1e-8) -> float:
    """Large-time naive functional: k_{-t} - k replaced by alpha (s* k s - k)."""
    def f(xi):
        k = _lead_k(leads, xi)
        s = scattering(xi)
        sh = np.conj(np.swapaxes(s, -1, -2))
        x = alpha * ((sh * k[:, None, :]) @ s - k[:, :, None] * np.eye(k.shape[1]))
        x = 0.5 * (x + np.conj(np.swapaxes(x, -1, -2)))
        w, v = np.linalg.eigh(x)
        ex = (v * np.exp(w)[:, None, :]) @ np.conj(np.swapaxes(v, -1, -2))
        y = _conj_by(np.exp(0.5 * k), ex)
        return np.sum(-_log1p_exp(k), axis=-1) + _batched_logdet_1p(y)
    return _integrate_xi(f, rtol)


def ebb_two_lead_closed(beta_L, beta_R, mu_L, mu_R, alpha, p=2.0, rtol=1e-8) -> float:
    """Closed two-lead formula (p-independent, p is accepted for symmetry of calls)."""
    def f(e):
        xl = beta_L * (e - mu_L)
        xr = beta_R * (e - mu_R)
        dl = xr - xl
        arg = 1 - np.sinh(alpha * dl / 2) * np.sinh((1 - alpha) * dl / 2) / (np.cosh(xl / 2) * np.cosh(xr / 2))
        if np.any(arg <= 0):
            raise DomainError(alpha, "alpha outside the finite domain")
        return np.log(arg)
    val, _ = adaptive_gauss(f, 0.0, 2.0, rtol=rtol, atol=1e-13, n=32)
    return float(val / (2 * np.pi))


def _fermi(leads, xi):
    eps = dispersion(xi)[:, None]
    b = np.array([l.beta for l in leads])[None, :]
    mu = np.array([l.mu for l in leads])[None, :]
    return 0.5 * (1 - np.tanh(0.5 * b * (eps - mu)))


def landauer_buttiker(leads: Sequence[LeadSpec], scattering: ScatteringData, rtol=1e-10):
    """Steady (energy, charge) fluxes out of each lead.

    Phi_j = sum_k int t_jk (rho_j - rho_k) eps deps/2pi, J_j likewise without eps.
    """
    n = len(leads)
    out = np.zeros((2, n))
    for j in range(n):
        for col, weight in ((0, dispersion), (1, lambda xi: np.ones_like(xi))):
            def f(xi, j=j, weight=weight):
                t = scattering.transmission(xi)
                rho = _fermi(leads, xi)
                return np.sum(t[:, j, :] * (rho[:, [j]] - rho), axis=1) * weight(xi)
            out[col, j] = _integrate_xi(f, rtol) if n > 1 else 0.0
    return out[0], out[1]


def levitov_lesovik_rate(leads: Sequence[LeadSpec], scattering: ScatteringData, nu, rtol=1e-10) -> float:
    """int log det(1 + T(s* s^nu - 1)) deps/2pi, s^nu_jk = s_jk e^{nu_k - nu_j}."""
    nu = np.asarray(nu, dtype=float)
    if nu.shape != (len(leads),):
        raise DimensionMismatch("one counting parameter per lead")

    def f(xi):
        s = scattering(xi)
        T = _fermi(leads, xi)
        snu = s * np.exp(nu[None, :] - nu[:, None])[None]
        m = np.eye(len(nu)) + T[:, :, None] * (np.conj(np.swapaxes(s, -1, -2)) @ snu - np.eye(len(nu)))
        sign, ld = np.linalg.slogdet(m)
        return np.real(ld + np.log(sign))
    return _integrate_xi(f, rtol)


def entropy_production_rate(leads: Sequence[LeadSpec], energy, charge) -> float:
    """Steady entropy production -sum_j beta_j (Phi_j - mu_j J_j)."""
    return float(-sum(l.beta * (e - l.mu * c) for l, e, c in zip(leads, energy, charge)))


# ---------------------------------------------------------------------------
# XY chain

def xy_map(size, J, lam, beta=1.0) -> OnePartModel:
    """Jordan-Wigner image of the XY chain: h = (J/2) adjacency - lam, Gibbs T."""
    adj = np.eye(size, k=1) + np.eye(size, k=-1)
    h = 0.5 * J * adj - lam * np.eye(size)
    return OnePartModel(h=h, T=fermi_density(-beta * h))


def xy_partitioned(size, J, lam, beta_L, beta_R) -> OnePartModel:
    """Finite open XY chain: the two halves start decoupled at beta_L and beta_R.

    ``size`` must be even; the bond between the halves is on in h and off in
    the reference density.
    """
    if size % 2 or size < 2:
        raise DomainError(size, "size must be a positive even integer")
    h = xy_map(size, J, lam).h
    half = size // 2
    T = np.zeros((size, size), dtype=complex)
    T[:half, :half] = fermi_density(-beta_L * h[:half, :half])
    T[half:, half:] = fermi_density(-beta_R * h[half:, half:])
    return OnePartModel(h=h, T=T)


def xy_pauli_hamiltonian(size, J, lam) -> np.ndarray:
    """-(J/4) sum (s1 s1 + s2 s2) - (lam/2) sum s3 on 2^size."""
    if size > FOCK_DMAX:
        raise DimensionTooLarge(f"|Lambda| = {size} > {FOCK_DMAX}")
    from .numerics import PAULI

    def site(op, x):
        out = np.array([[1.0 + 0j]])
        for y in range(size):
            out = np.kron(out, op if y == x else np.eye(2))
        return out

    H = np.zeros((2 ** size, 2 ** size), dtype=complex)
    for x in range(size - 1):
        for k in ("1", "2"):
            H -= 0.25 * J * site(PAULI[k], x) @ site(PAULI[k], x + 1)
    for x in range(size):
        H -= 0.5 * lam * site(PAULI["3"], x)
    return H


def xy_spectrum_defect(size, J, lam) -> float:
    """max |spec(dGamma(h)) + c - spec(H)| with the constant c fitted from the ground state."""
    h = xy_map(size, J, lam).h
    a = np.sort(np.linalg.eigvalsh(d_gamma(h)))
    b = np.sort(np.linalg.eigvalsh(xy_pauli_hamiltonian(size, J, lam)))
    shift = np.mean(b - a)
    return float(np.abs(b - a - shift).max())


def xy_magnetization(size, beta, J, lam) -> float:
    xi = np.arange(1, size + 1) * np.pi / (size + 1)
    return float(np.mean(np.tanh(beta * (lam - J * np.cos(xi)) / 2)))


def xy_magnetization_oracle(size, beta, J, lam) -> float:
    """(1/|Lambda|) sum_x <sigma3_x> in the spin Gibbs state."""
    from .numerics import PAULI

    H = xy_pauli_hamiltonian(size, J, lam)
    rho = expm_h(H, -beta)
    rho /= np.trace(rho)
    tot = 0.0
    for x in range(size):
        op = np.array([[1.0 + 0j]])
        for y in range(size):
            op = np.kron(op, PAULI["3"] if y == x else np.eye(2))
        tot += np.real(np.trace(rho @ op))
    return float(tot / size)


def xy_magnetization_limit(beta, J, lam) -> float:
    c = np.cosh(beta * lam / 2)
    val, _ = adaptive_gauss(lambda xi: 1.0 / (c + np.cosh(beta * (J * np.cos(xi) - lam / 2))),
                            0.0, np.pi, rtol=1e-12)
    return float(2 * np.sinh(beta * lam / 2) / np.pi * val)


def xy_scattering(N, J, convention=1) -> ScatteringData:
    """s(xi) = e^{-+2iN xi} swap; the sign is opposite to sign(J) when convention=1."""
    return chain_scattering(N, sign=-convention * np.sign(J))


def _xy_k(betas, J, lam, xi):
    e = J * np.cos(xi) - lam
    return -np.array(betas)[None, :] * e[:, None]


def xy_eplus(beta_L, beta_R, J, lam, alpha, p=2.0, N=0, rtol=1e-9) -> float:
    """e_{p,+}(alpha) of the open XY chain from the scattering determinant."""
    if J == 0:
        raise DomainError(J, "J must be nonzero")
    sc = xy_scattering(N, J)
    return _integrate_xi(lambda xi: scattering_logdet(_xy_k((beta_L, beta_R), J, lam, xi), sc(xi), alpha, p), rtol)


def _xy_integral(f, J, lam, rtol=1e-11):
    um, up = (lam - J) / 2, (lam + J) / 2
    val, _ = adaptive_gauss(f, um, up, rtol=rtol, atol=1e-14, n=32)
    return float(val / (J * np.pi))


def xy_eplus_closed(beta_L, beta_R, J, lam, alpha) -> float:
    """(1/J pi) int log(1 - sinh(a u db) sinh((1-a) u db) / (cosh(u bL) cosh(u bR))) du."""
    if J == 0:
        raise DomainError(J, "J must be nonzero")
    db = beta_R - beta_L

    def f(u):
        arg = 1 - np.sinh(alpha * u * db) * np.sinh((1 - alpha) * u * db) / (np.cosh(u * beta_L) * np.cosh(u * beta_R))
        if np.any(arg <= 0):
            raise DomainError(alpha, "alpha outside the analytic domain")
        return np.log(arg)
    return _xy_integral(f, J, lam)


def xy_eplus_xy(beta, X, Y, J, lam) -> float:
    """Two-parameter e_+(X, Y) with beta_j = beta - X_j, closed form."""
    dX, dY = X[1] - X[0], Y[1] - Y[0]
    bl, br = beta - X[0], beta - X[1]

    def f(u):
        return np.log(1 - np.sinh(u * dY) * np.sinh(u * (dX - dY)) / (np.cosh(u * bl) * np.cosh(u * br)))
    return _xy_integral(f, J, lam)


def xy_steady_current(beta_L, beta_R, J, lam) -> float:
    """Steady energy flux out of the left reservoir.

    Equals -(1/J pi) int u (tanh(bL u) - tanh(bR u)) du, which is -d/dY_L e_+(X, Y)
    at Y = 0 and the Landauer-Buttiker value for the Jordan-Wigner image.
    """
    return -_xy_integral(lambda u: u * (np.tanh(beta_L * u) - np.tanh(beta_R * u)), J, lam)


# ---------------------------------------------------------------------------
# JSON model documents

@dataclass
class ModelDocument:
    """Parsed model: sample h, leads, couplings lambda, optional XY data."""

    h_S: np.ndarray
    leads: list
    lam: float
    J: Optional[float] = None
    xy_field: Optional[float] = None

    def build(self, M) -> EBBModel:
        return ebb_build(self.h_S, self.leads, self.lam, M)

    def scattering(self) -> ScatteringData:
        dS = self.h_S.shape[0]
        chis = []
        for j, l in enumerate(self.leads):
            if l.chi is None:
                c = np.zeros(dS)
                c[0 if j == 0 else dS - 1] = 1.0
            else:
                c = np.asarray(l.chi, dtype=complex)
            chis.append(c)
        return ebb_scattering(self.h_S, chis, self.lam)


def load_model(doc) -> ModelDocument:
    """Parse a JSON model (string, path-like dict already loaded, or dict).

    Schema::

        {"sample": {"h": [[...]]} or {"chain": n},
         "leads": [{"beta": b, "mu": m, "chi": [...]}, ...],
         "lambda": lam, "J": J, "field": lam_xy}
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    sample = doc.get("sample", {"chain": 1})
    if "h" in sample:
        h = np.array(sample["h"], dtype=complex)
    else:
        h = chain_hamiltonian(int(sample.get("chain", 1)))
    leads = [LeadSpec(float(l["beta"]), float(l.get("mu", 0.0)), l.get("chi")) for l in doc.get("leads", [])]
    return ModelDocument(h_S=h, leads=leads, lam=float(doc.get("lambda", 0.0)),
                         J=doc.get("J"), xy_field=doc.get("field"))
