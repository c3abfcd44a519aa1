"""Thermally driven classical harmonic chain.

Phase space vectors are ordered (p, q) over the sites -M..M. The chain on
[-N, N] is coupled at its ends to reservoir chains [-M, -N-1] and [N+1, M].
The reference state omega_X is Gaussian with covariance
D_X = (beta h - k(X))^{-1}, k(X) = X_L h_L + X_R h_R.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numerics import POS_INF, DomainError

KAPPA = (np.sqrt(5.0) - 1.0) / (2.0 * np.pi)


@dataclass(frozen=True)
class ChainConfig:
    N: int = 20
    M: int = 300
    beta: float = 1.0
    beta_L: float = 1.0
    beta_R: float = 1.0

    def __post_init__(self):
        if not (self.M > self.N >= 0):
            raise ValueError("need M > N >= 0")
        if min(self.beta, self.beta_L, self.beta_R) <= 0:
            raise DomainError((self.beta, self.beta_L, self.beta_R), "inverse temperatures must be positive")

    @property
    def X(self):
        return np.array([self.beta - self.beta_L, self.beta - self.beta_R])

    @classmethod
    def from_temperatures(cls, T_L, T_R, N=20, M=300, beta=None):
        b = 2.0 / (T_L + T_R) if beta is None else beta
        return cls(N=N, M=M, beta=b, beta_L=1.0 / T_L, beta_R=1.0 / T_R)


def _dirichlet_block(n):
    """1 - Delta on n sites with Dirichlet ends: 3 on the diagonal, -1 off it."""
    return 3.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)


def _phase(qpart, ppart):
    n = qpart.shape[0]
    out = np.zeros((2 * n, 2 * n))
    out[:n, :n] = ppart
    out[n:, n:] = qpart
    return out


class PhaseSpaceOperators:
    """Dense phase-space matrices of a chain configuration.

    Attributes: h, h0, hL, hR, j and the normal-mode data (V, w) of
    K = 1 - Delta, from which e^{tL} is assembled in closed form.
    """

    def __init__(self, cfg: ChainConfig):
        self.cfg = cfg
        N, M = cfg.N, cfg.M
        n = 2 * M + 1
        self.n = n
        self.K = _dirichlet_block(n)
        K0 = self.K.copy()
        a, b = M - N - 1, M - N  # sites -N-1 and -N
        c, d = M + N, M + N + 1  # sites N and N+1
        for i, k in ((a, b), (c, d)):
            K0[i, k] = K0[k, i] = 0.0
        self.K0 = K0
        one = np.eye(n)
        self.h = _phase(self.K, one)
        self.h0 = _phase(K0, one)
        self.left = np.arange(0, M - N)
        self.right = np.arange(M + N + 1, n)
        self.system = np.arange(M - N, M + N + 1)
        self.hL = self._restricted(self.left)
        self.hR = self._restricted(self.right)
        self.j = np.block([[np.zeros((n, n)), -one], [one, np.zeros((n, n))]])
        w2, V = np.linalg.eigh(self.K)
        self.w = np.sqrt(w2)
        self.V = V

    def _restricted(self, idx):
        n = self.n
        P = np.zeros((n, n))
        P[idx, idx] = 1.0
        Kb = np.zeros((n, n))
        Kb[np.ix_(idx, idx)] = self.K0[np.ix_(idx, idx)]
        return _phase(Kb, P)

    @property
    def L(self):
        return self.j @ self.h

    def k(self, Y):
        return Y[0] * self.hL + Y[1] * self.hR

    def D(self, X):
        return np.linalg.inv(self.cfg.beta * self.h - self.k(X))

    def propagator(self, t):
        """e^{tL} = [[cos tW, -W sin tW], [W^{-1} sin tW, cos tW]] in (p, q) blocks."""
        V, w = self.V, self.w
        c, s = np.cos(t * w), np.sin(t * w)
        C = (V * c) @ V.T
        A = (V * (w * s)) @ V.T
        B = (V * (s / w)) @ V.T
        return np.block([[C, -A], [B, C]])

    def evolved_k(self, Y, t):
        """e^{tL*} k(Y) e^{tL}."""
        U = self.propagator(t)
        return U.T @ self.k(Y) @ U

    def flux_ops(self):
        """Quadratic forms phi_L, phi_R of 2 Phi_L, 2 Phi_R (Phi_L = -p_{-N-1} q_{-N})."""
        n, M, N = self.n, self.cfg.M, self.cfg.N
        out = []
        for pi, qi in ((M - N - 1, M - N), (M + N + 1, M + N)):
            f = np.zeros((2 * n, 2 * n))
            f[pi, n + qi] = f[n + qi, pi] = -1.0
            out.append(f)
        return out


def chain_build(cfg: ChainConfig) -> PhaseSpaceOperators:
    return PhaseSpaceOperators(cfg)


def _logdet_pd(a) -> Optional[float]:
    try:
        c = np.linalg.cholesky(0.5 * (a + a.T))
    except np.linalg.LinAlgError:
        return None
    return float(2.0 * np.sum(np.log(np.diag(c))))


def _g_from_inverse_cov(dinv, A):
    """-1/2 log det(1 - D A) with D = dinv^{-1}; +inf when not positive."""
    top = _logdet_pd(dinv - A)
    if top is None:
        return POS_INF
    return -0.5 * (top - _logdet_pd(dinv))


def chain_gt(ops: PhaseSpaceOperators, t, X, Y) -> float:
    """g_t(X, Y) = -1/2 log det(1 - D_X(e^{tL*} k(Y) e^{tL} - k(Y)))."""
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    dinv = ops.cfg.beta * ops.h - ops.k(X)
    A = ops.evolved_k(Y, t) - ops.k(Y)
    return _g_from_inverse_cov(dinv, A)


def chain_et(ops: PhaseSpaceOperators, t, alpha) -> float:
    X = ops.cfg.X
    return chain_gt(ops, t, X, alpha * X)


class _ModeExpansion:
    """Complex normal modes of L: eigenvalues +-i w with explicit eigenvectors."""

    def __init__(self, ops: PhaseSpaceOperators):
        V, w = ops.V, ops.w
        iw = 1j * w
        self.lam = np.concatenate([iw, -iw])
        self.R = np.block([[V * iw, -(V * iw)], [V + 0j, V + 0j]])
        Vt = V.T
        self.Rinv = 0.5 * np.block([[Vt / iw[:, None], Vt], [-Vt / iw[:, None], Vt]])


def chain_mean_ep(ops: PhaseSpaceOperators, t, X=None) -> np.ndarray:
    """omega_X(Sigma^t) = (1/2t) tr(D_X(k(X) - e^{-tL*} k(X) e^{-tL})), vectorized over t."""
    X = ops.cfg.X if X is None else np.asarray(X, float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    D = ops.D(X)
    kx = ops.k(X)
    me = _ModeExpansion(ops)
    B = me.Rinv @ D @ me.Rinv.T
    Kt = me.R.T @ kx @ me.R
    W = B.T * Kt  # W_ab = B_ba Kt_ab
    base = float(np.sum(D * kx))
    lam = me.lam
    out = np.empty(len(t))
    for i, s in enumerate(t):
        if s == 0:
            out[i] = 0.0
            continue
        e = np.exp(-s * lam)
        out[i] = (base - np.real(e @ W @ e)) / (2 * s)
    return out


def chain_mean_ep_direct(ops: PhaseSpaceOperators, t, X=None) -> float:
    """Same quantity by dense propagation; the forward-time form, equal under time reversal."""
    X = ops.cfg.X if X is None else np.asarray(X, float)
    D = ops.D(X)
    A = ops.k(X) - ops.evolved_k(X, t)
    return float(np.sum(D * A) / (2 * t))


def chain_g_closed(beta, X, Y) -> float:
    """Large-time g(X, Y); +inf outside -1/T_R < Y_R - Y_L < 1/T_L."""
    dX, dY = X[1] - X[0], Y[1] - Y[0]
    arg = 1 + dY * (dX - dY) / ((beta - X[1]) * (beta - X[0]))
    if arg <= 0:
        return POS_INF
    return float(-KAPPA * np.log(arg))


def chain_e_closed(T_L, T_R, alpha) -> float:
    arg = 1 + (T_L - T_R) ** 2 / (T_L * T_R) * alpha * (1 - alpha)
    if arg <= 0:
        return POS_INF
    return float(-KAPPA * np.log(arg))


@dataclass(frozen=True)
class SteadyState:
    flux: float
    entropy_production: float
    clt_covariance: np.ndarray


def chain_steady(beta_L, beta_R) -> SteadyState:
    TL, TR = 1.0 / beta_L, 1.0 / beta_R
    d = KAPPA * (TL ** 2 + TR ** 2)
    return SteadyState(flux=KAPPA * (TL - TR),
                       entropy_production=KAPPA * (TL - TR) ** 2 / (TL * TR),
                       clt_covariance=np.array([[d, -d], [-d, d]]))


def chain_rate(beta, X, theta):
    """Parametric rate function on the anti-diagonal: (s_L, s_R, F(theta))."""
    theta = np.asarray(theta, dtype=float)
    b0 = beta - 0.5 * (X[0] + X[1])
    dl = 0.5 * (X[0] - X[1])
    sl = KAPPA / b0 * np.sinh(theta)
    F = KAPPA * (2 * np.sinh(theta / 2) ** 2 - dl / b0 * np.sinh(theta)
                 - np.log((1 - dl ** 2 / b0 ** 2) * np.cosh(theta / 2) ** 2))
    return sl, -sl, F


def chain_diagonal_cgf(beta, X):
    """u -> g(X, Y) along Y_R - Y_L = u; its Legendre transform at s is I_X(s, -s)."""
    def g(u):
        return chain_g_closed(beta, X, (0.0, u))
    return g


def chain_diagonal_domain(beta, X):
    """Open interval of u = Y_R - Y_L on which g is finite."""
    return -(beta - X[1]), beta - X[0]


def chain_onshell_s(k, N, sign=1) -> np.ndarray:
    """e^{+-2ikN} [[0, 1], [1, 0]]."""
    if not 0 < k < np.pi:
        raise DomainError(k, "k must lie in (0, pi)")
    return np.exp(sign * 2j * k * N) * np.array([[0, 1], [1, 0]], dtype=complex)


def ness_inverse_covariance(ops: PhaseSpaceOperators, X, t_star=150.0):
    """Finite-M proxy for D_{X,+}^{-1}: beta h - e^{-t*L*} k(X) e^{-t*L}."""
    X = np.asarray(X, float)
    return ops.cfg.beta * ops.h - ops.evolved_k(X, -t_star)


def chain_gc_gplus_t(ops: PhaseSpaceOperators, t, X, Y, t_star=150.0) -> float:
    """g_{+,t}(X, Y) with the steady covariance replaced by D_{X,t*}."""
    Y = np.asarray(Y, float)
    dinv = ness_inverse_covariance(ops, X, t_star)
    A = ops.evolved_k(Y, t) - ops.k(Y)
    return _g_from_inverse_cov(dinv, A)


def chain_onsager_fd(beta, h=1e-4):
    """(L, D) at X = 0 from finite differences of the closed g.

    L_jk = -d_{X_k} d_{Y_j} g, D_jk = d_{Y_j} d_{Y_k} g.
    """
    e = np.eye(2)
    L = np.zeros((2, 2))
    D = np.zeros((2, 2))
    g = lambda X, Y: chain_g_closed(beta, X, Y)
    z = np.zeros(2)
    for j in range(2):
        for k in range(2):
            L[j, k] = -(g(h * e[k], h * e[j]) - g(h * e[k], -h * e[j])
                        - g(-h * e[k], h * e[j]) + g(-h * e[k], -h * e[j])) / (4 * h * h)
            D[j, k] = (g(z, h * (e[j] + e[k])) - g(z, h * (e[j] - e[k]))
                       - g(z, h * (e[k] - e[j])) + g(z, -h * (e[j] + e[k]))) / (4 * h * h)
    return L, D
