"""Finite quantum dynamical systems and their entropic functionals.

Conventions: tau^t(A) = e^{itH} A e^{-itH}, omega_t = e^{-itH} omega e^{itH},
sigma = -i[H, log omega], ell_t = log omega_t - log omega.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .numerics import (
    DimensionMismatch,
    HermitianOperator,
    NonCommutingFamily,
    QuadratureFailure,
    StepSelectionFailure,
    as_matrix,
    commutator,
    evolve,
    expm_h,
    gauss_legendre,
    joint_eigenbasis,
    logm_h,
    random_hermitian,
    random_unitary,
    schatten_norm,
    simpson_doubling,
    spectral,
    tensor_embed,
)
from .states import DensityMatrix, as_state, relative_entropy


class GaugeViolation(ValueError):
    pass


class NotTimeReversalInvariant(ValueError):
    pass


def _tri_apply(theta, a):
    # theta = unitary u of Theta = u . conj . u^dagger, or True for plain conjugation
    a = np.conj(as_matrix(a))
    if theta is True:
        return a
    u = np.asarray(theta)
    return u @ a @ u.conj().T


def check_commuting(ops, ctol=1e-10):
    ops = [as_matrix(q) for q in ops]
    worst = 0.0
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            c = commutator(ops[i], ops[j])
            scale = max(1.0, np.abs(ops[i]).max() * np.abs(ops[j]).max())
            worst = max(worst, float(np.abs(c).max()) / scale)
    if worst > ctol:
        raise NonCommutingFamily(worst)
    return worst


class QuantumDynamicalSystem:
    """(H, omega) with optional time reversal and commuting charges.

    Parameters
    ----------
    H : array_like
        Hamiltonian.
    omega : DensityMatrix or array_like
        Faithful reference state.
    theta : None, True or unitary
        Time reversal, realized as ``u conj(A) u^dagger`` (``True`` means u = 1).
    charges : sequence of matrices, optional
        Commuting family with ``sum(charges) == log omega``.
    """

    def __init__(self, H, omega, theta=None, charges=None, tol=1e-10):
        self.H = HermitianOperator(as_matrix(H), htol=1e-10)
        self.omega = as_state(omega)
        if not self.omega.faithful:
            raise ValueError("reference state must be faithful")
        if self.H.dim != self.omega.dim:
            raise DimensionMismatch("H and omega dimensions differ")
        self.theta = theta
        if theta is not None:
            for name, m in (("H", self.H.entries), ("omega", self.omega.matrix)):
                d = np.abs(_tri_apply(theta, m) - m).max()
                if d > tol * max(1.0, np.abs(m).max()):
                    raise NotTimeReversalInvariant(f"Theta({name}) != {name} (defect {d:.2e})")
        self.log_omega = logm_h(self.omega.op)
        self.charges = None
        if charges is not None:
            qs = [np.asarray(as_matrix(q)) for q in charges]
            check_commuting(qs)
            d = np.abs(sum(qs) - self.log_omega).max()
            if d > 1e-8 * max(1.0, np.abs(self.log_omega).max()):
                raise ValueError(f"charges do not add up to log omega (defect {d:.2e})")
            self.charges = qs

    @property
    def dim(self):
        return self.H.dim

    @property
    def tri(self):
        return self.theta is not None

    def theta_apply(self, a):
        if self.theta is None:
            raise NotTimeReversalInvariant("system carries no time reversal")
        return _tri_apply(self.theta, a)

    def tau(self, a, t):
        return evolve(a, self.H, t)

    def omega_t_power(self, t, s):
        """omega_t^s = e^{-itH} omega^s e^{itH}."""
        return evolve(self.omega.power(s), self.H, -t)

    def omega_t(self, t):
        return self.omega_t_power(t, 1.0)

    def log_omega_t(self, t):
        return evolve(self.log_omega, self.H, -t)

    def expect(self, a):
        return complex(np.trace(self.omega.matrix @ as_matrix(a)))


def random_system(d, rng, tri=False, scale=1.0):
    """Random system with generic H and omega; real matrices when ``tri``."""
    h = random_hermitian(d, rng, scale, real=tri)
    k = random_hermitian(d, rng, 1.0, real=tri)
    w = expm_h(k)
    w = w / np.trace(w).real
    return QuantumDynamicalSystem(h, w, theta=True if tri else None)


# ---------------------------------------------------------------------------
# entropy production and relative Hamiltonian


def entropy_production(sys: QuantumDynamicalSystem) -> np.ndarray:
    h = sys.H.entries
    return -1j * commutator(h, sys.log_omega)


def relative_hamiltonian(sys: QuantumDynamicalSystem, t) -> np.ndarray:
    return sys.log_omega_t(t) - sys.log_omega


def mean_entropy_production(sys, t) -> np.ndarray:
    """Sigma^t = (1/t) int_0^t tau^s(sigma) ds = -ell_{-t} / t."""
    if t == 0:
        return entropy_production(sys)
    return -relative_hamiltonian(sys, -t) / t


def time_integral(a, h, t0, t1, sign=1) -> np.ndarray:
    """Exact int_{t0}^{t1} e^{i sign s H} A e^{-i sign s H} ds in the H eigenbasis."""
    sd = spectral(h)
    u, w = sd.eigenvectors, sd.eigenvalues
    m = u.conj().T @ as_matrix(a) @ u
    om = sign * (w[:, None] - w[None, :])
    small = np.abs(om) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(small, t1 - t0, (np.exp(1j * om * t1) - np.exp(1j * om * t0)) / (1j * np.where(small, 1, om)))
    return u @ (m * k) @ u.conj().T


# ---------------------------------------------------------------------------
# entropic pressure functionals


def _logtrexp(a):
    w = spectral(a).eigenvalues
    m = w.max()
    return float(m + np.log(np.sum(np.exp(w - m))))


def _log_schatten_p(m, p):
    """log tr |m|^p from singular values.

    tr (a b^2 a)^{p/2} = tr |b a|^p; going through the singular values of b a
    avoids square roots of rounding-level eigenvalues of a b^2 a.
    """
    sv = np.linalg.svd(m, compute_uv=False)
    top = sv.max()
    return float(p * np.log(top) + np.log(np.sum((sv / top) ** p)))


def e_pt(sys: QuantumDynamicalSystem, t, alpha, p=2.0) -> float:
    """log tr[(omega^{(1-a)/p} omega_t^{2a/p} omega^{(1-a)/p})^{p/2}]; p = inf uses
    log tr exp(log omega + a ell_t)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if np.isinf(p):
        return _logtrexp((1 - alpha) * sys.log_omega + alpha * sys.log_omega_t(t))
    a = sys.omega.power((1 - alpha) / p)
    c = sys.omega_t_power(t, alpha / p)
    return _log_schatten_p(c @ a, p)


def _charge_exp(qs, coeffs, scale):
    return expm_h(sum(c * q for c, q in zip(coeffs, qs)), scale)


def e_pt_multi(sys: QuantumDynamicalSystem, t, alphas, p=2.0) -> float:
    """Multi-parameter functional with omega^alpha = exp(sum alpha_j Q_j)."""
    if sys.charges is None:
        raise ValueError("system has no charge decomposition")
    qs = sys.charges
    al = np.asarray(alphas, dtype=float)
    if al.shape != (len(qs),):
        raise DimensionMismatch("one exponent per charge required")
    qts = [evolve(q, sys.H, -t) for q in qs]
    if np.isinf(p):
        return _logtrexp(sum((1 - a) * q for a, q in zip(al, qs)) + sum(a * q for a, q in zip(al, qts)))
    a = _charge_exp(qs, 1 - al, 1 / p)
    c = _charge_exp(qts, al, 1 / p)
    return _log_schatten_p(c @ a, p)


def kubo_mari(rho, a, b) -> complex:
    """Bogoliubov inner product int_0^1 tr(rho^{1-s} A* rho^s B) ds."""
    r = as_state(rho)
    if not r.faithful:
        raise ValueError("Kubo-Mari product needs a faithful state")
    p, u = r.eigenvalues, r.eigenvectors
    am = u.conj().T @ as_matrix(a) @ u
    bm = u.conj().T @ as_matrix(b) @ u
    return complex(np.sum(np.conj(am) * bm * log_mean(p[:, None], p[None, :])))


def log_mean(x, y):
    """(x - y) / (log x - log y) with the diagonal limit x."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    lx, ly = np.log(x), np.log(y)
    d = lx - ly
    close = np.abs(d) < 1e-6
    # series x * (1 + d'/2 + d'^2/6) around the coincidence, d' = ly - lx
    series = x * (1 - d / 2 + d * d / 6 - d ** 3 / 24)
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = (x - y) / np.where(close, 1.0, d)
    return np.where(close, series, exact)


@dataclass(frozen=True)
class EptDerivatives:
    d1_at0: float
    d1_at1: float
    d2_at0: float
    ref_d1_at0: float
    ref_d1_at1: float
    ref_d2_at0: float


def five_point(f, x, h, order=1):
    if order == 1:
        return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h)


def e_pt_derivatives(sys, t, p=2.0, h=1e-3) -> EptDerivatives:
    """Finite-difference alpha-derivatives next to their closed forms.

    The second-derivative reference is the plain variance for p = 2 and the
    Kubo-Mari variance for p = inf; other p get NaN.
    """
    f = lambda a: e_pt(sys, t, a, p)
    ell = relative_hamiltonian(sys, t)
    w_ell = sys.expect(ell).real
    r1 = -relative_entropy(sys.omega_t(t), sys.omega)
    if p == 2:
        r2 = sys.expect(ell @ ell).real - w_ell ** 2
    elif np.isinf(p):
        r2 = kubo_mari(sys.omega, ell, ell).real - w_ell ** 2
    else:
        r2 = np.nan
    return EptDerivatives(
        five_point(f, 0.0, h), five_point(f, 1.0, h), five_point(f, 0.0, h, 2), w_ell, r1, r2
    )


# ---------------------------------------------------------------------------
# control families and the generalized functional


@dataclass(frozen=True)
class FluxFamily:
    fluxes: tuple

    def check(self, sigma, forces, tol=1e-10):
        s = sum(x * f for x, f in zip(forces, self.fluxes))
        d = float(np.abs(s - sigma).max()) if len(self.fluxes) else float(np.abs(sigma).max())
        if d > tol * max(1.0, float(np.abs(sigma).max())):
            raise ValueError(f"flux relation violated (defect {d:.2e})")
        return d


@dataclass
class ControlledFamily:
    """X -> (system, fluxes) with sum X_j Phi_j = sigma_X."""

    build: Callable
    nforces: int

    def __call__(self, X):
        return self.build(np.asarray(X, dtype=float))


def e_gen(family: ControlledFamily, t, X, Y, atol=1e-9) -> float:
    """log tr exp(log omega_X + Y . int_0^t Phi_X(-s) ds), Simpson in time."""
    sysx, fl = family(X)
    fl.check(entropy_production(sysx), X)
    Y = np.asarray(Y, dtype=float)
    if not np.any(Y) or t == 0:
        return 0.0
    op = sum(y * f for y, f in zip(Y, fl.fluxes))
    sd = sysx.H.spectral()
    u, w = sd.eigenvectors, sd.eigenvalues
    m = u.conj().T @ op @ u
    om = w[:, None] - w[None, :]

    def integrand(s):
        # tau^{-s}(op) in the H eigenbasis, shape (len(s), d, d)
        return m[None] * np.exp(-1j * s[:, None, None] * om[None])

    lo, hi = (0.0, t) if t > 0 else (t, 0.0)
    integ = simpson_doubling(integrand, lo, hi, atol=atol)
    if t < 0:
        integ = -integ
    k = u @ integ @ u.conj().T
    return _logtrexp(sysx.log_omega + 0.5 * (k + k.conj().T))


def time_averaged_flux(sys, flux, t):
    """(1/t) int_0^t omega(tau^s(flux)) ds, exactly."""
    return sys.expect(time_integral(flux, sys.H, 0.0, t)).real / t


def _gk_entry(sys, fk, fj, t, atol):
    # omega commutes with H at X = 0; use a common eigenbasis for both
    u, vals, _ = joint_eigenbasis([sys.H.entries, sys.omega.matrix])
    w, pv = vals[:, 0], vals[:, 1]
    mk = u.conj().T @ fk @ u
    mj = u.conj().T @ fj @ u
    lm = log_mean(pv[:, None], pv[None, :])
    om = w[:, None] - w[None, :]

    def integrand(s):
        ph = np.exp(1j * s[:, None, None] * om[None])
        val = np.sum(np.conj(mk)[None] * mj[None] * ph * lm[None], axis=(1, 2)).real
        return val * (1 - np.abs(s) / t)

    return 0.5 * float(simpson_doubling(integrand, -t, t, atol=atol))


def finite_time_transport(family: ControlledFamily, t, h=1e-3, atol=1e-10, rtol=1e-6):
    """Onsager matrix at X = 0 by two routes.

    Returns ``(L_derivative, L_green_kubo)``; route (a) differentiates the
    time-averaged fluxes, route (b) integrates the Kubo-Mari correlation.
    """
    n = family.nforces
    zero = np.zeros(n)
    sys0, fl0 = family(zero)
    if np.abs(commutator(sys0.H.entries, sys0.omega.matrix)).max() > 1e-9:
        raise ValueError("X = 0 must be an equilibrium (steady) state")

    def averaged(X):
        s, fl = family(X)
        return np.array([time_averaged_flux(s, f, t) for f in fl.fluxes])

    la = np.zeros((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0

        def deriv(step):
            return (-averaged(2 * step * e) + 8 * averaged(step * e) - 8 * averaged(-step * e)
                    + averaged(-2 * step * e)) / (12 * step)

        d1, d2 = deriv(h), deriv(h / 2)
        if np.max(np.abs(d1 - d2)) > max(rtol * np.max(np.abs(d2)), 1e-9):
            d3 = deriv(h / 4)
            if np.max(np.abs(d2 - d3)) > max(rtol * np.max(np.abs(d3)), 1e-9):
                raise StepSelectionFailure("derivative unstable under step halving")
            d2 = d3
        la[:, k] = d2
    lb = np.zeros((n, n))
    for j in range(n):
        for k in range(n):
            lb[j, k] = _gk_entry(sys0, fl0.fluxes[k], fl0.fluxes[j], t, atol)
    return la, lb


# ---------------------------------------------------------------------------
# perturbations, KMS, open systems


def interaction_propagator(H, V, z) -> np.ndarray:
    """E_V(z) = e^{iz(H+V)} e^{-izH}; z may be complex."""
    h = as_matrix(H)
    return expm_h(h + as_matrix(V), 1j * z) @ expm_h(h, -1j * z)


def kms_defect(H, beta, a, b) -> float:
    """|rho(AB) - rho(tau^{-i beta}(B) A)| for the Gibbs state of H."""
    rho = DensityMatrix.gibbs(H, beta).matrix
    lhs = np.trace(rho @ a @ b)
    rhs = np.trace(rho @ evolve(b, H, -1j * beta) @ a)
    return float(abs(lhs - rhs))


@dataclass
class Reservoir:
    H: np.ndarray
    N: np.ndarray
    beta: float
    mu: float = 0.0


@dataclass
class OpenSystemSpec:
    """Sample plus reservoirs on S (x) R_1 (x) ... (x) R_n.

    ``couplings`` act on the full space; ``omega_S`` defaults to the
    chaotic state of the sample.
    """

    H_S: np.ndarray
    N_S: np.ndarray
    reservoirs: list
    couplings: list
    lam: float = 1.0
    omega_S: Optional[np.ndarray] = None
    tol: float = 1e-10


@dataclass
class OpenSystem:
    sys: QuantumDynamicalSystem
    energy_fluxes: list
    charge_fluxes: list
    charges: list
    H_V: np.ndarray
    H_j: list
    N_j: list
    N_total: np.ndarray
    Q: np.ndarray
    dims: list
    spec: OpenSystemSpec


def _embed_all(spec):
    dims = [spec.H_S.shape[0]] + [r.H.shape[0] for r in spec.reservoirs]
    hs = tensor_embed([(spec.H_S, 0)], dims)
    ns = tensor_embed([(spec.N_S, 0)], dims)
    hj = [tensor_embed([(r.H, k + 1)], dims) for k, r in enumerate(spec.reservoirs)]
    nj = [tensor_embed([(r.N, k + 1)], dims) for k, r in enumerate(spec.reservoirs)]
    return dims, hs, ns, hj, nj


def build_open_system(spec: OpenSystemSpec, theta=None) -> OpenSystem:
    """Coupled Hamiltonian, product reference state, fluxes and charges."""
    dims, hs, ns, hj, nj = _embed_all(spec)
    for r in spec.reservoirs:
        if np.abs(commutator(r.H, r.N)).max() > spec.tol:
            raise GaugeViolation("reservoir Hamiltonian does not conserve its charge")
    ntot = ns + sum(nj)
    for k, v in enumerate(spec.couplings):
        v = as_matrix(v)
        if np.abs(commutator(nj[k] + ns, v)).max() > spec.tol * max(1.0, np.abs(v).max()):
            raise GaugeViolation(f"coupling {k} does not conserve N_S + N_{k}")
    hv = hs + sum(hj) + spec.lam * sum(as_matrix(v) for v in spec.couplings)
    d_s = dims[0]
    w_s = np.eye(d_s) / d_s if spec.omega_S is None else as_matrix(spec.omega_S)
    log_ws = logm_h(w_s)
    qs = -tensor_embed([(log_ws, 0)], dims)
    # log omega = -Q - sum beta_j (H_j - mu_j N_j) - log Z
    charges = []
    consts = 0.0
    for k, r in enumerate(spec.reservoirs):
        g = -r.beta * (r.H - r.mu * r.N)
        w = spectral(g).eigenvalues
        consts += w.max() + np.log(np.sum(np.exp(w - w.max())))
        charges.append(-r.beta * hj[k])
    for k, r in enumerate(spec.reservoirs):
        charges.append(r.beta * r.mu * nj[k])
    log_w = -qs + sum(charges) - consts * np.eye(qs.shape[0])
    charges = [-qs - consts * np.eye(qs.shape[0])] + charges
    omega = expm_h(log_w)
    omega = omega / np.trace(omega).real
    sys = QuantumDynamicalSystem(hv, omega, theta=theta, charges=charges)
    phi = [-1j * commutator(hv, h) for h in hj]
    jj = [-1j * commutator(hv, n) for n in nj]
    return OpenSystem(sys, phi, jj, charges, hv, hj, nj, ntot, qs, dims, spec)


def open_sigma_decomposition(osys: OpenSystem) -> float:
    """Defect of sigma = -sum beta_j (Phi_j - mu_j J_j) + i[H_V, Q]."""
    sig = entropy_production(osys.sys)
    rhs = 1j * commutator(osys.H_V, osys.Q)
    for r, phi, jj in zip(osys.spec.reservoirs, osys.energy_fluxes, osys.charge_fluxes):
        rhs = rhs - r.beta * (phi - r.mu * jj)
    return float(np.abs(sig - rhs).max())


def linear_response_family(osys: OpenSystem, beta_eq, mu_eq=0.0) -> ControlledFamily:
    """Forces X_j = beta_eq - beta_j, X_{n+j} = -beta_eq mu_eq + beta_j mu_j.

    omega_X is proportional to exp(-beta_eq (H_V - mu_eq N) + sum X_j H_j + X_{n+j} N_j)
    and the fluxes are (Phi_1..Phi_n, J_1..J_n), independent of X.
    """
    n = len(osys.H_j)
    base = -beta_eq * (osys.H_V - mu_eq * osys.N_total)
    fl = FluxFamily(tuple(osys.energy_fluxes) + tuple(osys.charge_fluxes))
    gens = list(osys.H_j) + list(osys.N_j)

    def build(X):
        g = base + sum(x * q for x, q in zip(X, gens))
        w = expm_h(g - spectral(g).eigenvalues.max() * np.eye(g.shape[0]))
        w = w / np.trace(w).real
        return QuantumDynamicalSystem(osys.H_V, w, theta=osys.sys.theta), fl

    return ControlledFamily(build, 2 * n)


def random_open_toy(rng, beta=(1.0, 0.6), mu=(0.0, 0.0), lam=0.7, tri=True):
    """Qubit sample hopping onto two qubit reservoirs; real matrices when ``tri``.

    Charges count spin-up occupation, couplings are sigma^+ sigma^- hops so
    N_S + N_j is conserved.
    """
    sp = np.array([[0, 1], [0, 0]], dtype=float)
    n1 = np.diag([1.0, 0.0])
    e = rng.uniform(0.5, 1.5, size=3)
    res = [Reservoir(e[k + 1] * n1, n1.copy(), beta[k], mu[k]) for k in range(2)]
    dims = [2, 2, 2]
    cpl = []
    for k in range(2):
        g = rng.uniform(0.5, 1.0)
        hop = tensor_embed([(sp, 0), (sp.T, k + 1)], dims)
        cpl.append(g * (hop + hop.T))
    ws = np.diag([0.6, 0.4])
    spec = OpenSystemSpec(e[0] * n1, n1.copy(), res, cpl, lam, ws)
    return build_open_system(spec, theta=True if tri else None)


def reference_state_bound(sys_w, sys_r, t, alpha):
    """(lhs, rhs) of |e_inf(omega) - e_inf(rho)| <= (|1-a| + |a|) ||log omega - log rho||."""
    lhs = abs(e_pt(sys_w, t, alpha, np.inf) - e_pt(sys_r, t, alpha, np.inf))
    rhs = (abs(1 - alpha) + abs(alpha)) * schatten_norm(sys_w.log_omega - sys_r.log_omega, np.inf)
    return lhs, rhs


def es_failure_value(sys, t) -> float:
    """omega(exp(-t Sigma^t)), which is >= 1 with equality iff [H, omega] = 0."""
    s = mean_entropy_production(sys, t)
    return sys.expect(expm_h(0.5 * (s + s.conj().T), -t)).real
