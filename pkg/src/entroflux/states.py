"""States, entropies, hypothesis testing and trace-inequality oracles."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .numerics import (
    KTOL,
    NEG_INF,
    POS_INF,
    DimensionMismatch,
    HermitianOperator,
    QuadratureFailure,
    as_matrix,
    expm_h,
    gauss_legendre,
    logm_h,
    powm_h,
    schatten_norm,
    spectral,
)


class BadProbability(ValueError):
    pass


class InvalidState(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Positive unit-trace matrix with its support data.

    Build with :meth:`from_matrix` (or the ``gibbs``/``chaotic``/``pure``
    helpers) so small negative eigenvalues get clamped.
    """

    op: HermitianOperator
    support_rank: int
    faithful: bool

    @classmethod
    def from_matrix(cls, m, ktol=KTOL, normalize=False):
        op = HermitianOperator(m, htol=1e-10)
        sd = op.spectral()
        w = sd.eigenvalues
        top = max(w.max(), 0.0)
        if top <= 0:
            raise InvalidState("matrix has no positive part")
        if w.min() < -max(ktol * top, 1e-14):
            raise InvalidState(f"negative eigenvalue {w.min():.3e}")
        w = np.where(w > ktol * top, w, 0.0)
        tr = w.sum()
        if normalize:
            w = w / tr
        elif abs(tr - 1.0) > 1e-12 * max(1, len(w)):
            raise InvalidState(f"trace {tr!r} differs from 1")
        op = HermitianOperator(sd.rebuild(w), check=False)
        # keep the clamped spectrum exactly; rebuilding would re-introduce noise
        op._spec = type(sd)(w, sd.eigenvectors)
        r = int(np.count_nonzero(w))
        return cls(op, r, r == len(w))

    @classmethod
    def gibbs(cls, h, beta=1.0):
        sd = spectral(h)
        e = -beta * sd.eigenvalues
        p = np.exp(e - e.max())
        return cls.from_matrix(sd.rebuild(p / p.sum()))

    @classmethod
    def chaotic(cls, d):
        return cls.from_matrix(np.eye(d) / d)

    @classmethod
    def pure(cls, psi):
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls.from_matrix(np.outer(psi, psi.conj()))

    @property
    def dim(self):
        return self.op.dim

    @property
    def matrix(self):
        return self.op.entries

    @property
    def eigenvalues(self):
        return self.op.spectral().eigenvalues

    @property
    def eigenvectors(self):
        return self.op.spectral().eigenvectors

    def support_projection(self):
        sd = self.op.spectral()
        return sd.rebuild((sd.eigenvalues > 0).astype(float))

    def power(self, s):
        """rho^s on the support (kernel mapped to 0)."""
        return powm_h(self.op, s, support=True)

    def log(self):
        if not self.faithful:
            raise InvalidState("log of a non-faithful state")
        return logm_h(self.op)

    def expect(self, a):
        return complex(np.trace(self.matrix @ as_matrix(a)))

    def __array__(self, dtype=None, copy=None):
        return self.op.__array__(dtype)


def as_state(r) -> DensityMatrix:
    return r if isinstance(r, DensityMatrix) else DensityMatrix.from_matrix(r)


def random_density(d, rng, rank=None, real=False) -> DensityMatrix:
    """Hilbert-Schmidt random state (normalized G G^dagger)."""
    k = d if rank is None else rank
    g = rng.standard_normal((d, k))
    if not real:
        g = g + 1j * rng.standard_normal((d, k))
    m = g @ g.conj().T
    return DensityMatrix.from_matrix(m / np.trace(m).real)


@dataclass(frozen=True)
class QuantumChannel:
    """Channel in Kraus form X -> sum V X V^dagger."""

    kraus: tuple
    unital: bool
    trace_preserving: bool

    @classmethod
    def from_kraus(cls, ops, tol=1e-10):
        ops = tuple(np.asarray(v, dtype=complex) for v in ops)
        d = ops[0].shape[1]
        tp = sum(v.conj().T @ v for v in ops)
        un = sum(v @ v.conj().T for v in ops)
        return cls(
            ops,
            bool(np.max(np.abs(un - np.eye(un.shape[0]))) <= tol),
            bool(np.max(np.abs(tp - np.eye(d))) <= tol),
        )

    @classmethod
    def random_unitary_mixture(cls, d, k, rng):
        from .numerics import random_unitary

        p = rng.dirichlet(np.ones(k))
        return cls.from_kraus([np.sqrt(pi) * random_unitary(d, rng) for pi in p])

    def apply(self, x):
        x = as_matrix(x)
        return sum(v @ x @ v.conj().T for v in self.kraus)

    def dual(self, x):
        x = as_matrix(x)
        return sum(v.conj().T @ x @ v for v in self.kraus)


# ---------------------------------------------------------------------------
# entropies


def vn_entropy(rho) -> float:
    w = as_state(rho).eigenvalues
    w = w[w > 0]
    return float(-np.sum(w * np.log(w)))


def _overlaps(rho, nu):
    r, n = as_state(rho), as_state(nu)
    if r.dim != n.dim:
        raise DimensionMismatch("states act on different spaces")
    c = r.eigenvectors.conj().T @ n.eigenvectors
    return r.eigenvalues, n.eigenvalues, np.abs(c) ** 2


def _dominated(a, b, c2) -> bool:
    # rho << nu iff rho puts no weight on ker nu
    leak = np.sum(a[:, None] * c2[:, b == 0])
    return leak <= KTOL


def relative_entropy(rho, nu) -> float:
    """tr rho (log nu - log rho); NEG_INF unless Ran rho is inside Ran nu."""
    a, b, c2 = _overlaps(rho, nu)
    if not _dominated(a, b, c2):
        return NEG_INF
    ia, ib = a > 0, b > 0
    la = np.log(a[ia])
    lb = np.log(b[ib])
    cross = np.sum(a[ia][:, None] * c2[np.ix_(ia, ib)] * lb[None, :])
    return float(min(cross - np.sum(a[ia] * la), 0.0))


def renyi_relative_entropy(rho, nu, alpha) -> float:
    """log sum a^alpha b^(1-alpha) |<u|v>|^2 over the supports (no 1/(alpha-1))."""
    a, b, c2 = _overlaps(rho, nu)
    ia, ib = a > 0, b > 0
    w = c2[np.ix_(ia, ib)]
    la, lb = np.log(a[ia]), np.log(b[ib])
    expo = alpha * la[:, None] + (1 - alpha) * lb[None, :]
    mask = w > 0
    if not np.any(mask) or np.sum(w) <= KTOL:
        return NEG_INF
    m = expo[mask].max()
    return float(m + np.log(np.sum(w[mask] * np.exp(expo[mask] - m))))


# ---------------------------------------------------------------------------
# hypothesis testing


def _check_p(p):
    if not 0 < p < 1:
        raise BadProbability(f"prior must lie in (0, 1), got {p}")


def error_probability(rho, nu, p, proj) -> float:
    """p rho(1 - P) + (1 - p) nu(P)."""
    _check_p(p)
    r, n = as_matrix(rho), as_matrix(nu)
    pm = as_matrix(proj)
    return float(p + np.trace(pm @ ((1 - p) * n - p * r)).real)


def hypothesis_min_error(rho, nu, p):
    """Minimal two-hypothesis error and the optimal projection.

    The projection accepts ``rho`` on the positive part of p rho - (1-p) nu.
    """
    _check_p(p)
    r, n = as_matrix(rho), as_matrix(nu)
    diff = p * r - (1 - p) * n
    sd = spectral(diff)
    proj = sd.rebuild((sd.eigenvalues > 0).astype(float))
    d = 0.5 * (1 - np.sum(np.abs(sd.eigenvalues)))
    return float(d), proj


def _golden_min(f, a, b, tol=1e-10):
    g = (np.sqrt(5) - 1) / 2
    x1, x2 = b - g * (b - a), a + g * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - g * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (b - a)
            f2 = f(x2)
    x = 0.5 * (a + b)
    cands = [(f(a0), a0) for a0 in (a, b, x)]
    return min(cands)


def chernoff_distance(rho, nu, return_argmin=False):
    """-min over alpha in [0, 1] of the Renyi functional."""
    if renyi_relative_entropy(rho, nu, 0.5) is NEG_INF:
        return (POS_INF, np.nan) if return_argmin else POS_INF
    fmin, amin = _golden_min(lambda x: renyi_relative_entropy(rho, nu, x), 0.0, 1.0)
    for end in (0.0, 1.0):
        fe = renyi_relative_entropy(rho, nu, end)
        if fe < fmin:
            fmin, amin = fe, end
    val = -float(fmin)
    return (val, amin) if return_argmin else val


# ---------------------------------------------------------------------------
# Kosaki variational formula


def _kosaki_quad(g, q, alpha, rtol, n=64, max_panels=2048):
    """int_0^inf t^(alpha-1) g(t) dt, with q(t) = t g(t) bounded at infinity.

    After t = u / (1 - u) the left half uses u = x^(1/alpha) and the right
    half 1 - u = x^(1/(1-alpha)); the power singularities cancel against the
    Jacobians, leaving smooth integrands (1/alpha)(1-u)^(-1-alpha) g(t) and
    (1/(1-alpha)) u^(alpha-2) q(t).
    """
    b = 1 - alpha

    def composite(panels):
        tot = 0.0
        for side, e in ((0, alpha), (1, b)):
            edges = np.linspace(0.0, 0.5 ** e, panels + 1)
            for e0, e1 in zip(edges[:-1], edges[1:]):
                x, w = gauss_legendre(n, e0, e1)
                s = x ** (1 / e)
                if side == 0:
                    f = (1 / alpha) * (1 - s) ** (-1 - alpha) * g(s / (1 - s))
                else:
                    u = 1 - s
                    with np.errstate(divide="ignore"):
                        t = u / s
                    f = (1 / b) * u ** (alpha - 2) * q(t)
                tot += np.sum(w * f)
        return tot

    panels = 1
    prev = composite(panels)
    while True:
        panels *= 2
        cur = composite(panels)
        err = abs(cur - prev)
        if err <= rtol * abs(cur):
            return cur, err
        if panels >= max_panels:
            raise QuadratureFailure(err)
        prev = cur


def kosaki_integral(rho, nu, alpha, a_of_t: Callable, rtol=1e-8):
    """Kosaki functional (sin pi a / pi) int t^(a-1) [rho(A A*)/t + nu((1-A)*(1-A))] dt.

    ``a_of_t`` maps a scalar t to a matrix. Returns POS_INF when the integrand
    is not integrable at either end.
    """
    r, n = as_matrix(rho), as_matrix(nu)
    eye = np.eye(r.shape[0])

    def g_scalar(t):
        a = a_of_t(t)
        one_m = eye - a
        return np.trace(r @ a @ a.conj().T).real / t + np.trace(n @ one_m.conj().T @ one_m).real

    # t^alpha g(t) must vanish at both ends for convergence
    lo = [t ** alpha * abs(g_scalar(t)) for t in (1e-6, 1e-12)]
    hi = [t ** alpha * abs(g_scalar(t)) for t in (1e6, 1e12)]
    if lo[1] >= lo[0] > 0 or hi[1] >= hi[0] > 0:
        return POS_INF

    def g(ts):
        return np.array([g_scalar(min(max(t, 1e-300), 1e300)) for t in ts])

    def q(ts):
        ts = np.minimum(np.maximum(ts, 1e-300), 1e300)
        return ts * g(ts)

    val, _ = _kosaki_quad(g, q, alpha, rtol, n=32, max_panels=256)
    return float(np.sin(np.pi * alpha) / np.pi * val)


def kosaki_optimal_a(rho, nu, t):
    """Minimizer A(t) = t int_0^inf e^{-s rho} nu e^{-s t nu} ds in closed form."""
    r, n = as_state(rho), as_state(nu)
    a, u = r.eigenvalues, r.eigenvectors
    b, v = n.eigenvalues, n.eigenvectors
    den = a[:, None] + t * b[None, :]
    m = np.where(den > 0, t * b[None, :] / np.where(den > 0, den, 1.0), 0.0)
    c = u.conj().T @ v
    return u @ (m * c) @ v.conj().T


def kosaki_value(rho, nu, alpha, rtol=1e-8, n=64):
    """Kosaki integral at the optimal A(t); equals exp S_alpha(rho|nu).

    Uses the eigenbasis form of the optimal integrand
    t^(alpha-1) sum |<u_i|v_j>|^2 a_i b_j / (a_i + t b_j), integrated after
    t = u / (1 - u) with power maps removing the endpoint singularities.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    r, nn = as_state(rho), as_state(nu)
    if not (r.faithful or nn.faithful):
        raise ValueError("one of the states must be faithful")
    a, b, c2 = _overlaps(r, nn)
    keep = (a[:, None] * b[None, :] * c2) > 0
    aa = np.broadcast_to(a[:, None], c2.shape)[keep]
    bb = np.broadcast_to(b[None, :], c2.shape)[keep]
    ww = c2[keep] * aa * bb

    def g(t):
        return np.sum(ww[None, :] / (aa[None, :] + t[:, None] * bb[None, :]), axis=1)

    def q(t):
        with np.errstate(divide="ignore"):
            inv = 1.0 / t
        return np.sum(ww[None, :] / (aa[None, :] * inv[:, None] + bb[None, :]), axis=1)

    val, _ = _kosaki_quad(g, q, alpha, rtol, n=n)
    return float(np.sin(np.pi * alpha) / np.pi * val)


# ---------------------------------------------------------------------------
# variational principles and trace inequalities


@dataclass(frozen=True)
class TraceGaps:
    PB: float
    Klein: float
    GT: float


def _logtrexp(a):
    w = spectral(a).eigenvalues
    m = w.max()
    return float(m + np.log(np.sum(np.exp(w - m))))


def trace_inequality_gaps(a, b) -> TraceGaps:
    """Nonnegative gaps certifying Peierls-Bogoliubov, Klein and Golden-Thompson.

    Klein is evaluated on (A, B) when both are positive definite, otherwise on
    (e^A / tr e^A, e^B / tr e^B).
    """
    am, bm = as_matrix(a), as_matrix(b)
    ea = expm_h(am)
    pb = _logtrexp(am + bm) - _logtrexp(am) - np.trace(ea @ bm).real / np.trace(ea).real
    wa, wb = spectral(am).eigenvalues, spectral(bm).eigenvalues
    if wa.min() > 0 and wb.min() > 0:
        pa, pbm = am, bm
    else:
        pa = ea / np.trace(ea).real
        eb = expm_h(bm)
        pbm = eb / np.trace(eb).real
    klein = np.trace(pa @ (logm_h(pa) - logm_h(pbm))).real - np.trace(pa - pbm).real
    gt = np.trace(ea @ expm_h(bm)).real - np.exp(_logtrexp(am + bm))
    return TraceGaps(float(pb), float(klein), float(gt))


@dataclass(frozen=True)
class GibbsCheck:
    min_gap: float
    max_gap: float
    maximizer_gap: float
    value: float


def gibbs_variational_check(a, trials=100, seed=0) -> GibbsCheck:
    """Sample log tr e^A - (rho(A) + S(rho)) over random states."""
    am = as_matrix(a)
    rng = np.random.default_rng(seed)
    val = _logtrexp(am)
    gaps = []
    for _ in range(trials):
        r = random_density(am.shape[0], rng)
        gaps.append(val - (r.expect(am).real + vn_entropy(r)))
    ra = DensityMatrix.gibbs(am, beta=-1.0)
    g0 = val - (ra.expect(am).real + vn_entropy(ra))
    return GibbsCheck(float(min(gaps)), float(max(gaps)), float(abs(g0)), val)


def holder_gap(a, b, p) -> float:
    """||A||_p ||B||_q - ||AB||_1 with 1/p + 1/q = 1."""
    q = np.inf if p == 1 else (1.0 if np.isinf(p) else p / (p - 1))
    return schatten_norm(a, p) * schatten_norm(b, q) - schatten_norm(as_matrix(a) @ as_matrix(b), 1)


def minkowski_gap(a, b, p) -> float:
    return schatten_norm(a, p) + schatten_norm(b, p) - schatten_norm(as_matrix(a) + as_matrix(b), p)


def alt_sequence(a, b, ps: Sequence[float]) -> np.ndarray:
    """p -> ||e^{B/p} e^{A/p}||_p^p; the last entry uses ``inf`` for tr e^{A+B}."""
    out = []
    for p in ps:
        if np.isinf(p):
            out.append(np.exp(_logtrexp(as_matrix(a) + as_matrix(b))))
        else:
            m = expm_h(b, 1 / p) @ expm_h(a, 1 / p)
            out.append(schatten_norm(m, p) ** p)
    return np.array(out)


def lowner_heinz_gap(a, b, s) -> float:
    """Smallest eigenvalue of A^s - B^s for A >= B >= 0 and s in [0, 1]."""
    d = powm_h(a, s, support=True) - powm_h(b, s, support=True)
    return float(spectral(d).eigenvalues.min())


def fannes_bound(rho, nu) -> float:
    """Audenaert-Fannes continuity bound on |S(rho) - S(nu)|."""
    d = as_state(rho).dim
    tn = 0.5 * schatten_norm(as_matrix(rho) - as_matrix(nu), 1)
    if tn == 0:
        return 0.0
    h = -tn * np.log(tn) - (1 - tn) * np.log(1 - tn) if tn < 1 else 0.0
    return float(tn * np.log(d - 1) + h) if d > 1 else 0.0
