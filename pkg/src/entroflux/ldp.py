"""Fenchel-Legendre transforms, rate functions and 1-D large deviation checks.

Generating functions follow the convention e_t(s) = log int e^{s X_t} dP_t with
X_t the extensive variable, e(s) = lim e_t(s)/t and phi = sup_s (theta s - e(s)).
Entropic functionals e(alpha) = lim (1/t) log int e^{-t alpha x} dQ^t(x) enter
through :func:`entropic_cgf`, which flips the sign of the argument.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .numerics import POS_INF, StepSelectionFailure

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class ConvexFn:
    """Convex function on [a, b], +inf outside.

    ``f`` is called with scalars. Values of +inf inside [a, b] are allowed
    (open domains with a blow-up at the ends).
    """

    def __init__(self, f: Callable[[float], float], a, b, df=None, source="", n_grid=129):
        if not a < b:
            raise ValueError("need a < b")
        self.f, self.a, self.b, self.df = f, float(a), float(b), df
        self.source = source
        self.n_grid = n_grid
        self._grid = None

    def __call__(self, s):
        if np.ndim(s):
            return np.array([self(x) for x in np.ravel(s)]).reshape(np.shape(s))
        if s < self.a or s > self.b:
            return POS_INF
        v = float(self.f(float(s)))
        return POS_INF if np.isnan(v) else v

    def grid(self):
        if self._grid is None:
            s = np.linspace(self.a, self.b, self.n_grid)
            self._grid = (s, np.array([self(x) for x in s], dtype=float))
        return self._grid

    def convexity_defect(self, n=401) -> float:
        """max of f((x+y)/2) - (f(x)+f(y))/2 over neighbouring grid triples (finite values only)."""
        s = np.linspace(self.a, self.b, n)
        v = np.array([self(x) for x in s], dtype=float)
        mid = v[1:-1] - 0.5 * (v[:-2] + v[2:])
        ok = np.isfinite(v[1:-1]) & np.isfinite(v[:-2]) & np.isfinite(v[2:])
        return float(mid[ok].max()) if ok.any() else 0.0


def entropic_cgf(e: Callable[[float], float], a, b, source="") -> ConvexFn:
    """s -> e(-s) for an entropic functional e given on [a, b]."""
    return ConvexFn(lambda s: e(-s), -b, -a, source=source or "reflected entropic functional")


def _golden_max(obj, lo, hi, tol):
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = obj(x1), obj(x2)
    while hi - lo > tol:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = obj(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = obj(x1)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def _maximize(e: ConvexFn, theta, tol):
    s, v = e.grid()
    obj_grid = np.where(np.isfinite(v), theta * s - v, -np.inf)
    i = int(np.argmax(obj_grid))
    if not np.isfinite(obj_grid[i]):
        raise ValueError("function is +inf on the whole grid")

    def obj(x):
        val = e(x)
        return -np.inf if not np.isfinite(val) else theta * x - val

    lo, hi = s[max(i - 1, 0)], s[min(i + 1, len(s) - 1)]
    x, fx = _golden_max(obj, lo, hi, tol * max(1.0, abs(e.b - e.a)))
    if i in (0, len(s) - 1):
        end = s[i]
        if obj(end) >= fx:
            return end, obj(end)
    # quadratic refinement through a small symmetric stencil
    h = max(1e-5 * (hi - lo), 1e-10)
    fm, fp = obj(x - h), obj(x + h)
    den = fm - 2 * fx + fp
    if np.isfinite(den) and den < 0:
        xq = x - 0.5 * h * (fp - fm) / den
        if lo <= xq <= hi:
            fq = obj(xq)
            if fq > fx:
                x, fx = xq, fq
    return x, fx


def legendre(e: ConvexFn, theta, tol=1e-12, return_argmax=False):
    """phi(theta) = sup_{s in [a, b]} (theta s - e(s)); vectorized over theta."""
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    res = [_maximize(e, t, tol) for t in th]
    vals = np.array([r[1] for r in res])
    arg = np.array([r[0] for r in res])
    if np.ndim(theta) == 0:
        vals, arg = vals[0], arg[0]
    return (vals, arg) if return_argmax else vals


@dataclass
class RateFn:
    """Grid representation of a transformed function with its provenance."""
    x: np.ndarray
    values: np.ndarray
    kind: str = "phi"  # "phi" (theta, phi) or "I" (s, I)
    source: str = ""
    meta: dict = field(default_factory=dict)

    def __call__(self, x):
        return np.interp(x, self.x, self.values)

    def convexity_defect(self) -> float:
        x, v = self.x, self.values
        if len(x) < 3:
            return 0.0
        # second divided differences on a possibly uneven grid
        d1 = np.diff(v) / np.diff(x)
        return float(max(0.0, -np.min(np.diff(d1))))

    def to_csv(self) -> str:
        head = "theta,phi" if self.kind == "phi" else "s,I"
        rows = [head] + [f"{a:.17g},{b:.17g}" for a, b in zip(self.x, self.values)]
        return "\n".join(rows) + "\n"


def rate_function(e: ConvexFn, thetas) -> RateFn:
    th = np.asarray(thetas, dtype=float)
    return RateFn(th, np.asarray(legendre(e, th)), "phi", e.source)


def biconjugate(e: ConvexFn, s, theta_range, tol=1e-12):
    """sup_theta (theta s - phi(theta)) with phi computed by :func:`legendre`."""
    phi = ConvexFn(lambda th: legendre(e, th, tol), *theta_range, source="conjugate", n_grid=65)
    return legendre(phi, s, tol)


def young_check(e: ConvexFn, rng, n=1000, theta_range=(-5.0, 5.0)) -> float:
    """min over random (s, theta) of e(s) + phi(theta) - theta s; must be >= 0."""
    s = rng.uniform(e.a, e.b, n)
    th = rng.uniform(*theta_range, n)
    phi = legendre(e, th)
    ev = np.array([e(x) for x in s])
    ok = np.isfinite(ev)
    return float(np.min(ev[ok] + phi[ok] - th[ok] * s[ok]))


def entropic_rate(e: Callable[[float], float], a, b, s_grid, source="") -> RateFn:
    """I(s) = sup_alpha (-alpha s - e(alpha)) for an entropic functional on [a, b]."""
    cgf = entropic_cgf(e, a, b, source)
    s = np.asarray(s_grid, dtype=float)
    return RateFn(s, np.asarray(legendre(cgf, s)), "I", cgf.source)


def rate_symmetry_check(e: Callable[[float], float], a, b, s_grid, sym_tol=1e-9) -> float:
    """max |I(-s) - s - I(s)| for an entropic functional with e(alpha) = e(1 - alpha).

    The symmetry of ``e`` is verified first on a grid of [a, b]; the domain
    must be symmetric about 1/2.
    """
    if abs(a + b - 1.0) > 1e-12:
        raise ValueError("domain must be symmetric about 1/2")
    al = np.linspace(a, b, 41)[1:-1]
    vals = np.array([e(x) for x in al])
    refl = np.array([e(1 - x) for x in al])
    ok = np.isfinite(vals) & np.isfinite(refl)
    if np.any(np.abs(vals[ok] - refl[ok]) > sym_tol):
        raise ValueError("functional is not symmetric about 1/2")
    s = np.asarray(s_grid, dtype=float)
    both = np.concatenate([s, -s])
    r = entropic_rate(e, a, b, both)
    Ip, Im = r.values[:len(s)], r.values[len(s):]
    return float(np.max(np.abs(Im - s - Ip)))


# ---------------------------------------------------------------------------
# cumulants


def _taylor(f, h, m=4, order=4):
    """Derivatives 0..order at 0 from an exact polynomial fit on 2m+1 points."""
    x = h * np.arange(-m, m + 1)
    y = np.array([f(v) for v in x], dtype=float)
    if not np.all(np.isfinite(y)):
        raise StepSelectionFailure(f"non-finite generating function within step {h:g}")
    V = np.vander(x / h, 2 * m + 1, increasing=True)
    c = np.linalg.solve(V, y)
    fact = np.cumprod(np.concatenate([[1.0], np.arange(1, 2 * m + 1)]))
    return (c * fact / h ** np.arange(2 * m + 1))[: order + 1]


@dataclass
class CumulantReport:
    t: np.ndarray
    cumulants: np.ndarray  # shape (len(t), order), cumulants k = 1..order of X_t
    order: int

    def scaled(self):
        """kappa_k / t."""
        return self.cumulants / self.t[:, None]

    def slopes(self):
        """(kappa_k(t_{i+1}) - kappa_k(t_i)) / (t_{i+1} - t_i)."""
        return np.diff(self.cumulants, axis=0) / np.diff(self.t)[:, None]

    def normalized(self):
        """kappa_k / kappa_2^{k/2}: cumulants of the standardized variable (k >= 3 tend to 0)."""
        k2 = self.cumulants[:, 1]
        ks = np.arange(1, self.order + 1)
        return self.cumulants / np.abs(k2)[:, None] ** (ks / 2)


def cumulants_from_cgf(family: Callable[[float], Callable[[float], float]], ts: Sequence[float],
                       order=4, h=None, rtol=1e-4) -> CumulantReport:
    """Cumulants of X_t from e_t(s) = log E e^{s X_t} by finite differences at s = 0.

    Two step sizes are compared; if the first two cumulants disagree beyond
    ``rtol`` a :class:`StepSelectionFailure` is raised.
    """
    if not 1 <= order <= 4:
        raise ValueError("order must be 1..4")
    ts = np.asarray(ts, dtype=float)
    out = np.empty((len(ts), order))
    for i, t in enumerate(ts):
        f = family(t)
        step = h if h is not None else 0.02 / np.sqrt(max(t, 1.0))
        d1 = _taylor(f, step)
        d2 = _taylor(f, step / 2)
        scale = np.abs(d2[1:3]).max() + 1e-300
        if np.max(np.abs(d1[1:3] - d2[1:3])) > rtol * scale:
            raise StepSelectionFailure(f"derivatives unstable at t={t:g}")
        out[i] = d2[1:order + 1]
    return CumulantReport(ts, out, order)


def entropic_family(family):
    """Turn t -> (alpha -> log int e^{-alpha X_t}) into the s-convention family."""
    return lambda t: (lambda s: family(t)(-s))


# ---------------------------------------------------------------------------
# tail bounds


@dataclass
class TailReport:
    theta: float
    t: np.ndarray
    log_tail: np.ndarray  # (1/t) log P_t(X_t >= t theta), -inf for empty tails
    rate: float  # phi(theta)
    chernoff: np.ndarray  # finite-t bound -sup_{s >= 0}(theta s - e_t(s)/t)

    @property
    def delta(self):
        """Excess of the finite-t tail over -phi(theta), clipped at 0."""
        d = self.log_tail + self.rate
        return np.where(np.isfinite(d), np.maximum(d, 0.0), 0.0)

    @property
    def chernoff_holds(self) -> bool:
        return bool(np.all(self.log_tail <= self.chernoff + 1e-12))

    @property
    def delta_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.delta) <= 1e-12))


def ge_tail_bound_check(e: ConvexFn, measure_at: Callable, theta, ladder=(5, 10, 20, 40),
                        s_max=None) -> TailReport:
    """Compare (1/t) log P_t(x >= theta) with -phi(theta).

    ``measure_at(t)`` returns an AtomicMeasure for the mean variable x = X_t / t.
    Measures are normalized to mass 1 first. The finite-t Chernoff bound uses
    the exact atom sums for s in [0, s_max].
    """
    ts = np.asarray(ladder, dtype=float)
    phi = float(legendre(e, theta))
    s_max = e.b if s_max is None else s_max
    lt, ch = [], []
    for t in ts:
        mu = measure_at(t).normalized()
        p = mu.tail(theta)
        lt.append(np.log(p) / t if p > 0 else -np.inf)
        et = ConvexFn(lambda s, mu=mu, t=t: mu.log_laplace(s * t), 0.0, max(s_max, 1e-9), n_grid=65)
        ch.append(-float(legendre(et, t * theta)) / t)
    return TailReport(float(theta), ts, np.array(lt), phi, np.array(ch))


def gaussian_rate(mean, var, theta):
    """(theta - mean)^2 / (2 var)."""
    return (np.asarray(theta) - mean) ** 2 / (2 * var)
