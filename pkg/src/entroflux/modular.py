"""Relative modular spectra, Araki-Masuda norms and full counting statistics.

Matrices are treated as vectors of the standard Hilbert space with inner
product (xi|eta) = tr(xi^dagger eta); the relative modular operator acts as
xi -> rho xi nu^{-1}.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .dynsys import QuantumDynamicalSystem, check_commuting, e_pt
from .numerics import (
    BadExponent,
    as_matrix,
    evolve,
    expm_h,
    joint_eigenbasis,
    powm_h,
    schatten_norm,
)
from .states import as_state


class AtomicMeasure:
    """Finite list of weighted atoms in R^m.

    Atoms closer than ``btol`` (times the location scale, in max-norm) are
    merged with summed weights; zero-weight atoms are dropped.
    """

    def __init__(self, locations, weights, btol=1e-9, merge=True, wtol=0.0):
        loc = np.asarray(locations, dtype=float)
        if loc.ndim == 1:
            loc = loc[:, None]
        w = np.asarray(weights, dtype=float)
        if np.any(w < -1e-14):
            raise ValueError("negative atom weight")
        w = np.clip(w, 0.0, None)
        keep = w > wtol
        loc, w = loc[keep], w[keep]
        self.btol = btol
        if merge and len(w):
            loc, w = _merge(loc, w, btol)
        self.locations = loc
        self.weights = w

    @property
    def dim(self):
        return self.locations.shape[1]

    def __len__(self):
        return len(self.weights)

    def mass(self):
        return float(np.sum(self.weights))

    def normalized(self):
        return AtomicMeasure(self.locations, self.weights / self.mass(), self.btol, merge=False)

    def mean(self):
        return self.weights @ self.locations / self.mass()

    def covariance(self):
        m = self.mean()
        c = self.locations - m
        return (c * self.weights[:, None]).T @ c / self.mass()

    def moment_generating(self, theta):
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        return float(np.sum(self.weights * np.exp(self.locations @ th)))

    def log_laplace(self, theta):
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        x = self.locations @ th
        m = x.max()
        return float(m + np.log(np.sum(self.weights * np.exp(x - m))))

    def reflected(self):
        return AtomicMeasure(-self.locations, self.weights, self.btol, merge=False)

    def marginal(self, k):
        return AtomicMeasure(self.locations[:, k], self.weights, self.btol)

    def tail(self, theta, k=0):
        """Mass of {x_k >= theta}."""
        x = self.locations[:, k]
        eps = self.btol * max(1.0, abs(theta))
        return float(np.sum(self.weights[x >= theta - eps]))

    def total_variation(self, other) -> float:
        """Half the l1 distance after matching atoms within btol."""
        loc = np.concatenate([self.locations, other.locations])
        w = np.concatenate([self.weights, -other.weights])
        _, merged = _merge(loc, w, max(self.btol, other.btol), signed=True)
        return 0.5 * float(np.sum(np.abs(merged)))

    def weight_at(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        scale = max(1.0, float(np.abs(self.locations).max())) if len(self) else 1.0
        d = np.max(np.abs(self.locations - x[None, :]), axis=1)
        return float(np.sum(self.weights[d <= self.btol * scale]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow([f"loc_{k + 1}" for k in range(self.dim)] + ["weight"])
        for x, w in zip(self.locations, self.weights):
            wr.writerow([f"{v:.17g}" for v in x] + [f"{w:.17g}"])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"locations": self.locations.tolist(), "weights": self.weights.tolist(),
                           "btol": self.btol})

    @classmethod
    def from_json(cls, s):
        d = json.loads(s)
        return cls(np.array(d["locations"]).reshape(len(d["weights"]), -1), d["weights"], d["btol"], merge=False)

    def __repr__(self):
        return f"AtomicMeasure(atoms={len(self)}, dim={self.dim}, mass={self.mass():.12g})"


def _merge(loc, w, btol, signed=False):
    scale = max(1.0, float(np.abs(loc).max())) if loc.size else 1.0
    tol = btol * scale
    order = np.lexsort(loc.T[::-1])
    loc, w = loc[order], w[order]
    first = loc[:, 0]
    label = -np.ones(len(w), dtype=int)
    reps = []
    for i in range(len(w)):
        if label[i] >= 0:
            continue
        label[i] = len(reps)
        reps.append(i)
        hi = np.searchsorted(first, first[i] + tol, side="right")
        cand = np.arange(i + 1, hi)
        cand = cand[label[cand] < 0]
        if cand.size:
            close = np.max(np.abs(loc[cand] - loc[i]), axis=1) <= tol
            label[cand[close]] = label[i]
    n = len(reps)
    wsum = np.zeros(n)
    np.add.at(wsum, label, w)
    if signed:
        return loc[reps], wsum
    lsum = np.zeros((n, loc.shape[1]))
    aw = np.abs(w)
    np.add.at(lsum, label, loc * aw[:, None])
    cnt = np.zeros(n)
    np.add.at(cnt, label, aw)
    out = np.where(cnt[:, None] > 0, lsum / np.where(cnt > 0, cnt, 1)[:, None], loc[reps])
    return out, wsum


# ---------------------------------------------------------------------------
# relative modular operator


@dataclass(frozen=True)
class RelativeModularSpectrum:
    """Eigenvalues a_i / b_j of the relative modular operator on the supports,
    with weights w_ij = b_j |<u_i|v_j>|^2 for the vector nu^{1/2}."""

    a: np.ndarray
    b: np.ndarray
    weights: np.ndarray

    @property
    def log_values(self):
        return np.log(self.a) - np.log(self.b)

    @property
    def values(self):
        return self.a / self.b

    def renyi(self, alpha):
        lv = self.log_values
        x = alpha * lv
        m = x.max()
        return float(m + np.log(np.sum(self.weights * np.exp(x - m))))

    def mass_at_least(self, x):
        """Spectral measure of [x, inf) (x > 0)."""
        return float(np.sum(self.weights[self.values >= x * (1 - 1e-12)]))

    def measure(self, scale=1.0, btol=1e-9):
        """Atomic measure of ``scale * log Delta``."""
        return AtomicMeasure(scale * self.log_values, self.weights, btol)


def relative_modular_spectrum(rho, nu) -> RelativeModularSpectrum:
    r, n = as_state(rho), as_state(nu)
    a, u = r.eigenvalues, r.eigenvectors
    b, v = n.eigenvalues, n.eigenvectors
    c2 = np.abs(u.conj().T @ v) ** 2
    w = b[None, :] * c2
    ia, ib = a > 0, b > 0
    aa, bb = np.meshgrid(a, b, indexing="ij")
    keep = ia[:, None] & ib[None, :] & (w > 0)
    return RelativeModularSpectrum(aa[keep], bb[keep], w[keep])


def araki_masuda_norm(xi, omega, p) -> float:
    """||xi omega^{1/p - 1/2}||_p for faithful omega."""
    if p < 1:
        raise BadExponent(f"p must be >= 1, got {p}")
    w = as_state(omega)
    if not w.faithful:
        raise ValueError("omega must be faithful")
    s = (0.0 if np.isinf(p) else 1.0 / p) - 0.5
    return schatten_norm(as_matrix(xi) @ powm_h(w.op, s), p)


def transfer_functional_check(sys: QuantumDynamicalSystem, t, alpha, p):
    """Compare e_{p,t}(alpha) with p log ||omega_t^{a/p} omega^{1/2 - a/p}||_{omega,p}."""
    if np.isinf(p) or p < 1:
        raise BadExponent("finite p >= 1 required")
    lhs = e_pt(sys, t, alpha, p)
    vec = sys.omega_t_power(t, alpha / p) @ sys.omega.power(0.5 - alpha / p)
    rhs = p * np.log(araki_masuda_norm(vec, sys.omega, p))
    return lhs, float(rhs), abs(lhs - rhs)


# ---------------------------------------------------------------------------
# full counting statistics


def fcs_spectral_measure(sys: QuantumDynamicalSystem, t, btol=1e-9) -> AtomicMeasure:
    """Spectral measure Q^t of -(1/t) log Delta_{omega_t|omega} for omega^{1/2}.

    For t = 0 the convention is a point mass at 0.
    """
    if t == 0:
        return AtomicMeasure([[0.0]], [1.0], btol)
    spec = relative_modular_spectrum(sys.omega_t(t), sys.omega)
    return AtomicMeasure(-spec.log_values / t, spec.weights, btol)


def two_time_distribution(omega, H, t, observables, btol=1e-9, ctol=1e-10) -> AtomicMeasure:
    """Joint law of (s' - s) / t for two joint measurements of a commuting family.

    The first measurement leaves P_s omega P_s; the pair probability is
    tr(P_s' e^{-itH} P_s omega P_s e^{itH}). When omega commutes with the
    family this is the two-time formula with omega P_s in place of P_s omega P_s.
    """
    obs = [as_matrix(o) for o in observables]
    check_commuting(obs, ctol)
    w = as_matrix(omega)
    u, vals, sizes = joint_eigenbasis(obs)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    groups = [np.arange(starts[k], starts[k + 1]) for k in range(len(sizes))]
    spec_vals = np.array([vals[g[0]] for g in groups])
    if t == 0:
        return AtomicMeasure(np.zeros((1, len(obs))), [1.0], btol)
    prop = expm_h(H, -1j * t)
    m = u.conj().T @ prop @ u
    wt = u.conj().T @ w @ u
    locs, weights = [], []
    for k, gk in enumerate(groups):
        blk = wt[np.ix_(gk, gk)]
        for kp, gp in enumerate(groups):
            mk = m[np.ix_(gp, gk)]
            p = np.trace(mk @ blk @ mk.conj().T).real
            locs.append((spec_vals[kp] - spec_vals[k]) / t)
            weights.append(p)
    return AtomicMeasure(np.array(locs), np.clip(weights, 0, None), btol)


def multi_fcs(sys: QuantumDynamicalSystem, t, btol=1e-9) -> AtomicMeasure:
    """Joint spectral measure of {-(1/t) log Delta_{omega_{jt}|omega_j}}.

    Atoms sit at -(q(i) - q(k)) / t where q are joint eigenvalues of the
    charges, weights b_k |<e^{-itH} v_i|v_k>|^2. The Laplace transform at
    t * alpha reproduces the multi-parameter e_{2,t}.
    """
    if sys.charges is None:
        raise ValueError("system has no charge decomposition")
    qs = sys.charges
    check_commuting(qs)
    if t == 0:
        return AtomicMeasure(np.zeros((1, len(qs))), [1.0], btol)
    v, q, _ = joint_eigenbasis(qs)
    b = np.exp(q.sum(axis=1))
    b = b / b.sum()
    u = expm_h(sys.H, -1j * t) @ v
    c2 = np.abs(u.conj().T @ v) ** 2
    locs = -(q[:, None, :] - q[None, :, :]) / t
    w = b[None, :] * c2
    return AtomicMeasure(locs.reshape(-1, len(qs)), w.ravel(), btol)


def laplace_check(measure: AtomicMeasure, t, alpha) -> float:
    """log int e^{-t alpha . s} dQ."""
    return measure.log_laplace(-t * np.atleast_1d(alpha))


def tri_pairing_defect(measure: AtomicMeasure, t) -> float:
    """max over atoms of |Q(-s) - e^{-t s} Q(s)|, one-dimensional measures."""
    worst = 0.0
    for x, w in zip(measure.locations[:, 0], measure.weights):
        wr = measure.weight_at([-x])
        worst = max(worst, abs(wr - np.exp(-t * x) * w))
    return worst


def multi_tri_pairing_defect(measure: AtomicMeasure, t) -> float:
    """max |P(-phi) - e^{-t 1.phi} P(phi)| for vector-valued measures."""
    worst = 0.0
    for x, w in zip(measure.locations, measure.weights):
        wr = measure.weight_at(-x)
        worst = max(worst, abs(wr - np.exp(-t * x.sum()) * w))
    return worst
