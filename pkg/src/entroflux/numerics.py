"""Dense Hermitian spectral toolkit.

Every matrix function in the package goes through :func:`eig_hermitian`, so
fractional powers, logarithms and complex-time exponentials share one code
path and one tolerance budget.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Sequence

import numpy as np

HTOL = 1e-12
RTOL = 1e-10
KTOL = 1e-12
FLOOR = 1e-300


class NonHermitian(ValueError):
    def __init__(self, defect):
        super().__init__(f"hermiticity defect {defect:.3e} exceeds tolerance")
        self.defect = defect


class DomainError(ValueError):
    def __init__(self, value, msg="argument outside function domain"):
        super().__init__(f"{msg}: {value!r}")
        self.value = value


class BadExponent(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class DimensionTooLarge(ValueError):
    pass


class QuadratureFailure(RuntimeError):
    def __init__(self, err, msg="quadrature tolerance not met"):
        super().__init__(f"{msg} (estimated error {err:.3e})")
        self.estimated_error = err


class StepSelectionFailure(RuntimeError):
    pass


class NonCommutingFamily(ValueError):
    def __init__(self, defect):
        super().__init__(f"observables fail to commute, defect {defect:.3e}")
        self.defect = defect


class _Infinity(float):
    """Extended-real sentinel. Behaves as a float infinity in arithmetic."""

    def __new__(cls, sign):
        obj = super().__new__(cls, float("inf") if sign > 0 else float("-inf"))
        obj.sign = 1 if sign > 0 else -1
        return obj

    def __repr__(self):
        return "POS_INF" if self.sign > 0 else "NEG_INF"

    def __neg__(self):
        return POS_INF if self.sign < 0 else NEG_INF


NEG_INF = _Infinity(-1)
POS_INF = _Infinity(1)


def is_infinite(x) -> bool:
    return isinstance(x, _Infinity)


# ---------------------------------------------------------------------------
# spectral data


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def unitarity_defect(self) -> float:
        u = self.eigenvectors
        return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))

    def rebuild(self, values=None) -> np.ndarray:
        u = self.eigenvectors
        w = self.eigenvalues if values is None else values
        return (u * w) @ u.conj().T


def _fix_phases(u):
    # make the largest-magnitude component of each column real positive
    idx = np.argmax(np.abs(u), axis=0)
    piv = u[idx, np.arange(u.shape[1])]
    return u * (np.abs(piv) / piv)


def hermiticity_defect(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def _check_square(a):
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {a.shape}")


class HermitianOperator:
    """Dense Hermitian matrix with a cached spectral decomposition.

    Parameters
    ----------
    entries : array_like
        Square complex matrix.
    htol : float
        Allowed hermiticity defect relative to the largest entry.
    """

    __slots__ = ("entries", "hermiticity_defect", "_spec")

    def __init__(self, entries, htol=HTOL, check=True):
        a = np.array(entries, dtype=complex)
        _check_square(a)
        d = hermiticity_defect(a)
        scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
        if check and d > htol * scale:
            raise NonHermitian(d)
        self.entries = 0.5 * (a + a.conj().T)
        self.entries.setflags(write=False)
        self.hermiticity_defect = d
        self._spec = None

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def spectral(self) -> SpectralDecomposition:
        if self._spec is None:
            self._spec = _eigh(self.entries)
        return self._spec

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim})"


def as_matrix(a) -> np.ndarray:
    if isinstance(a, HermitianOperator):
        return a.entries
    if hasattr(a, "op") and isinstance(getattr(a, "op"), HermitianOperator):
        return a.op.entries
    return np.asarray(a, dtype=complex)


def as_hermitian(a, htol=HTOL) -> HermitianOperator:
    if isinstance(a, HermitianOperator):
        return a
    if hasattr(a, "op") and isinstance(getattr(a, "op"), HermitianOperator):
        return a.op
    return HermitianOperator(a, htol=htol)


def _eigh(a) -> SpectralDecomposition:
    w, u = np.linalg.eigh(a)
    return SpectralDecomposition(w, _fix_phases(u))


def eig_hermitian(a, htol=HTOL) -> SpectralDecomposition:
    """Ascending eigenvalues and phase-fixed eigenvectors of a Hermitian matrix."""
    op = as_hermitian(a, htol)
    return op.spectral()


def spectral(a) -> SpectralDecomposition:
    """Spectral data without the hermiticity check (caller guarantees it)."""
    if isinstance(a, HermitianOperator):
        return a.spectral()
    if hasattr(a, "op") and isinstance(getattr(a, "op"), HermitianOperator):
        return a.op.spectral()
    m = np.asarray(a)
    return _eigh(0.5 * (m + m.conj().T))


# ---------------------------------------------------------------------------
# functional calculus


@dataclass(frozen=True)
class OperatorFunction:
    """Scalar function lifted to Hermitian matrices.

    ``domain`` is a closed interval; ``policy='clamp'`` pushes arguments below
    the left end up to ``max(lo, floor)`` instead of raising.
    """

    f: Callable
    label: str = "f"
    domain: tuple = (-np.inf, np.inf)
    policy: str = "error"
    floor: float = FLOOR

    def __post_init__(self):
        if self.policy not in ("error", "clamp"):
            raise ValueError("policy must be 'error' or 'clamp'")

    def prepare(self, w):
        lo, hi = self.domain
        if self.policy == "clamp":
            return np.clip(w, max(lo, self.floor) if np.isfinite(lo) else lo, hi)
        bad = (w < lo) | (w > hi)
        if np.any(bad):
            raise DomainError(float(w[bad][0]))
        return w

    def __call__(self, w):
        return self.f(self.prepare(np.asarray(w, dtype=float)))


EXP = OperatorFunction(np.exp, "exp")
LOG = OperatorFunction(np.log, "log", domain=(0.0, np.inf))
SQRT = OperatorFunction(np.sqrt, "sqrt", domain=(0.0, np.inf))


def power_fn(s) -> OperatorFunction:
    lo = 0.0 if s >= 0 else np.nextafter(0, 1)
    return OperatorFunction(lambda x: np.power(x, s), f"x^{s}", domain=(lo, np.inf))


def matfun(a, f) -> np.ndarray:
    """Return ``sum f(lambda) P_lambda``.

    ``f`` may be an :class:`OperatorFunction` or a plain vectorized callable.
    """
    sd = spectral(a)
    vals = f(sd.eigenvalues)
    return sd.rebuild(vals)


def expm_h(a, c=1.0) -> np.ndarray:
    """exp(c A) for Hermitian A and complex scalar c."""
    sd = spectral(a)
    return sd.rebuild(np.exp(c * sd.eigenvalues))


def logm_h(a, floor=None) -> np.ndarray:
    sd = spectral(a)
    w = sd.eigenvalues
    if floor is not None:
        w = np.maximum(w, floor)
    elif np.any(w <= 0):
        raise DomainError(float(w.min()), "log of non-positive eigenvalue")
    return sd.rebuild(np.log(w))


def powm_h(a, s, support=False) -> np.ndarray:
    """A^s for positive semidefinite A.

    With ``support=True`` the power acts on the support only (kernel stays 0).
    """
    sd = spectral(a)
    w = sd.eigenvalues
    top = max(w.max(), 0.0) if w.size else 0.0
    keep = w > KTOL * top
    out = np.zeros_like(w)
    if not support and not np.all(keep) and s <= 0:
        raise DomainError(float(w.min()), "negative power of singular matrix")
    out[keep] = np.power(w[keep], s)
    if not support and s == 0:
        out[:] = 1.0
    return sd.rebuild(out)


def psd_part(a) -> np.ndarray:
    sd = spectral(a)
    return sd.rebuild(np.maximum(sd.eigenvalues, 0.0))


# ---------------------------------------------------------------------------
# norms, traces, embeddings


def singular_values(a) -> np.ndarray:
    return np.linalg.svd(np.asarray(a), compute_uv=False)


def schatten_norm(a, p) -> float:
    """Schatten p-norm from singular values; ``p=np.inf`` gives the operator norm."""
    if p < 1:
        raise BadExponent(f"p must be >= 1, got {p}")
    s = singular_values(as_matrix(a))
    if np.isinf(p):
        return float(s.max()) if s.size else 0.0
    m = s.max() if s.size else 0.0
    if m == 0:
        return 0.0
    return float(m * np.sum((s / m) ** p) ** (1.0 / p))


def partial_trace(a, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every tensor factor not listed in ``keep``."""
    m = as_matrix(a)
    dims = [int(d) for d in dims]
    n = int(np.prod(dims))
    if m.shape != (n, n):
        raise DimensionMismatch(f"dims {dims} incompatible with shape {m.shape}")
    keep = sorted({int(k) for k in np.atleast_1d(keep)})
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionMismatch(f"keep index out of range: {keep}")
    r = len(dims)
    t = m.reshape(dims + dims)
    # contract traced factors pairwise, highest index first so axes stay valid
    for k in reversed(range(r)):
        if k in keep:
            continue
        nk = t.ndim // 2
        t = np.trace(t, axis1=k, axis2=k + nk)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(dk, dk)


def evolve(a, h, t) -> np.ndarray:
    """Heisenberg evolution e^{itH} A e^{-itH}; ``t`` may be complex."""
    m = as_matrix(a)
    sd = spectral(h)
    if m.shape != (sd.eigenvalues.size,) * 2:
        raise DimensionMismatch("operator and Hamiltonian dimensions differ")
    u, w = sd.eigenvectors, sd.eigenvalues
    ph = np.exp(1j * t * w)
    inner = u.conj().T @ m @ u
    return u @ (ph[:, None] * inner * (1.0 / ph)[None, :]) @ u.conj().T


def tensor_embed(ops, dims: Sequence[int]) -> np.ndarray:
    """Kronecker product placing each (operator, slot) pair, identity elsewhere."""
    dims = [int(d) for d in dims]
    slots = {}
    for op, slot in ops:
        slot = int(slot)
        if slot in slots or not 0 <= slot < len(dims):
            raise DimensionMismatch(f"bad or repeated slot {slot}")
        m = as_matrix(op)
        if m.shape != (dims[slot], dims[slot]):
            raise DimensionMismatch(f"slot {slot} expects dim {dims[slot]}")
        slots[slot] = m
    facs = [slots.get(k, np.eye(d)) for k, d in enumerate(dims)]
    return reduce(np.kron, facs)


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


def random_hermitian(d, rng, scale=1.0, real=False) -> np.ndarray:
    """GUE-like sample (GOE when ``real``)."""
    g = rng.standard_normal((d, d))
    if not real:
        g = g + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (g + g.conj().T)


def random_unitary(d, rng) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


PAULI = {
    "0": np.eye(2, dtype=complex),
    "1": np.array([[0, 1], [1, 0]], dtype=complex),
    "2": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "3": np.array([[1, 0], [0, -1]], dtype=complex),
}


def gauss_legendre(n, a=0.0, b=1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def adaptive_gauss(f, a, b, rtol=1e-8, atol=1e-14, n=64, max_panels=4096):
    """Composite Gauss-Legendre with panel doubling.

    ``f`` is vectorized over nodes. Returns (value, error estimate); raises
    QuadratureFailure once ``max_panels`` is exceeded.
    """
    x0, w0 = np.polynomial.legendre.leggauss(n)

    def rule(panels):
        edges = np.linspace(a, b, panels + 1)
        h = 0.5 * np.diff(edges)
        c = 0.5 * (edges[1:] + edges[:-1])
        xs = (c[:, None] + h[:, None] * x0[None, :]).ravel()
        ws = (h[:, None] * w0[None, :]).ravel()
        return np.sum(ws * f(xs))

    panels = 1
    prev = rule(panels)
    while True:
        panels *= 2
        cur = rule(panels)
        err = abs(cur - prev)
        if err <= max(atol, rtol * abs(cur)):
            return cur, err
        if panels >= max_panels:
            raise QuadratureFailure(err)
        prev = cur


def simpson_doubling(f, a, b, atol=1e-9, n0=16, nmax=2 ** 16):
    """Composite Simpson with node doubling until successive values agree.

    ``f`` maps a 1-D array of times to an array whose first axis is time.
    """
    n = n0
    prev = None
    while n <= nmax:
        x = np.linspace(a, b, n + 1)
        y = np.asarray(f(x))
        w = np.ones(n + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= (b - a) / (3.0 * n)
        val = np.tensordot(w, y, axes=(0, 0))
        if prev is not None:
            err = float(np.max(np.abs(val - prev)))
            if err <= atol:
                return val
        prev = val
        n *= 2
    raise QuadratureFailure(err)


def _clusters(w, tol):
    # split sorted values into runs whose neighbours differ by <= tol
    cuts = np.nonzero(np.diff(w) > tol)[0] + 1
    return np.split(np.arange(len(w)), cuts)


def joint_eigenbasis(ops, tol=1e-9):
    """Common eigenbasis of commuting Hermitian matrices by successive refinement.

    Returns ``(U, vals)`` with ``vals[i, k] = <u_i|ops[k]|u_i>`` and the
    columns of U grouped so equal value-vectors are contiguous.
    """
    mats = [as_matrix(a) for a in ops]
    d = mats[0].shape[0]
    blocks = [np.eye(d, dtype=complex)]
    for m in mats:
        scale = max(1.0, float(np.abs(m).max()))
        new = []
        for b in blocks:
            sub = b.conj().T @ m @ b
            sd = _eigh(0.5 * (sub + sub.conj().T))
            vecs = b @ sd.eigenvectors
            for idx in _clusters(sd.eigenvalues, tol * scale):
                new.append(vecs[:, idx])
        blocks = new
    u = np.concatenate(blocks, axis=1)
    vals = np.stack([np.real(np.einsum("ij,jk,ki->i", u.conj().T, m, u)) for m in mats], axis=1)
    return u, vals, [b.shape[1] for b in blocks]
