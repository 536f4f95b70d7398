"""Backends for the action of a matrix exponential on a vector.

Every backend exposes ``expv_counted(exponent, v) -> (result, nmatvecs)``
where the exponent is either an explicit matrix (ndarray or scipy sparse)
or a lazy :class:`~cfet.schemes.StageOperator`, and ``v`` may be a vector
or a matrix of columns.  All target exponents in this package are
anti-hermitian, Omega = -iH with H hermitian; the iterative backends work
on H and evaluate exp(-iH).

Counting convention: the iterative backends report one matvec per
application of the operator; the direct (dense, SU(2)) backends report
one "application" per exponential so that step-level effort identities
stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
from scipy.special import jv


class ExpmError(RuntimeError):
    pass


class SpectrumError(ExpmError):
    """Chebyshev recurrence diverged: true spectrum outside given bounds."""


class BoundInapplicableError(ExpmError):
    """krylov_error_bound requested outside its validity region 2*rho <= K."""


_DENSE_GUARD = 4096


def _operator(exponent):
    """Normalize an exponent to (matvec, dim, antihermitian)."""
    if isinstance(exponent, np.ndarray):
        dim = exponent.shape[0]
        ah = np.allclose(exponent, -exponent.conj().T, atol=1e-12)
        return (lambda v: exponent @ v), dim, ah
    if sparse.issparse(exponent):
        dim = exponent.shape[0]
        diff = exponent + exponent.conj().T
        ah = abs(diff).max() < 1e-12 if diff.nnz else True
        return (lambda v: exponent @ v), dim, ah
    # StageOperator or anything with the same duck type
    return exponent.matvec, exponent.dim, exponent.antihermitian


def _materialize(exponent) -> np.ndarray:
    if isinstance(exponent, np.ndarray):
        return exponent
    if sparse.issparse(exponent):
        return exponent.toarray()
    mv, dim, _ = _operator(exponent)
    return np.asarray(mv(np.eye(dim, dtype=complex)))


# ---------------------------------------------------------------------------
# dense / closed-form


def dense_expm(a) -> np.ndarray:
    """exp(a) for an explicit matrix.

    Anti-hermitian input goes through a hermitian eigendecomposition of
    H = i a (exactly unitary result up to round-off); everything else
    falls back to scipy's scaling-and-squaring.
    """
    a = _materialize(a)
    if a.shape[0] != a.shape[1]:
        raise ExpmError("exponent must be square")
    if a.shape[0] > _DENSE_GUARD:
        raise ExpmError(f"dimension {a.shape[0]} exceeds dense guard {_DENSE_GUARD}")
    if np.allclose(a, -a.conj().T, atol=1e-12):
        w, vecs = np.linalg.eigh(1j * a)
        return (vecs * np.exp(-1j * w)) @ vecs.conj().T
    return scipy.linalg.expm(a)


def su2_exp(phi: float, n) -> np.ndarray:
    """exp(i (phi/2) n.sigma) = cos(phi/2) I + i sin(phi/2) n.sigma."""
    n = np.asarray(n, dtype=float)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ExpmError("n must be a unit 3-vector")
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    nx, ny, nz = n
    return np.array(
        [
            [c + 1j * s * nz, 1j * s * (nx - 1j * ny)],
            [1j * s * (nx + 1j * ny), c - 1j * s * nz],
        ]
    )


def _exp2x2(a: np.ndarray) -> np.ndarray:
    # general closed form via a = a0 I + vec.sigma, theta^2 = vec.vec
    a0 = (a[0, 0] + a[1, 1]) / 2
    vx = (a[0, 1] + a[1, 0]) / 2
    vy = (a[1, 0] - a[0, 1]) / 2j
    vz = (a[0, 0] - a[1, 1]) / 2
    theta = np.sqrt(vx * vx + vy * vy + vz * vz + 0j)
    if abs(theta) < 1e-30:
        ch, shn = 1.0, 1.0
    else:
        ch, shn = np.cosh(theta), np.sinh(theta) / theta
    return np.exp(a0) * np.array(
        [[ch + shn * vz, shn * (vx - 1j * vy)], [shn * (vx + 1j * vy), ch - shn * vz]]
    )


class DenseBackend:
    """Direct exponentiation; reference backend for everything else."""

    def expv_counted(self, exponent, v):
        return dense_expm(exponent) @ v, 1

    def __repr__(self):
        return "DenseBackend()"


class SU2Backend:
    """Closed-form 2x2 exponential (two-level and Mathieu workhorse)."""

    def expv_counted(self, exponent, v):
        a = _materialize(exponent)
        if a.shape != (2, 2):
            raise ExpmError("SU2 backend requires 2x2 exponents")
        return _exp2x2(a) @ v, 1

    def __repr__(self):
        return "SU2Backend()"


# ---------------------------------------------------------------------------
# Krylov / Lanczos


@dataclass
class KrylovDiagnostics:
    subspace_used: int
    ortho_residual: float
    happy_breakdown: bool
    matvecs: int


def _lanczos_expv(apply_h, v, tau: float, K: int):
    """exp(-i tau H) v by Lanczos with full reorthogonalization.

    Returns (result, diagnostics).  The three-term recurrence assumes H
    hermitian; a vanishing off-diagonal beta is the happy breakdown, at
    which point the subspace is invariant and the result exact.
    """
    if K < 2:
        raise ExpmError("Krylov subspace size must be >= 2")
    v = np.asarray(v, dtype=complex)
    beta0 = np.linalg.norm(v)
    if beta0 == 0:
        return v.copy(), KrylovDiagnostics(0, 0.0, True, 0)
    dim = v.shape[0]
    kmax = min(K, dim)
    q = np.empty((kmax, dim), dtype=complex)
    q[0] = v / beta0
    alphas, betas = [], []
    happy = False
    nmv = 0
    scale = 0.0
    for j in range(kmax):
        w = apply_h(q[j])
        nmv += 1
        a = np.vdot(q[j], w).real
        alphas.append(a)
        w = w - a * q[j]
        if j:
            w = w - betas[-1] * q[j - 1]
        # full reorthogonalization (ghost-eigenvalue insurance; cheap at
        # the K <= ~30 sizes used here)
        w = w - q[: j + 1].T @ (q[: j + 1].conj() @ w)
        b = np.linalg.norm(w)
        scale = max(scale, abs(a), b)
        if j + 1 == kmax:
            break
        if b <= 1e-14 * max(scale, 1.0):
            happy = True
            break
        betas.append(b)
        q[j + 1] = w / b
    used = len(alphas)
    q = q[:used]
    wvals, wvecs = scipy.linalg.eigh_tridiagonal(alphas, betas[: used - 1])
    small = wvecs @ (np.exp(-1j * tau * wvals) * wvecs[0])
    out = beta0 * (q.T @ small)
    # the projected propagator is unitary on the subspace: pin the norm
    nrm = np.linalg.norm(out)
    if nrm:
        out *= beta0 / nrm
    gram = q.conj() @ q.T
    ortho = float(np.abs(gram - np.eye(used)).max())
    return out, KrylovDiagnostics(used, ortho, happy, nmv)


def krylov_expv(apply_h, v, tau: float, K: int):
    """exp(-i tau H) v for a hermitian matvec ``apply_h``."""
    out, _ = _lanczos_expv(apply_h, v, tau, K)
    return out


def krylov_error_bound(rho: float, K: int) -> float:
    """Relative error indicator exp(-rho^2/K) (e rho / K)^K.

    Valid for 2*rho <= K; rho is a quarter of the spectral spread of
    tau*H.  The unknown constant prefactor is omitted, so only ratios
    and trends are meaningful.
    """
    if rho < 0:
        raise ExpmError("rho must be >= 0")
    if rho == 0:
        return 0.0
    if 2 * rho > K:
        raise BoundInapplicableError(f"bound needs 2*rho <= K (rho={rho}, K={K})")
    return math.exp(-rho * rho / K) * (math.e * rho / K) ** K


class KrylovBackend:
    """Lanczos approximation of exp(Omega) v for anti-hermitian Omega."""

    def __init__(self, K: int):
        if K < 2:
            raise ExpmError("Krylov subspace size must be >= 2")
        self.K = K

    def expv_counted(self, exponent, v):
        mv, dim, ah = _operator(exponent)
        if not ah:
            raise ExpmError("Krylov backend requires an anti-hermitian exponent")
        apply_h = lambda w: 1j * mv(w)  # H = i Omega, exp(Omega) = exp(-iH)
        v = np.asarray(v, dtype=complex)
        if v.ndim == 1:
            out, diag = _lanczos_expv(apply_h, v, 1.0, self.K)
            return out, diag.matvecs
        cols, total = [], 0
        for k in range(v.shape[1]):
            out, diag = _lanczos_expv(apply_h, v[:, k], 1.0, self.K)
            cols.append(out)
            total += diag.matvecs
        return np.stack(cols, axis=1), total

    def __repr__(self):
        return f"KrylovBackend(K={self.K})"


# ---------------------------------------------------------------------------
# Chebyshev / Taylor series


def _cheb_terms(r: float, terms) -> int:
    if terms is not None:
        if terms < 1:
            raise ExpmError("need at least one Chebyshev term")
        return int(terms)
    k = int(r) + 1
    while abs(jv(k, r)) > 1e-17 and k < 100000:
        k += 1
    return max(k + 5, 4)


def chebyshev_expv(apply_h, v, tau: float, lam_min: float, lam_max: float,
                   terms=None):
    """exp(-i tau H) v via a Chebyshev series with Bessel coefficients.

    Requires the true spectrum of H inside [lam_min, lam_max]; violations
    make the recurrence vectors grow and are reported as
    :class:`SpectrumError` instead of silently returning garbage.
    """
    if not lam_min < lam_max:
        raise ExpmError("need lam_min < lam_max")
    v = np.asarray(v, dtype=complex)
    c = (lam_max + lam_min) / 2
    r = (lam_max - lam_min) / 2 * abs(tau)
    if r == 0:
        return np.exp(-1j * tau * c) * v
    sgn = 1.0 if tau >= 0 else -1.0
    # X = (H - c)/half has spectrum in [-1, 1] when the bounds hold
    half = (lam_max - lam_min) / 2

    def apply_x(w):
        return (apply_h(w) - c * w) / half

    nterms = _cheb_terms(r, terms)
    vnorm = np.linalg.norm(v)
    t_prev = v
    t_cur = apply_x(v)
    acc = jv(0, r) * t_prev + 2 * (-1j * sgn) * jv(1, r) * t_cur
    nmv = 1
    for k in range(2, nterms):
        t_next = 2 * apply_x(t_cur) - t_prev
        nmv += 1
        t_prev, t_cur = t_cur, t_next
        if np.linalg.norm(t_cur) > 1e3 * max(vnorm, 1e-300):
            raise SpectrumError(
                "Chebyshev recurrence diverging: spectrum outside "
                f"[{lam_min}, {lam_max}]"
            )
        acc = acc + 2 * (-1j * sgn) ** k * jv(k, r) * t_cur
    return np.exp(-1j * tau * c) * acc, nmv


class ChebyshevBackend:
    """Chebyshev series for exp(Omega) with caller-supplied bounds on H = i Omega."""

    def __init__(self, lam_min: float, lam_max: float, terms=None):
        if not lam_min < lam_max:
            raise ExpmError("need lam_min < lam_max")
        self.lam_min = lam_min
        self.lam_max = lam_max
        self.terms = terms

    def expv_counted(self, exponent, v):
        mv, _, ah = _operator(exponent)
        if not ah:
            raise ExpmError("Chebyshev backend requires an anti-hermitian exponent")
        apply_h = lambda w: 1j * mv(w)
        out, nmv = chebyshev_expv(
            apply_h, v, 1.0, self.lam_min, self.lam_max, self.terms
        )
        return out, nmv

    def __repr__(self):
        return f"ChebyshevBackend({self.lam_min}, {self.lam_max})"


class TaylorBackend:
    """Plain truncated Taylor series; kept for the saturation comparison."""

    def __init__(self, terms: int):
        if terms < 1:
            raise ExpmError("need at least one Taylor term")
        self.terms = terms

    def expv_counted(self, exponent, v):
        mv, _, _ = _operator(exponent)
        v = np.asarray(v, dtype=complex)
        acc = v.copy()
        term = v
        for k in range(1, self.terms + 1):
            term = mv(term) / k
            acc = acc + term
        return acc, self.terms

    def __repr__(self):
        return f"TaylorBackend(terms={self.terms})"
