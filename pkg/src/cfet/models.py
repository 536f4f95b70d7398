"""Physical systems used as benchmarks, with their closed-form oracles.

Four families: the periodically driven two-level system (exact propagator
known), the pulsed spin chain whose single-spin limit is the Rosen-Zener
model, the parametric oscillator (classical companion form for stability
charts, truncated Fock-space form for quantum runs), and a hydrogen atom
in an alternating electric field (m = 0 sector, dipole approximation).

Hydrogen uses the Rydberg-style Hamiltonian H = -grad^2 - 2/r with level
energies -1/n^2; dipole matrix elements are in Bohr radii.  (The radial
wave functions coincide with the Hartree-unit ones, only energies carry
the factor 2.)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse
from scipy.special import eval_genlaguerre

from .expm import DenseBackend
from .schemes import Generator, step_matrix


class ModelError(ValueError):
    pass


_MEMORY_GUARD = 1 << 24  # Hilbert dimension cap for spin chains
_SPARSE_CUTOFF = 14  # explicit assembly up to this many spins


# ---------------------------------------------------------------------------
# driven two-level system


@dataclass(frozen=True)
class TwoLevelParams:
    delta: float
    v: float
    omega: float

    @property
    def omega_r(self) -> float:
        """Resonance frequency sqrt((delta - omega)^2 + v^2)."""
        return math.hypot(self.delta - self.omega, self.v)


class TwoLevelGenerator(Generator):
    """A(t) = -iH(t), H = [[delta, v e^{-2i w t}], [v e^{2i w t}, -delta]]."""

    dim = 2

    def __init__(self, p: TwoLevelParams):
        self.p = p

    def sample(self, t):
        ph = np.exp(-2j * self.p.omega * t)
        h = np.array(
            [[self.p.delta, self.p.v * ph], [self.p.v * ph.conjugate(), -self.p.delta]]
        )
        return -1j * h

    def spectral_bounds(self):
        e = math.hypot(self.p.delta, self.p.v)
        return (-e, e)


def two_level_generator(p: TwoLevelParams) -> TwoLevelGenerator:
    return TwoLevelGenerator(p)


def two_level_exact(p: TwoLevelParams, t: float) -> np.ndarray:
    """Closed-form propagator U(t, 0) of the driven two-level system."""
    om = p.omega_r
    if om == 0:
        c, s = 1.0, 0.0
        dw_s = 0.0
        v_s = 0.0
    else:
        c = math.cos(om * t)
        s = math.sin(om * t)
        dw_s = (p.delta - p.omega) / om * s
        v_s = p.v / om * s
    ph = np.exp(-1j * p.omega * t)
    return np.array(
        [
            [ph * (c - 1j * dw_s), -1j * v_s * ph],
            [-1j * v_s * ph.conjugate(), ph.conjugate() * (c + 1j * dw_s)],
        ]
    )


def rosen_zener_pinf(delta: float, omega: float, v: float, tau: float) -> float:
    """Flip probability through one sech pulse: sin^2(pi v tau) / cosh^2(pi (delta-omega) tau)."""
    if tau <= 0:
        raise ModelError("pulse width tau must be positive")
    return math.sin(math.pi * v * tau) ** 2 / math.cosh(
        math.pi * (delta - omega) * tau
    ) ** 2


# ---------------------------------------------------------------------------
# parametric oscillator, classical and quantum


@dataclass(frozen=True)
class OscillatorParams:
    omega0: float
    xi: float
    omega_d: float
    n_fock: int = 50

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ModelError("omega0 must be positive")
        if self.n_fock < 2:
            raise ModelError("need at least two Fock states")

    def omega_sq(self, t: float) -> float:
        return self.omega0**2 + self.xi * math.cos(self.omega_d * t)


class MathieuGenerator(Generator):
    """Companion form of q'' + omega(t)^2 q = 0: state (q, q')."""

    dim = 2
    antihermitian = False

    def __init__(self, p: OscillatorParams):
        self.p = p

    def sample(self, t):
        return np.array([[0.0, 1.0], [-self.p.omega_sq(t), 0.0]], dtype=complex)


def mathieu_classical(p: OscillatorParams) -> MathieuGenerator:
    return MathieuGenerator(p)


@dataclass
class FloquetResult:
    multipliers: np.ndarray
    stable: bool
    det: complex


def floquet_stability(
    p: OscillatorParams, scheme, backend=None, steps: int = 128, tol: float = 1e-9
) -> FloquetResult:
    """Multipliers of the one-period propagator of the Mathieu equation.

    Stable iff all |lambda| <= 1 (+tol for round-off).  The determinant is
    returned as a diagnostic; the generator is traceless, so det = 1 up to
    integration error.
    """
    if backend is None:
        backend = DenseBackend()
    gen = mathieu_classical(p)
    period = 2 * math.pi / p.omega_d
    dt = period / steps
    u = np.eye(2, dtype=complex)
    for k in range(steps):
        u = step_matrix(scheme, gen, k * dt, dt, backend) @ u
    lam = np.linalg.eigvals(u)
    return FloquetResult(
        multipliers=lam,
        stable=bool(np.all(np.abs(lam) <= 1 + tol)),
        det=complex(np.linalg.det(u)),
    )


class QuantumOscillatorGenerator(Generator):
    """Fock-space parametric oscillator, pentadiagonal in |n>.

    H(t) = (w0/4) [ (w(t)^2/w0^2 - 1)(b+^2 + b^2) + (w(t)^2/w0^2 + 1)(2 b+b + 1) ].
    """

    def __init__(self, p: OscillatorParams):
        self.p = p
        self.dim = p.n_fock
        n = np.arange(p.n_fock)
        self._num = 2 * n + 1.0
        # <n+2| b+^2 |n> = sqrt((n+1)(n+2))
        self._sq = np.sqrt((n[:-2] + 1) * (n[:-2] + 2))
        self._rows = np.arange(p.n_fock - 2)

    def sample(self, t):
        r = self.p.omega_sq(t) / self.p.omega0**2
        pref = self.p.omega0 / 4
        diag = pref * (r + 1) * self._num
        off = pref * (r - 1) * self._sq
        h = sparse.diags(
            [off, diag, off], offsets=[-2, 0, 2], format="csr", dtype=complex
        )
        return -1j * h

    def spectral_bounds(self):
        # worst-case over the drive cycle, padded
        cands = []
        for r in (
            (self.p.omega0**2 + abs(self.p.xi)) / self.p.omega0**2,
            (self.p.omega0**2 - abs(self.p.xi)) / self.p.omega0**2,
        ):
            pref = self.p.omega0 / 4
            diag = pref * (r + 1) * self._num
            off = pref * (r - 1) * self._sq
            h = np.diag(diag) + np.diag(off, 2) + np.diag(off, -2)
            w = np.linalg.eigvalsh(h)
            cands += [w[0], w[-1]]
        lo, hi = min(cands), max(cands)
        pad = 0.05 * (hi - lo)
        return (lo - pad, hi + pad)


def quantum_oscillator(p: OscillatorParams) -> QuantumOscillatorGenerator:
    return QuantumOscillatorGenerator(p)


def coherent_state(qbar: float, pbar: float, p: OscillatorParams) -> np.ndarray:
    """Truncated coherent state with <q> = qbar, <p> = pbar, renormalized.

    Truncation weight loss above 1e-10 triggers a warning (the tail of the
    Poissonian occupation is cut by the Fock-space cap).
    """
    alpha = math.sqrt(p.omega0 / 2) * qbar + 1j * pbar / math.sqrt(2 * p.omega0)
    n = np.arange(p.n_fock)
    # log-domain to survive large n
    with np.errstate(divide="ignore"):
        logmag = n * np.log(max(abs(alpha), 1e-300)) - 0.5 * np.cumsum(
            np.concatenate(([0.0], np.log(np.arange(1, p.n_fock))))
        )
    c = np.exp(logmag - abs(alpha) ** 2 / 2) * np.exp(1j * n * np.angle(alpha))
    loss = 1.0 - float(np.sum(np.abs(c) ** 2))
    if loss > 1e-10:
        warnings.warn(
            f"coherent state loses weight {loss:.2e} to truncation", stacklevel=2
        )
    return c / np.linalg.norm(c)


def truncation_leakage(state, frac: float = 0.1) -> float:
    """Occupation of the top ``frac`` of levels (instability indicator)."""
    state = np.asarray(state)
    k = max(1, int(len(state) * frac))
    return float(np.sum(np.abs(state[-k:]) ** 2))


def check_truncation(state, threshold: float = 1e-6) -> float:
    leak = truncation_leakage(state)
    if leak > threshold:
        warnings.warn(
            f"top Fock levels occupied at {leak:.2e}: truncation unreliable",
            stacklevel=2,
        )
    return leak


# ---------------------------------------------------------------------------
# pulsed spin chain


@dataclass(frozen=True)
class SpinChainParams:
    s: int
    delta: float
    j: float
    v: float
    tau: float
    omega: float
    centers: tuple = (0.0,)

    def __post_init__(self):
        if self.s < 1:
            raise ModelError("need at least one spin")
        if (1 << self.s) > _MEMORY_GUARD:
            raise ModelError(f"2^{self.s} states exceed the memory guard")
        if self.tau <= 0:
            raise ModelError("pulse width tau must be positive")

    def pulse(self, t: float) -> complex:
        """V(t) = sum_k V e^{-2i omega (t - t_k)} / cosh((t - t_k)/tau)."""
        out = 0j
        for tk in self.centers:
            u = t - tk
            out += self.v * np.exp(-2j * self.omega * u) / math.cosh(u / self.tau)
        return out


def _popcount_weights(s: int) -> np.ndarray:
    """sigma_z sum eigenvalues 2*popcount(i) - s per basis state (bit = up)."""
    idx = np.arange(1 << s, dtype=np.uint32)
    pop = np.zeros(1 << s, dtype=np.int64)
    for b in range(s):
        pop += (idx >> b) & 1
    return (2 * pop - s).astype(float)


class SpinChainGenerator(Generator):
    """XY-coupled spin chain in a circularly polarized pulsed field.

    Explicit sparse matrices up to 14 spins; above that only the
    matrix-free ``apply`` path is available (``sample`` returns None and
    the CFET stage exponents stay lazy).
    """

    def __init__(self, p: SpinChainParams):
        self.p = p
        self.dim = 1 << p.s
        self._z = _popcount_weights(p.s)
        idx = np.arange(self.dim, dtype=np.int64)
        self._idx = idx
        self._explicit = p.s <= _SPARSE_CUTOFF
        if self._explicit:
            self._h0 = self._assemble_static()
            self._raise = self._assemble_raise()
        else:
            # neighbor-exchange index tables for the matrix-free path
            self._flip_masks = [1 << b for b in range(p.s)]
            self._pair_masks = [(1 << b) | (1 << (b + 1)) for b in range(p.s - 1)]

    def _assemble_static(self):
        p = self.p
        idx = self._idx
        rows = [idx]
        cols = [idx]
        data = [p.delta * self._z.astype(complex)]
        for b in range(p.s - 1):
            mask = (1 << b) | (1 << (b + 1))
            bits = (idx >> b) & 3
            src = idx[(bits == 1) | (bits == 2)]  # exactly one of the pair up
            # sigma_x sigma_x + sigma_y sigma_y = 2 (s+ s- + s- s+)
            rows.append(src ^ mask)
            cols.append(src)
            data.append(np.full(len(src), 2 * p.j, dtype=complex))
        return sparse.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.dim, self.dim),
        )

    def _assemble_raise(self):
        # sum_s sigma_+^(s): couples <...up...|H|...down...> with V(t)
        idx = self._idx
        rows, cols = [], []
        for b in range(self.p.s):
            src = idx[(idx >> b) & 1 == 0]
            rows.append(src | (1 << b))
            cols.append(src)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        return sparse.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(self.dim, self.dim)
        )

    def sample(self, t):
        if not self._explicit:
            return None
        v = self.p.pulse(t)
        h = self._h0 + v * self._raise + np.conj(v) * self._raise.conj().T
        return -1j * h

    def apply(self, t, vec):
        if self._explicit:
            return self.sample(t) @ vec
        p = self.p
        vec = np.asarray(vec, dtype=complex)
        zw = self._z if vec.ndim == 1 else self._z[:, None]
        out = p.delta * zw * vec
        idx = self._idx
        vt = p.pulse(t)
        for b in range(p.s):
            flipped = vec[idx ^ (1 << b)]
            bit_up = ((idx >> b) & 1).astype(bool)
            amp = np.where(bit_up, vt, np.conj(vt))
            out += (amp if vec.ndim == 1 else amp[:, None]) * flipped
        for b in range(p.s - 1):
            mask = self._pair_masks[b]
            bits = (idx >> b) & 3
            hop = ((bits == 1) | (bits == 2)).astype(float)
            out += 2 * p.j * (hop if vec.ndim == 1 else hop[:, None]) * vec[idx ^ mask]
        return -1j * out

    def spectral_bounds(self):
        p = self.p
        e = abs(p.delta) * p.s + abs(p.v) * p.s + 4 * abs(p.j) * max(p.s - 1, 0)
        return (-e, e)


def spin_chain(p: SpinChainParams) -> SpinChainGenerator:
    return SpinChainGenerator(p)


def all_down_state(s: int) -> np.ndarray:
    v = np.zeros(1 << s, dtype=complex)
    v[0] = 1.0
    return v


def sigma_z_bar(state) -> float:
    """(1/S) sum_s <sigma_z^(s)> for a chain state of dimension 2^S."""
    state = np.asarray(state)
    s = int(round(math.log2(len(state))))
    if 1 << s != len(state):
        raise ModelError("state dimension is not a power of two")
    w = _popcount_weights(s)
    return float(np.real(np.sum(w * np.abs(state) ** 2)) / s)


# ---------------------------------------------------------------------------
# hydrogen in an AC field (m = 0)


@dataclass(frozen=True)
class HydrogenParams:
    n_max: int
    e0: float = 0.0
    omega_f: float = 0.0
    a: float = 1e-6
    b: float = 1e-6
    t0: float = 5000.0
    levels: tuple = ()  # optional explicit (n, l) basis restriction

    def __post_init__(self):
        if not 1 <= self.n_max <= 60:
            raise ModelError("n_max must be in 1..60")

    def envelope(self, t: float) -> float:
        return (1 + self.a) / (1 + self.a * math.exp(-self.b * (t - self.t0) ** 2))

    def field(self, t: float) -> float:
        return self.e0 * self.envelope(t) * math.cos(self.omega_f * t)


def _radial_integral(n: int, l: int, n2: int, l2: int, nodes: int) -> float:
    """int_0^inf R_nl R_n2l2 r^3 dr by generalized Gauss-Laguerre.

    The integrand is polynomial * exp(-alpha r) with alpha = 1/n + 1/n2,
    so the substitution r = x/alpha makes the rule exact once the node
    count covers the polynomial degree n + n2 + 1.
    """
    alpha = 1.0 / n + 1.0 / n2
    x, w = np.polynomial.laguerre.laggauss(nodes)
    r = x / alpha

    def radial_poly(nn, ll, rr):
        # R_nl(r) = pref * (2r/n)^l * L^{2l+1}_{n-l-1}(2r/n) (the e^{-r/n}
        # factor is absorbed into the Laguerre weight)
        lg = 0.5 * (math.lgamma(nn - ll) - math.lgamma(nn + ll + 1))
        pref = (2.0 / nn**2) * math.exp(lg)
        u = 2.0 * rr / nn
        return pref * u**ll * eval_genlaguerre(nn - ll - 1, 2 * ll + 1, u)

    g = radial_poly(n, l, r) * radial_poly(n2, l2, r) * r**3
    return float(np.sum(w * g) / alpha)


def dipole_element(n: int, l: int, n2: int, l2: int) -> float:
    """<n2 l2, m=0| z |n l, m=0> in Bohr radii; zero unless |l - l2| = 1.

    The radial part is integrated with a Gauss-Laguerre rule sized to be
    exact, then re-checked with doubled nodes; disagreement above 1e-10
    raises (quadrature non-convergence).
    """
    for nn, ll in ((n, l), (n2, l2)):
        if not (nn >= 1 and 0 <= ll < nn):
            raise ModelError(f"invalid quantum numbers n={nn}, l={ll}")
    if abs(l - l2) != 1:
        return 0.0
    lo = min(l, l2)
    angular = (lo + 1) / math.sqrt((2 * lo + 1) * (2 * lo + 3))
    nodes = n + n2 + 2
    val = _radial_integral(n, l, n2, l2, nodes)
    check = _radial_integral(n, l, n2, l2, 2 * nodes)
    if abs(val - check) > 1e-10 * max(1.0, abs(val)):
        raise ModelError(
            f"radial quadrature not converged for ({n},{l})-({n2},{l2}): "
            f"{val!r} vs {check!r}"
        )
    return angular * val


def hydrogen_basis(p: HydrogenParams) -> list:
    if p.levels:
        return list(p.levels)
    return [(n, l) for n in range(1, p.n_max + 1) for l in range(n)]


class HydrogenGenerator(Generator):
    """m = 0 hydrogen block: diagonal -1/n^2 plus E_z(t) times the dipole matrix."""

    def __init__(self, p: HydrogenParams):
        self.p = p
        self.basis = hydrogen_basis(p)
        self.dim = len(self.basis)
        self._diag = np.array([-1.0 / n**2 for n, _ in self.basis])
        d = np.zeros((self.dim, self.dim))
        for i, (n, l) in enumerate(self.basis):
            for k in range(i + 1, self.dim):
                n2, l2 = self.basis[k]
                if abs(l - l2) == 1:
                    d[i, k] = d[k, i] = dipole_element(n, l, n2, l2)
        self.dipole = d

    def sample(self, t):
        h = np.diag(self._diag) + self.p.field(t) * self.dipole
        return -1j * h

    def spectral_bounds(self):
        reach = abs(self.p.e0) * (1 + self.p.a) * float(np.abs(self.dipole).sum(1).max())
        return (float(self._diag.min()) - reach, float(self._diag.max()) + reach)


def hydrogen(p: HydrogenParams) -> HydrogenGenerator:
    return HydrogenGenerator(p)
