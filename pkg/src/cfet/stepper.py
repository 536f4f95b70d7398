"""Trajectory driver and error analytics.

Fixed and adaptive time stepping on top of the scheme/backend machinery,
plus the small error-model toolbox: error-constant estimation from two
runs, the effective error constant s*c^(1/N), order-crossover thresholds,
the normalized Frobenius propagator error, and interaction-picture
wrapping of a generator with a constant diagonal part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .schemes import Generator, SchemeError, step_counted


class StepperError(RuntimeError):
    pass


@dataclass(frozen=True)
class StepPlan:
    """Time span with either a fixed step or an adaptive target.

    Fixed plans should divide the span into an integer number of steps; a
    non-dividing dt is allowed but produces a shorter, flagged final step.
    Adaptive plans extrapolate the step size from an error-constant
    estimate once per macro-interval.
    """

    t0: float
    T: float
    dt: float | None = None
    target: float | None = None
    record_stride: int = 1
    macro_steps: int = 32
    safety: float = 0.8

    def __post_init__(self):
        if self.T <= self.t0:
            raise StepperError("need T > t0")
        if (self.dt is None) == (self.target is None):
            raise StepperError("exactly one of dt / target must be set")
        if self.dt is not None and self.dt <= 0:
            raise StepperError("dt must be positive")
        if self.target is not None and self.target <= 0:
            raise StepperError("target error must be positive")
        if self.record_stride < 1:
            raise StepperError("record stride must be >= 1")


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray
    matvecs: np.ndarray  # cumulative, aligned with times
    partial_final: bool = False
    dts: np.ndarray | None = None  # step sizes actually taken (adaptive)
    diagnostics: list = field(default_factory=list)

    @property
    def final_state(self):
        return self.states[-1]

    @property
    def total_matvecs(self) -> int:
        return int(self.matvecs[-1])


def _fixed_steps(t0: float, T: float, dt: float):
    span = T - t0
    n = int(round(span / dt))
    if n >= 1 and abs(n * dt - span) <= 8 * np.finfo(float).eps * max(abs(T), 1.0):
        return [dt] * n, False
    n = int(math.floor(span / dt))
    rest = span - n * dt
    steps = [dt] * n
    if rest > 8 * np.finfo(float).eps * max(abs(T), 1.0):
        steps.append(rest)
        return steps, True
    return steps, False


def propagate(gen: Generator, scheme, backend, plan: StepPlan, v0) -> TrajectoryRecord:
    """Drive v0 from plan.t0 to plan.T; returns the recorded trajectory."""
    v = np.asarray(v0, dtype=complex)
    if v.shape[0] != gen.dim:
        raise StepperError(f"state dimension {v.shape[0]} != generator {gen.dim}")
    if plan.dt is not None:
        dts, partial = _fixed_steps(plan.t0, plan.T, plan.dt)
    else:
        dts, partial = _adaptive_steps(gen, scheme, backend, plan, v)

    # step start times: nominal multiples of dt for fixed plans (keeps the
    # arithmetic reproducible), cumulative sums otherwise; the last sample
    # always lands exactly on T
    if plan.dt is not None:
        starts = [plan.t0 + k * plan.dt for k in range(len(dts))]
    else:
        starts = list(plan.t0 + np.concatenate(([0.0], np.cumsum(dts[:-1]))))
    ends = starts[1:] + [plan.T]

    times = [plan.t0]
    states = [v.copy()]
    counts = [0]
    total = 0
    for i, dt in enumerate(dts):
        try:
            v, n = step_counted(scheme, gen, starts[i], dt, v, backend)
        except (RuntimeError, SchemeError) as exc:
            raise StepperError(f"step {i} (t={starts[i]!r}) failed: {exc}") from exc
        total += n
        if (i + 1) % plan.record_stride == 0 or i + 1 == len(dts):
            times.append(ends[i])
            states.append(v.copy())
            counts.append(total)
    return TrajectoryRecord(
        times=np.array(times),
        states=np.array(states),
        matvecs=np.array(counts),
        partial_final=partial,
        dts=np.array(dts),
    )


def _adaptive_steps(gen, scheme, backend, plan: StepPlan, v0):
    """Step-size list for an adaptive plan (macro-interval extrapolation).

    Every macro-interval the local error constant is re-estimated from a
    coarse/fine pair over the next few steps and the step extrapolated
    from eps = c*T*dt^N, damped by the safety factor.
    """
    N = scheme.order
    span = plan.T - plan.t0
    dt = span / (4 * plan.macro_steps)  # conservative opener
    t = plan.t0
    v = np.asarray(v0, dtype=complex)
    out = []
    while t < plan.T - 1e-12 * span:
        probe = min(4 * dt, plan.T - t)
        est = estimate_error_constant(
            gen, scheme, backend, (t, t + probe), probe / 2, probe / 4, v
        )
        if est.reliable and est.c > 0:
            dt_new = plan.safety * (plan.target / (est.c * span)) ** (1.0 / N)
            dt = min(max(dt_new, 1e-6 * span), span / 4)
        for _ in range(plan.macro_steps):
            if t >= plan.T - 1e-12 * span:
                break
            h = min(dt, plan.T - t)
            v, _ = step_counted(scheme, gen, t, h, v, backend)
            out.append(h)
            t += h
    partial = bool(out) and out[-1] < 0.999 * dt
    return out, partial


@dataclass
class ErrorEstimate:
    c: float
    reliable: bool

    def __float__(self):
        return self.c


def estimate_error_constant(
    gen, scheme, backend, span, dt1: float, dt2: float, v0
) -> ErrorEstimate:
    """Error constant c from two runs: max||x1 - x2|| = c*T*|dt1^N - dt2^N|.

    A difference at the round-off floor makes the estimate unreliable
    (flagged, not raised).  A dt1/dt2 ratio around (2..3)^(1/N) balances
    the two runs; callers are free to pick anything with dt1 != dt2.
    """
    if dt1 == dt2:
        raise StepperError("need dt1 != dt2")
    t0, T = span
    N = scheme.order
    r1 = propagate(gen, scheme, backend, StepPlan(t0, T, dt=dt1), v0)
    r2 = propagate(gen, scheme, backend, StepPlan(t0, T, dt=dt2), v0)
    diff = float(np.linalg.norm(r1.final_state - r2.final_state))
    floor = 1e-13 * max(1.0, float(np.linalg.norm(np.asarray(v0))))
    c = diff / ((T - t0) * abs(dt1**N - dt2**N))
    return ErrorEstimate(c=c, reliable=diff > floor)


def effective_error_constant(s: int, c: float, N: int) -> float:
    """Stage-weighted figure of merit s * c^(1/N)."""
    if c < 0:
        raise StepperError("error constant must be >= 0")
    return s * c ** (1.0 / N)


def empirical_effective_constant(s: int, dt: float, eps: float, T: float, N: int):
    """Effective constant from a measured max error: (s/dt) * (eps/T)^(1/N)."""
    return (s / dt) * (eps / T) ** (1.0 / N)


def crossover_threshold(N1: int, c1bar: float, N2: int, c2bar: float) -> float:
    """eps/T below which the higher-order scheme wins: (c1/c2)^(N1*N2/(N2-N1))."""
    if not N1 < N2:
        raise StepperError("need N1 < N2")
    if c1bar <= 0 or c2bar <= 0:
        raise StepperError("effective constants must be positive")
    return (c1bar / c2bar) ** (N1 * N2 / (N2 - N1))


def frobenius_error(u, v) -> float:
    """Normalized Frobenius distance sqrt((1/L) sum |U_ij - V_ij|^2)."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape or u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise StepperError("need two square matrices of equal dimension")
    return float(np.sqrt(np.sum(np.abs(u - v) ** 2) / u.shape[0]))


class InteractionPictureGenerator(Generator):
    """B^I(t) for a split A(t) = D + B(t) with constant diagonal D.

    The rotation x^I = e^{-tD} x conjugates the off-diagonal part:
    B^I_mn = e^{(D_nn - D_mm) t} B_mn, so diagonal entries and the
    sparsity pattern survive.  ``to_lab``/``from_lab`` convert states.
    """

    def __init__(self, gen: Generator, d):
        d = np.asarray(d)
        if d.ndim == 2:
            if np.any(d != np.diag(np.diag(d))):
                raise StepperError("interaction picture needs a diagonal D")
            d = np.diag(d)
        if d.shape != (gen.dim,):
            raise StepperError("diagonal length must match the generator")
        self.base = gen
        self.d = d.astype(complex)
        self.dim = gen.dim
        self.antihermitian = gen.antihermitian

    def _phases(self, t):
        return np.exp(t * self.d)

    def sample(self, t):
        snap = self.base.sample(t)
        if snap is None:
            return None
        b = np.asarray(snap, dtype=complex) - np.diag(self.d)
        p = self._phases(t)
        # e^{-tD} B e^{tD}: row m picks e^{-t d_m}, column n e^{t d_n}
        return (1 / p)[:, None] * b * p[None, :]

    def apply(self, t, v):
        p = self._phases(t)
        pin = p[:, None] if np.ndim(v) == 2 else p
        w = pin * np.asarray(v, dtype=complex)
        out = self.base.apply(t, w) - (self.d[:, None] if np.ndim(v) == 2 else self.d) * w
        return (1 / pin) * out

    def to_lab(self, t, x_ip):
        p = self._phases(t)
        return (p[:, None] if np.ndim(x_ip) == 2 else p) * x_ip

    def from_lab(self, t, x):
        p = self._phases(t)
        return np.asarray(x) / (p[:, None] if np.ndim(x) == 2 else p)


def interaction_picture(gen: Generator, d) -> InteractionPictureGenerator:
    return InteractionPictureGenerator(gen, d)
