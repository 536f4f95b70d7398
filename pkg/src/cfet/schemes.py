"""CFET scheme registry and the stepping kernel.

A scheme is a coefficient matrix f[i][n]: the step

    v  <-  e^{Omega_1} e^{Omega_2} ... e^{Omega_s} v   (Omega_s applied first)

with stage exponents built from shared generator samples,
Omega_i = dt * sum_m g[i][m] A(t + x_m dt), where (x_m, g[i][m]) come from
:func:`cfet.quad.stage_weights`.  Stage 1 is the leftmost factor and is
therefore applied last; the constant-generator collapse test and the
driven two-level oracle pin this convention.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import quad


class SchemeError(ValueError):
    pass


def _num(x) -> float:
    return float(x)


@dataclass(frozen=True)
class CfetScheme:
    """Order-N CFET with s stages; f[i][n-1] weights the A_n Legendre mode."""

    name: str
    order: int
    stages: int
    f: tuple
    symmetric: bool

    def __post_init__(self):
        if self.stages != len(self.f):
            raise SchemeError("stage count does not match coefficient rows")

    @property
    def is_rational(self) -> bool:
        return all(
            isinstance(c, (int, Fraction)) for row in self.f for c in row
        )

    def row_sum(self) -> float:
        return sum(_num(row[0]) for row in self.f)

    def symmetry_defect(self) -> float:
        worst = 0.0
        for i, row in enumerate(self.f):
            mirror = self.f[self.stages - 1 - i]
            for n, c in enumerate(row, start=1):
                worst = max(worst, abs(_num(c) - (-1) ** (n + 1) * _num(mirror[n - 1])))
        return worst


def _sym_complete(head_rows, stages, name, order):
    """Build a full coefficient table from its leading rows via
    f_{s+1-i,n} = (-1)^{n+1} f_{i,n}."""
    head_rows = [tuple(r) for r in head_rows]
    rows = list(head_rows)
    if stages % 2:
        central = head_rows[-1]
        for n, c in enumerate(central, start=1):
            if n % 2 == 0 and c:
                raise SchemeError("central stage must have zero even-mode weights")
    for i in range(stages // 2 - 1, -1, -1):
        rows.append(
            tuple((-1) ** (n + 1) * c for n, c in enumerate(head_rows[i], start=1))
        )
    return CfetScheme(name=name, order=order, stages=stages, f=tuple(rows),
                      symmetric=True)


def _frac_rows(rows):
    return tuple(tuple(Fraction(c) for c in row) for row in rows)


def _cf6_4() -> CfetScheme:
    f11 = (
        0.5
        + (5400 - 600 * math.sqrt(6.0)) ** (1.0 / 3.0) / 60.0
        + ((9 + math.sqrt(6.0)) / 5.0) ** (1.0 / 3.0) / (2 * 3.0 ** (2.0 / 3.0))
    )
    f12 = f11 - (2.0 / 3.0) * f11 * f11
    f13 = 1.0 / (10.0 - 10.0 * f11)
    f21 = 0.5 - f11
    f22 = (1.0 - 4.0 * f11 + 2.0 * f11 * f11) / 3.0
    f23 = -f13
    return _sym_complete(
        [(f11, f12, f13, 0.0), (f21, f22, f23, 0.0)], 4, "CF6:4", 6
    )


def _cf6_5(name, f11, f12, f13, f21, f22, f23, f14=0.0, f24=0.0) -> CfetScheme:
    f31 = 1.0 - 2.0 * f21 - 2.0 * f11
    f33 = -2.0 * f23 - 2.0 * f13
    return _sym_complete(
        [
            (f11, f12, f13, f14),
            (f21, f22, f23, f24),
            (f31, 0.0, f33, 0.0),
        ],
        5, name, 6,
    )


def _cf6_6(name, f11, f12, f13, f21, f22, f23, f32, f14=0.0, f24=0.0, f34=0.0):
    f31 = 0.5 - f11 - f21
    f33 = -f13 - f23
    return _sym_complete(
        [
            (f11, f12, f13, f14),
            (f21, f22, f23, f24),
            (f31, f32, f33, f34),
        ],
        6, name, 6,
    )


def _cf8_11() -> CfetScheme:
    rows = [
        (0.169715531043933180094151, 0.152866146944615909929839,
         0.119167378745981369601216, 0.068619226448029559107538, 0.0),
        (0.379420807516005431504230, 0.148839980923180990943008,
         -0.115880829186628075021088, -0.188555246668412628269760, 0.0),
        (0.469459306644050573017994, -0.379844237839363505173921,
         0.022898814729462898505141, 0.571855043580130805495594, 0.0),
        (-0.448225927391070886302766, 0.362889857410989942809900,
         -0.022565582830528472333301, -0.544507517141613383517695, 0.0),
        (-0.293924473106317605373923, -0.026255628265819381983204,
         0.096761509131620390100068, 0.000018330145571671744069, 0.0),
        (0.447109510586798614120629, 0.0,
         -0.200762581179816221704073, 0.0, 0.0),
    ]
    return _sym_complete(rows, 11, "CF8:11", 8)


@functools.lru_cache(maxsize=None)
def _registry() -> dict:
    F = Fraction
    schemes = [
        CfetScheme("CF2:1", 2, 1, _frac_rows([(1, 0)]), symmetric=True),
        _sym_complete(_frac_rows([(F(1, 2), F(1, 3), 0)]), 2, "CF4:2", 4),
        _sym_complete(
            _frac_rows([(F(11, 40), F(20, 87), 0), (F(9, 20), 0, 0)]),
            3, "CF4:3", 4,
        ),
        _sym_complete(
            _frac_rows(
                [(F(11, 40), F(20, 87), F(7, 50)), (F(9, 20), 0, F(-7, 25))]
            ),
            3, "CF4:3Opt", 4,
        ),
        _cf6_4(),
        _cf6_5("CF6:5",
               0.16, 0.14587456942714338561, 0.11762370828143015682,
               0.38752405202531186588, 0.15089113704380764664,
               -0.12805075909013044594),
        _cf6_5("CF6:5b",
               0.2, 0.1746879190177786220, 0.12406375705333586606,
               0.34815492558797391479, 0.1068765450953683,
               -0.139021313323765096675),
        _cf6_5("CF6:5Imp",
               0.16, 0.14587456942714338561, 0.11762370828143015682,
               0.38752405202531186588, 0.15089113704380764664,
               -0.12805075909013044594,
               f14=0.074, f24=-0.212530296697694739551),
        _cf6_5("CF6:5Opt",
               0.1714, 0.15409059414309687213, 0.11947178242929061641,
               0.37496374319946236513, 0.13813675394387646682,
               -0.13090674649282935743,
               f14=0.07195, f24=-0.21123356253315514306),
        _cf6_6("CF6:6",
               0.16, 0.15101538937746543493, 0.13304616813239630479,
               -0.22738164742696330169, -0.087654259755115431662,
               0.069919836812656575583,
               f32=0.21035154512209824847),
        _cf6_6("CF6:6Opt",
               0.3952, 0.35629343479227292880, 0.27848030437681878641,
               -0.22432144875476807927, -0.19935407393749030416,
               -0.15625650102884866893,
               f32=0.1145,
               f14=0.1579, f24=-0.09512, f34=-0.16475168057141371958),
        _cf8_11(),
    ]
    return {s.name: s for s in schemes}


def scheme_lookup(name: str) -> CfetScheme:
    reg = _registry()
    if name not in reg:
        raise SchemeError(
            f"unknown scheme {name!r}; available: {', '.join(sorted(reg))}"
        )
    return reg[name]


def scheme_names() -> list:
    return sorted(_registry())


# ---------------------------------------------------------------------------
# scheme documents (structured text round-trip)


def _coeff_to_doc(c):
    if isinstance(c, int):
        c = Fraction(c)
    if isinstance(c, Fraction):
        return f"{c.numerator}/{c.denominator}"
    return c


def _coeff_from_doc(c):
    if isinstance(c, str):
        num, _, den = c.partition("/")
        return Fraction(int(num), int(den) if den else 1)
    if isinstance(c, int):
        return Fraction(c)
    return float(c)


def dump_scheme(scheme: CfetScheme) -> dict:
    return {
        "name": scheme.name,
        "order": scheme.order,
        "stages": scheme.stages,
        "symmetric": scheme.symmetric,
        "f": [[_coeff_to_doc(c) for c in row] for row in scheme.f],
    }


def load_scheme(document: dict) -> CfetScheme:
    try:
        scheme = CfetScheme(
            name=str(document["name"]),
            order=int(document["order"]),
            stages=int(document["stages"]),
            f=tuple(tuple(_coeff_from_doc(c) for c in row) for row in document["f"]),
            symmetric=bool(document["symmetric"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemeError(f"malformed scheme document: {exc}") from exc
    defect = abs(scheme.row_sum() - 1.0)
    if defect > 1e-12:
        raise SchemeError(f"first-mode row sum {scheme.row_sum()} != 1")
    if scheme.symmetric and scheme.symmetry_defect() > 1e-12:
        raise SchemeError("scheme marked symmetric but coefficients are not")
    return scheme


# ---------------------------------------------------------------------------
# generators and the stepping kernel


class Generator:
    """Time-dependent generator A(t) = -iH(t) of the linear ODE x' = A(t)x.

    Subclasses provide ``dim`` and either ``sample(t)`` (matrix snapshot:
    ndarray or scipy sparse) or ``apply(t, v)`` for matrix-free use.
    """

    dim: int
    antihermitian: bool = True

    def sample(self, t):
        return None

    def apply(self, t, v):
        snap = self.sample(t)
        if snap is None:
            raise NotImplementedError("generator provides neither sample nor apply")
        return snap @ v

    def spectral_bounds(self):
        """(lambda_min, lambda_max) of H = iA for Chebyshev backends."""
        raise NotImplementedError


class StageOperator:
    """Lazy weighted-sample exponent: matvec = dt * sum_m g_m A(t_m) v."""

    __slots__ = ("gen", "times", "coeffs", "dim", "antihermitian")

    def __init__(self, gen: Generator, times, coeffs):
        self.gen = gen
        self.times = times
        self.coeffs = coeffs
        self.dim = gen.dim
        self.antihermitian = gen.antihermitian

    def matvec(self, v):
        out = self.coeffs[0] * self.gen.apply(self.times[0], v)
        for c, t in zip(self.coeffs[1:], self.times[1:]):
            if c:
                out += c * self.gen.apply(t, v)
        return out


@functools.lru_cache(maxsize=None)
def _cached_stage_weights(scheme: CfetScheme) -> quad.StageWeights:
    return quad.stage_weights(scheme)


def stage_exponents(scheme: CfetScheme, gen: Generator, t: float, dt: float):
    """Stage exponents Omega_1..Omega_s, sampling A once per quadrature point.

    Returns matrices when the generator provides snapshots, lazy
    :class:`StageOperator` objects otherwise.
    """
    sw = _cached_stage_weights(scheme)
    times = [t + x * dt for x in sw.rule.points]
    samples = [gen.sample(tm) for tm in times]
    if all(s is not None for s in samples):
        out = []
        for row in sw.g:
            om = None
            for gm, sm in zip(row, samples):
                term = (dt * gm) * sm
                om = term if om is None else om + term
            out.append(om)
        return out
    return [
        StageOperator(gen, tuple(times), tuple(dt * gm for gm in row))
        for row in sw.g
    ]


def step(scheme: CfetScheme, gen: Generator, t, dt, v, backend):
    """One CFET step from t to t + dt."""
    out, _ = step_counted(scheme, gen, t, dt, v, backend)
    return out


def step_counted(scheme: CfetScheme, gen: Generator, t, dt, v, backend):
    """One CFET step; also returns the backend matvec count."""
    exponents = stage_exponents(scheme, gen, t, dt)
    matvecs = 0
    for i in range(len(exponents) - 1, -1, -1):
        try:
            v, n = backend.expv_counted(exponents[i], v)
        except Exception as exc:
            raise RuntimeError(f"backend failed at stage {i + 1}: {exc}") from exc
        matvecs += n
    return v, matvecs


_DENSE_GUARD = 4096


def step_matrix(scheme: CfetScheme, gen: Generator, t, dt, backend) -> np.ndarray:
    """Full one-step propagator matrix (columns = step on basis vectors)."""
    if gen.dim > _DENSE_GUARD:
        raise SchemeError(f"dimension {gen.dim} exceeds dense guard {_DENSE_GUARD}")
    exponents = stage_exponents(scheme, gen, t, dt)
    u = np.eye(gen.dim, dtype=complex)
    for i in range(len(exponents) - 1, -1, -1):
        u, _ = backend.expv_counted(exponents[i], u)
    return u
