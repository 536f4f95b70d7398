"""Symbolic Magnus expansion, BCH products, and scheme order conditions.

Everything here works with exact rational arithmetic when the inputs are
rational, and degrades to floats otherwise.  The central object is a Lie
series: a sparse map from Hall-basis commutators to piecewise-polynomial
time coefficients.  One recursion engine serves two purposes:

* ``magnus_expand`` feeds it the Legendre expansion of A(t) on a single
  unit interval and integrates term by term;
* ``bch_compose`` feeds it a stepwise-constant A(t) (one constant piece
  per exponential factor), which turns the same recursion into the BCH
  formula for a product of exponentials.
"""

from __future__ import annotations

import functools
import math
from fractions import Fraction

import numpy as np

from .liealg import (
    HallBasis,
    LieAlgebraError,
    LieElement,
    hall_bracket_pair,
    legendre_degree,
    max_leaf,
)
from .schemes import CfetScheme


# ---------------------------------------------------------------------------
# polynomials with exact (or float) coefficients


class Poly:
    """Dense univariate polynomial on a local coordinate u in [0, 1]."""

    __slots__ = ("c",)

    def __init__(self, coeffs=()):
        c = list(coeffs)
        while c and not c[-1]:
            c.pop()
        self.c = tuple(c)

    def __bool__(self):
        return bool(self.c)

    def __add__(self, other: "Poly") -> "Poly":
        a, b = self.c, other.c
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, v in enumerate(b):
            out[i] = out[i] + v
        return Poly(out)

    def __mul__(self, other):
        if isinstance(other, Poly):
            if not self.c or not other.c:
                return Poly()
            out = [0] * (len(self.c) + len(other.c) - 1)
            for i, a in enumerate(self.c):
                for j, b in enumerate(other.c):
                    out[i + j] += a * b
            return Poly(out)
        return Poly([a * other for a in self.c])

    __rmul__ = __mul__

    def integrate(self) -> "Poly":
        """Antiderivative vanishing at u = 0."""
        return Poly([0] + [a / _as_frac(k + 1, a) for k, a in enumerate(self.c)])

    def __call__(self, x):
        acc = 0
        for a in reversed(self.c):
            acc = acc * x + a
        return acc

    def __eq__(self, other):
        return isinstance(other, Poly) and self.c == other.c

    def __repr__(self):
        return f"Poly({list(self.c)})"


def _as_frac(k, like):
    # keep Fractions exact; avoid Fraction/float mixing surprises
    return k if isinstance(like, float) else Fraction(k)


@functools.lru_cache(maxsize=None)
def shifted_legendre_poly(n: int) -> Poly:
    """Shifted Legendre polynomial P_n on [0, 1], exact coefficients."""
    if n == 0:
        return Poly([Fraction(1)])
    if n == 1:
        return Poly([Fraction(-1), Fraction(2)])
    two_x_minus_1 = Poly([Fraction(-1), Fraction(2)])
    p_prev, p = shifted_legendre_poly(n - 2), shifted_legendre_poly(n - 1)
    k = n - 1
    return (two_x_minus_1 * p) * Fraction(2 * k + 1, k + 1) + p_prev * Fraction(-k, k + 1)


class PW:
    """Piecewise polynomial over consecutive unit intervals."""

    __slots__ = ("pieces",)

    def __init__(self, pieces):
        self.pieces = tuple(pieces)

    def __add__(self, other: "PW") -> "PW":
        return PW(a + b for a, b in zip(self.pieces, other.pieces))

    def __mul__(self, other):
        if isinstance(other, PW):
            return PW(a * b for a, b in zip(self.pieces, other.pieces))
        return PW(a * other for a in self.pieces)

    __rmul__ = __mul__

    def integrate(self) -> "PW":
        """Cumulative integral from the start of the first piece."""
        out = []
        const = 0
        for p in self.pieces:
            anti = p.integrate()
            out.append(anti + Poly([const]))
            const = const + anti(1)
        return PW(out)

    def end(self):
        return self.pieces[-1](1)

    def __bool__(self):
        return any(self.pieces)

    def __repr__(self):
        return f"PW({list(self.pieces)})"


# ---------------------------------------------------------------------------
# Lie series engine

# series = dict: hall tree -> PW


def _series_add(acc: dict, other: dict, scale=1) -> None:
    for t, pw in other.items():
        if t in acc:
            acc[t] = acc[t] + scale * pw
        else:
            acc[t] = scale * pw


def _series_bracket(s1: dict, s2: dict, basis: HallBasis) -> dict:
    cap = basis.max_degree
    deg = basis.degree
    out: dict = {}
    for t1, p1 in s1.items():
        d1 = deg(t1)
        for t2, p2 in s2.items():
            if d1 + deg(t2) > cap:
                continue
            structure = hall_bracket_pair(t1, t2)
            if not structure:
                continue
            p12 = p1 * p2
            for t, k in structure:
                pw = k * p12
                if t in out:
                    out[t] = out[t] + pw
                else:
                    out[t] = pw
    return out


def _omega_terms(a_series: dict, basis: HallBasis, leaf_cap: int) -> list:
    """Magnus terms Omega_n (n = number of A factors) as Lie series.

    Returns a list indexed 1..leaf_cap; entry n maps Hall trees to
    cumulative-integral piecewise polynomials.
    """
    omdot = {1: a_series}
    om = {1: {t: pw.integrate() for t, pw in a_series.items()}}
    ttab: dict = {}

    def tnest(m: int, j: int) -> dict:
        # sum over n_1+...+n_m+k = j of [Om_{n_1},[...,[Om_{n_m}, Omdot_k]...]]
        if m == 0:
            return omdot[j]
        key = (m, j)
        if key not in ttab:
            acc: dict = {}
            for a in range(1, j - m + 1):
                _series_add(acc, _series_bracket(om[a], tnest(m - 1, j - a), basis))
            ttab[key] = acc
        return ttab[key]

    for n in range(2, leaf_cap + 1):
        acc: dict = {}
        for m in range(1, n):
            _series_add(acc, tnest(m, n), -Fraction(1, math.factorial(m + 1)))
        omdot[n] = acc
        om[n] = {t: pw.integrate() for t, pw in acc.items()}
    return [None] + [om[n] for n in range(1, leaf_cap + 1)]


class LieSeries:
    """Sparse map Hall element -> piecewise-polynomial time coefficient."""

    def __init__(self, basis: HallBasis, terms: dict):
        self.basis = basis
        self.terms = terms

    def coefficient(self, tree):
        pw = self.terms.get(tree)
        return pw.end() if pw is not None else Fraction(0)

    def at_end(self) -> LieElement:
        return LieElement(
            self.basis, {t: pw.end() for t, pw in self.terms.items()}
        )


def _magnus_series(generators: int, cap: int, leaf_cap: int) -> LieSeries:
    basis = HallBasis(generators, cap)
    a_series = {
        n: PW([shifted_legendre_poly(n - 1)]) for n in range(1, generators + 1)
    }
    parts = _omega_terms(a_series, basis, leaf_cap)
    total: dict = {}
    for part in parts[1:]:
        _series_add(total, part)
    return LieSeries(basis, {t: pw for t, pw in total.items() if pw})


@functools.lru_cache(maxsize=None)
def magnus_expand(N: int) -> LieSeries:
    """Magnus series Omega(dt) over generators A_1..A_{N/2+1} to order dt^{N+1}.

    Substitutes the Legendre expansion of A(t) into the Omega_n recursion
    and integrates the polynomial coefficients exactly; every coefficient
    is an exact rational.
    """
    if N % 2 or not 2 <= N <= 8:
        raise LieAlgebraError("N must be even with 2 <= N <= 8")
    return _magnus_series(N // 2 + 1, N + 1, N + 1)


def bch_compose(exponents, N: int) -> LieElement:
    """log(e^{X_1} ... e^{X_s}) keeping terms of grading <= N.

    Implemented by running the Magnus recursion on a stepwise-constant
    generator: A(t) = X_s on the earliest unit interval, ..., X_1 on the
    latest, so that the exact propagator equals the given product.
    """
    exponents = list(exponents)
    if not exponents:
        raise LieAlgebraError("need at least one exponent")
    basis = exponents[0].basis
    for x in exponents[1:]:
        if x.basis != basis:
            raise LieAlgebraError("exponents over different bases")
    if len(exponents) == 1:
        return exponents[0]
    cap = min(N, basis.max_degree)
    s = len(exponents)
    zero = Poly()
    trees = set()
    for x in exponents:
        trees.update(x.terms)
    a_series = {}
    for t in trees:
        pieces = []
        for j in range(s):
            c = exponents[s - 1 - j].terms.get(t, 0)
            pieces.append(Poly([c]) if c else zero)
        a_series[t] = PW(pieces)
    # each exponent term has grading >= 1, so at most `cap` factors matter
    parts = _omega_terms(a_series, basis, cap)
    total: dict = {}
    for part in parts[1:]:
        _series_add(total, part)
    return LieElement(basis, {t: pw.end() for t, pw in total.items()})


# ---------------------------------------------------------------------------
# order conditions and error terms


def _stage_exponents(scheme: CfetScheme, basis: HallBasis) -> list:
    exps = []
    for row in scheme.f:
        terms = {}
        for n, c in enumerate(row, start=1):
            if c and n <= basis.generators:
                terms[n] = c
        exps.append(LieElement(basis, terms))
    return exps


def _tilde_minus_omega(scheme: CfetScheme, generators: int, cap: int) -> dict:
    """Coefficients of log(product) - Omega on a G-generator basis to `cap`."""
    basis = HallBasis(generators, cap)
    tilde = bch_compose(_stage_exponents(scheme, basis), cap)
    omega = _magnus_series(generators, cap, cap).at_end()
    diff = tilde - omega
    return basis, diff.terms


def order_residuals(scheme: CfetScheme, N: int) -> dict:
    """Residuals p_k - c_k of the order-N conditions.

    Keys are all Hall elements of odd Legendre grading <= N-1 over
    generators A_1..A_{N/2+1} (the scheme ansatz generators); an N-th
    order scheme has every residual equal to zero.  Exact rationals when
    the scheme coefficients are rational.
    """
    if N % 2 or N < 2:
        raise LieAlgebraError("N must be even and >= 2")
    cap = max(N - 1, 1)
    basis, diff = _tilde_minus_omega(scheme, N // 2 + 1, cap)
    out = {}
    for t in basis.elements:
        if legendre_degree(t) % 2 == 1:
            out[t] = diff.get(t, Fraction(0))
    return out


def chi_error_term(scheme: CfetScheme, N: int, residual_tol: float = 1e-9) -> dict:
    """Leading error term chi = log(product) - Omega at grading N+1.

    The scheme must satisfy the order-N conditions (exactly for rational
    coefficients, within `residual_tol` otherwise).
    """
    residuals = order_residuals(scheme, N)
    worst = max((abs(v) for v in residuals.values()), default=0)
    if scheme.is_rational:
        if worst != 0:
            raise LieAlgebraError(f"scheme fails order conditions: residual {worst}")
    elif worst > residual_tol:
        raise LieAlgebraError(f"scheme fails order conditions: residual {worst}")
    basis, diff = _tilde_minus_omega(scheme, N // 2 + 1, N + 1)
    return {
        t: diff.get(t, Fraction(0))
        for t in basis.elements
        if legendre_degree(t) == N + 1
    }


# ---------------------------------------------------------------------------
# explicit solution families


def solve_4th_family(f21, f23=0) -> CfetScheme:
    """One-parameter family of 4th-order, 3-exponential schemes.

    f_{1,1} = (1-f21)/2 and f_{1,2} = 1/(3(1+f21)); the optional f23
    extends the middle exponent by an A_3 term with f_{1,3} = -f23/2.
    """
    f21 = _exactify(f21)
    f23 = _exactify(f23)
    if f21 == -1:
        raise ZeroDivisionError("f21 = -1 makes f_{1,2} singular")
    one = Fraction(1)
    f11 = (one - f21) / 2
    f12 = one / (3 * (1 + f21))
    f13 = -f23 / 2
    rows = (
        (f11, f12, f13),
        (f21, 0 * f21, f23),
        (f11, -f12, f13),
    )
    return CfetScheme(
        name=f"CF4:3[f21={f21}]", order=4, stages=3, f=rows, symmetric=True
    )


def _exactify(x):
    if isinstance(x, float):
        return x
    return Fraction(x)


_QUINTIC = (
    # coefficients of y^0..y^5, each a polynomial in x (low order first)
    (-2, 30, -192, 680, -1440, 1815, -1250, 360),
    (18, -232, 1230, -3440, 5345, -4350, 1440),
    (-60, 650, -2740, 5655, -5710, 2250),
    (90, -800, 2535, -3450, 1710),
    (-60, 425, -920, 630),
    (15, -80, 90),
)


def _quintic_coeffs(x):
    return [sum(c * x**k for k, c in enumerate(row)) for row in _QUINTIC]


def solve_6th_family(f11) -> list:
    """All real solutions of the 6th-order, 5-exponential order conditions.

    For each real root f21 of the degree-5 polynomial p(f11, .) the
    remaining coefficients follow in closed form.  Roots are found from
    the companion matrix and polished by Newton iteration to <= 1e-14
    residual (relative to the polynomial scale).
    """
    x = _exactify(f11)
    coeffs = _quintic_coeffs(x)
    cf = [float(c) for c in coeffs]
    scale = max(abs(c) for c in cf)
    if scale == 0:
        raise LieAlgebraError("degenerate f11: polynomial vanishes identically")
    roots = np.roots(list(reversed(cf)))
    out = []
    seen = []
    for r in roots:
        if abs(r.imag) > 1e-8 * max(1.0, abs(r)):
            continue
        y = float(r.real)
        # Newton polish on the exact-coefficient polynomial
        for _ in range(60):
            p = sum(float(c) * y**k for k, c in enumerate(coeffs))
            dp = sum(k * float(c) * y ** (k - 1) for k, c in enumerate(coeffs) if k)
            if dp == 0:
                break
            step = p / dp
            y -= step
            if abs(step) < 1e-17 * max(1.0, abs(y)):
                break
        if any(abs(y - z) < 1e-10 for z in seen):
            continue
        seen.append(y)
        try:
            cand = _complete_6th(x, y)
            worst = max(abs(float(v)) for v in order_residuals(cand, 6).values())
            if worst > 1e-11:
                # near a denominator zero the closed form amplifies the
                # root error (double roots only polish to ~sqrt(eps))
                raise ZeroDivisionError("completion failed residual check")
            out.append(cand)
        except ZeroDivisionError:
            # The closed-form completion divides by quantities that the
            # polynomial reduction multiplied through, so a root on such
            # a locus may still carry genuine solutions (or be spurious).
            # Decide by solving the order conditions directly.
            out.extend(_complete_6th_degenerate(float(x), y))
    deduped = []
    deduped_vecs = []
    for s in out:
        vec = np.array([s.f[0][1], s.f[1][0], s.f[1][1], s.f[0][2], s.f[1][2]])
        if any(np.max(np.abs(vec - v)) < 1e-8 for v in deduped_vecs):
            continue
        deduped.append(s)
        deduped_vecs.append(vec)
    if not deduped:
        raise ZeroDivisionError(
            f"f11={f11}: every real root hits a completion denominator zero"
        )
    return deduped


def _complete_6th(f11, f21) -> CfetScheme:
    if isinstance(f11, Fraction):
        f11 = float(f11)
    d1 = (f11 + f21 - 1) * (f11 + f21) * (2 * f11 + f21 - 1)
    if abs(d1) < 1e-13 or abs(1 - f11) < 1e-13:
        raise ZeroDivisionError(
            f"f11={f11}, f21={f21} hits a denominator zero of the completion formulas"
        )
    f22 = (1 + 5 * f11 * (f11 - 1)) / (30 * d1)
    f12 = (1 - 6 * f22 + 12 * f11 * f22 + 6 * f21 * f22) / (6 * (1 - f11))
    d2 = 30 * (
        f12 * (2 * f11 - 1) * (2 * f11 + f21 - 1)
        + f22 * (1 + 8 * f11**2 + 2 * (f21 - 2) * f21 + (8 * f21 - 7) * f11)
    )
    if abs(d2) < 1e-13:
        raise ZeroDivisionError(
            f"f11={f11}, f21={f21} hits a denominator zero of the completion formulas"
        )
    f13 = ((2 * f11 - 1) * (2 * f11 + f21 - 1) - 3 * f22) / d2
    f23 = (f11 + 3 * f12 + 4 * f11 * f21 + 2 * (f21 - 1) * f21 + 6 * f22 - 1) / d2
    f31 = 1 - 2 * f11 - 2 * f21
    f33 = -2 * f13 - 2 * f23
    rows = (
        (f11, f12, f13),
        (f21, f22, f23),
        (f31, 0.0, f33),
        (f21, -f22, f23),
        (f11, -f12, f13),
    )
    return CfetScheme(
        name=f"CF6:5[f11={f11}]", order=6, stages=5, f=rows, symmetric=True
    )


def _complete_6th_degenerate(f11: float, f21_seed: float) -> list:
    """Completions for a root (f11, f21) on a denominator-zero locus.

    The two linear conditions fix f31 and tie f33 to f13 + f23; f21 and
    the four remaining coefficients are recovered by least-squares on the
    full set of order-condition residuals from a deterministic seed grid
    (f21 is refined too, because a double root of the polynomial only
    polishes to ~sqrt(eps)).  Distinct converged points with residual
    <= 1e-13 and f21 within 1e-3 of the seed are returned; an empty list
    means the polynomial root was spurious (introduced when the reduction
    cleared its denominators).
    """
    from scipy.optimize import least_squares

    def rows_of(u):
        f21, f12, f22, f13, f23 = (float(v) for v in u)
        f31 = 1 - 2 * f11 - 2 * f21
        f33 = -2 * (f13 + f23)
        return (
            (f11, f12, f13),
            (f21, f22, f23),
            (f31, 0.0, f33),
            (f21, -f22, f23),
            (f11, -f12, f13),
        )

    def resid(u):
        probe = CfetScheme(
            name="_probe", order=6, stages=5, f=rows_of(u), symmetric=True
        )
        return [float(v) for v in order_residuals(probe, 6).values()]

    rng = np.random.default_rng(0)
    found = []
    for _ in range(12):
        seed = np.concatenate(([f21_seed], rng.uniform(-0.5, 0.5, 4)))
        res = least_squares(resid, seed, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if max(abs(v) for v in res.fun) > 1e-13:
            continue
        if abs(res.x[0] - f21_seed) > 1e-3:
            continue
        if any(np.max(np.abs(res.x - u)) < 1e-8 for u in found):
            continue
        found.append(res.x)
    return [
        CfetScheme(
            name=f"CF6:5[f11={f11}]", order=6, stages=5, f=rows_of(u), symmetric=True
        )
        for u in found
    ]


# ---------------------------------------------------------------------------
# time-ordered cross-check recursion (desk scale, n <= 3)


def zrec_expand(n: int) -> dict:
    """Integrands Z_n(t_1..t_n) as {label tree: Fraction}.

    Leaves are the integer time labels 1..n.  Kept as a small cross-check
    of the main recursion; the permutation sets are enumerated explicitly
    and n > 3 is rejected.
    """
    if not 1 <= n <= 3:
        raise LieAlgebraError("zrec_expand supports 1 <= n <= 3 only")
    return _zrec(tuple(range(1, n + 1)))


def _zrec(labels: tuple) -> dict:
    import itertools

    n = len(labels)
    if n == 1:
        return {labels[0]: Fraction(1)}
    first, rest = labels[0], labels[1:]
    total: dict = {}
    for m in range(1, n):
        pref = Fraction((-1) ** (m + 1), math.factorial(m + 1))
        for sizes in _compositions(n, m + 1):
            blocks = (sizes[0] - 1,) + sizes[1:]
            for perm in _ordered_perms(rest, blocks):
                args = (first,) + perm
                # split args into the Z factors
                pos, factors = 0, []
                for sz in sizes:
                    factors.append(_zrec(args[pos : pos + sz]))
                    pos += sz
                term = factors[0]
                for f in factors[1:]:
                    term = _tree_bracket(term, f)
                for t, c in term.items():
                    v = total.get(t, Fraction(0)) + pref * c
                    if v:
                        total[t] = v
                    elif t in total:
                        del total[t]
    return total


def _compositions(total: int, parts: int):
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _ordered_perms(items: tuple, block_sizes: tuple):
    """Permutations of `items` increasing within each consecutive block."""
    import itertools

    for perm in itertools.permutations(items):
        pos, ok = 0, True
        for sz in block_sizes:
            block = perm[pos : pos + sz]
            if any(block[i] > block[i + 1] for i in range(len(block) - 1)):
                ok = False
                break
            pos += sz
        if ok:
            yield perm


def _tree_bracket(s1: dict, s2: dict) -> dict:
    out: dict = {}
    for t1, c1 in s1.items():
        for t2, c2 in s2.items():
            t = (t1, t2)
            v = out.get(t, Fraction(0)) + c1 * c2
            if v:
                out[t] = v
            elif t in out:
                del out[t]
    return out
