"""Shifted Legendre polynomials and Gauss-Legendre rules on [0, 1].

Also converts scheme coefficients f_{i,n} into stage sampling weights
g_{i,m}, so that the stage exponents become plain weighted sums of
generator snapshots (no Legendre modes are ever materialized).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


def legendre_eval(n: int, x):
    """Shifted Legendre polynomial P_n(x) on [0, 1].

    Exact for Fraction input, float otherwise.  Three-term recurrence:
    (k+1) P_{k+1} = (2k+1)(2x-1) P_k - k P_{k-1}.
    """
    if n < 0:
        raise ValueError("degree must be >= 0")
    one = Fraction(1) if isinstance(x, Fraction) else 1.0
    p_prev, p = one, one * (2 * x - 1)
    if n == 0:
        return p_prev
    for k in range(1, n):
        div = Fraction(k + 1) if isinstance(x, Fraction) else (k + 1)
        p_prev, p = p, ((2 * k + 1) * (2 * x - 1) * p - k * p_prev) / div
    return p


def _legendre_with_derivative(n: int, x: float):
    p_prev, p = 1.0, 2 * x - 1
    if n == 0:
        return p_prev, 0.0
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * (2 * x - 1) * p - k * p_prev) / (k + 1)
    # shifted-interval derivative identity:
    # P_n'(x) = 2n (P_{n-1}(x) - (1-2x)... use d/dx of standard at s=2x-1
    s = 2 * x - 1
    if abs(s) == 1.0:
        dp_std = s ** (n + 1) * n * (n + 1) / 2
    else:
        dp_std = n * (s * p - p_prev) / (s * s - 1)
    return p, 2 * dp_std


@dataclass(frozen=True)
class QuadratureRule:
    points: tuple
    weights: tuple

    @property
    def M(self) -> int:
        return len(self.points)


_SQRT3 = math.sqrt(3.0)
_SQRT30 = math.sqrt(30.0)
_CLOSED = {
    1: ((0.5,), (1.0,)),
    2: ((0.5 - _SQRT3 / 6, 0.5 + _SQRT3 / 6), (0.5, 0.5)),
    3: (
        (0.5 - math.sqrt(3.0 / 20.0), 0.5, 0.5 + math.sqrt(3.0 / 20.0)),
        (5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0),
    ),
    4: (
        (
            0.5 - math.sqrt((3.0 + 2.0 * math.sqrt(6.0 / 5.0)) / 28.0),
            0.5 - math.sqrt((3.0 - 2.0 * math.sqrt(6.0 / 5.0)) / 28.0),
            0.5 + math.sqrt((3.0 - 2.0 * math.sqrt(6.0 / 5.0)) / 28.0),
            0.5 + math.sqrt((3.0 + 2.0 * math.sqrt(6.0 / 5.0)) / 28.0),
        ),
        (
            (18.0 - _SQRT30) / 72.0,
            (18.0 + _SQRT30) / 72.0,
            (18.0 + _SQRT30) / 72.0,
            (18.0 - _SQRT30) / 72.0,
        ),
    ),
}


def gauss_rule(M: int) -> QuadratureRule:
    """M-point Gauss-Legendre rule on [0, 1]; exact to degree 2M-1.

    Closed-form points for M <= 4; larger rules by Newton iteration on
    P_M starting from Chebyshev guesses.
    """
    if M < 1:
        raise ValueError("need at least one point")
    if M in _CLOSED:
        pts, wts = _CLOSED[M]
        return QuadratureRule(pts, wts)
    points, weights = [], []
    for k in range(1, M + 1):
        x = 0.5 + 0.5 * math.cos(math.pi * (4 * k - 1) / (4 * M + 2))
        for _ in range(100):
            p, dp = _legendre_with_derivative(M, x)
            step = p / dp
            x -= step
            if abs(step) < 1e-16:
                break
        _, dp = _legendre_with_derivative(M, x)
        points.append(x)
        weights.append(1.0 / (x * (1 - x) * dp * dp))
    order = sorted(range(M), key=points.__getitem__)
    return QuadratureRule(
        tuple(points[i] for i in order), tuple(weights[i] for i in order)
    )


@dataclass(frozen=True)
class StageWeights:
    """Sampling matrix g[i][m]: stage exponent i uses sum_m g[i][m] A(x_m dt)."""

    g: tuple
    rule: QuadratureRule

    @property
    def stages(self) -> int:
        return len(self.g)

    @property
    def M(self) -> int:
        return self.rule.M


def stage_weights(scheme) -> StageWeights:
    """Convert f_{i,n} to g_{i,m} = w_m sum_n (2n-1) P_{n-1}(x_m) f_{i,n}.

    The rule size M is the highest coefficient column actually used by
    the scheme, which keeps 2M-1 >= N-1 for all registered schemes.
    """
    ncols = 0
    for row in scheme.f:
        for n, c in enumerate(row, start=1):
            if c and n > ncols:
                ncols = n
    if ncols == 0:
        raise ValueError("scheme has no nonzero coefficients")
    rule = gauss_rule(ncols)
    pvals = [
        [legendre_eval(n - 1, x) for n in range(1, ncols + 1)] for x in rule.points
    ]
    g = tuple(
        tuple(
            rule.weights[m]
            * sum(
                (2 * n - 1) * pvals[m][n - 1] * float(row[n - 1])
                for n in range(1, min(len(row), ncols) + 1)
            )
            for m in range(rule.M)
        )
        for row in scheme.f
    )
    return StageWeights(g, rule)
