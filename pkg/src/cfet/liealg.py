"""Exact free Lie algebra over generators A_1..A_G with a Hall basis.

Commutator trees are plain nested tuples: a leaf is the generator index
``n`` (an ``int``), an internal node is a pair ``(left, right)`` standing
for the bracket ``[left, right]``.  Two gradings coexist:

* the *Legendre* grading, where a leaf ``A_n`` carries weight ``n``
  (used to truncate series in the step size), and
* the *leaf-count* grading, where every leaf carries weight 1
  (the grading of the classical two-generator Hall table).

The Hall order itself (fewer brackets first, then generator index, then
recursive lexicographic comparison) is independent of the grading.
Coefficients are exact :class:`fractions.Fraction` unless a caller mixes
in floats, in which case arithmetic degrades gracefully to float.
"""

from __future__ import annotations

import functools
from fractions import Fraction


class LieAlgebraError(ValueError):
    pass


class DegreeOverflowError(LieAlgebraError):
    """A commutator exceeds the basis degree cap where that is not allowed."""


class BasisMismatchError(LieAlgebraError):
    """Operands built over different Hall bases."""


# ---------------------------------------------------------------------------
# commutator trees


def is_generator(tree) -> bool:
    return isinstance(tree, int)


@functools.lru_cache(maxsize=None)
def bracket_count(tree) -> int:
    if is_generator(tree):
        return 0
    return 1 + bracket_count(tree[0]) + bracket_count(tree[1])


@functools.lru_cache(maxsize=None)
def leaves(tree) -> tuple:
    if is_generator(tree):
        return (tree,)
    return leaves(tree[0]) + leaves(tree[1])


@functools.lru_cache(maxsize=None)
def legendre_degree(tree) -> int:
    """Sum of leaf indices: A_n carries weight n."""
    return sum(leaves(tree))


def leaf_count(tree) -> int:
    return len(leaves(tree))


def max_leaf(tree) -> int:
    return max(leaves(tree))


def tree_str(tree) -> str:
    if is_generator(tree):
        return f"A{tree}"
    return f"[{tree_str(tree[0])},{tree_str(tree[1])}]"


@functools.lru_cache(maxsize=None)
def hall_cmp(a, b) -> int:
    """Total order on commutator trees.

    Trees with fewer brackets come first; generators compare by index;
    equal-size brackets compare lexicographically (left, then right).
    """
    na, nb = bracket_count(a), bracket_count(b)
    if na != nb:
        return -1 if na < nb else 1
    if na == 0:
        return (a > b) - (a < b)
    c = hall_cmp(a[0], b[0])
    if c:
        return c
    return hall_cmp(a[1], b[1])


_hall_key = functools.cmp_to_key(hall_cmp)


@functools.lru_cache(maxsize=None)
def is_hall(tree) -> bool:
    """Membership test for the standard Hall set (grading-independent)."""
    if is_generator(tree):
        return tree >= 1
    x, w = tree
    if not (is_hall(x) and is_hall(w)):
        return False
    if hall_cmp(x, w) >= 0:
        return False
    if is_generator(w):
        return True
    # w = [y, z]: require y <= x
    return hall_cmp(w[0], x) <= 0


# ---------------------------------------------------------------------------
# rewriting to the Hall set


def _scaled(terms: dict, k) -> dict:
    return {t: k * c for t, c in terms.items()}


def _accumulate(acc: dict, terms: dict, k=1) -> None:
    for t, c in terms.items():
        v = acc.get(t, 0) + k * c
        if v:
            acc[t] = v
        elif t in acc:
            del acc[t]


@functools.lru_cache(maxsize=None)
def hall_bracket_pair(a, b) -> tuple:
    """[a, b] for Hall trees a, b, as ((tree, int_coeff), ...).

    Uses antisymmetry and the Jacobi identity
    [x,[y,z]] = [[x,y],z] + [y,[x,z]] to push the result back into the
    Hall set.  Exact integer coefficients.
    """
    c = hall_cmp(a, b)
    if c == 0:
        return ()
    if c > 0:
        return tuple((t, -k) for t, k in hall_bracket_pair(b, a))
    # a < b
    if is_hall((a, b)):
        return (((a, b), 1),)
    # b = (y, z) with a < y (otherwise (a, b) would be Hall)
    y, z = b
    acc: dict = {}
    for t, k in hall_bracket_pair(a, y):
        _accumulate(acc, dict(hall_bracket_pair(t, z)), k)
    for t, k in hall_bracket_pair(a, z):
        _accumulate(acc, dict(hall_bracket_pair(y, t)), k)
    return tuple(sorted(acc.items(), key=lambda kv: _hall_key(kv[0])))


def rewrite_tree(tree) -> dict:
    """Arbitrary commutator tree -> {hall_tree: int coefficient}."""
    if is_generator(tree):
        return {tree: 1}
    left = rewrite_tree(tree[0])
    right = rewrite_tree(tree[1])
    acc: dict = {}
    for t1, k1 in left.items():
        for t2, k2 in right.items():
            _accumulate(acc, dict(hall_bracket_pair(t1, t2)), k1 * k2)
    return acc


# ---------------------------------------------------------------------------
# Hall basis


class HallBasis:
    """All Hall elements over A_1..A_G with grading degree <= D.

    grading="legendre" weighs a leaf A_n with n, grading="leaves" with 1.
    """

    def __init__(self, generators: int, max_degree: int, grading: str = "legendre"):
        if generators < 1:
            raise LieAlgebraError("need at least one generator")
        if max_degree < 1:
            raise LieAlgebraError("max degree must be >= 1")
        if grading not in ("legendre", "leaves"):
            raise LieAlgebraError(f"unknown grading {grading!r}")
        self.generators = generators
        self.max_degree = max_degree
        self.grading = grading

        by_degree: dict[int, list] = {d: [] for d in range(1, max_degree + 1)}
        for n in range(1, generators + 1):
            w = n if grading == "legendre" else 1
            if w <= max_degree:
                by_degree[w].append(n)
        for d in range(2, max_degree + 1):
            found = []
            for d1 in range(1, d):
                for x in by_degree[d1]:
                    for w in by_degree[d - d1]:
                        if hall_cmp(x, w) < 0 and is_hall((x, w)):
                            found.append((x, w))
            by_degree[d].extend(sorted(found, key=_hall_key))
        self.by_degree = by_degree
        self.elements = sorted(
            (t for ts in by_degree.values() for t in ts), key=_hall_key
        )
        self._index = {t: i for i, t in enumerate(self.elements)}

    def degree(self, tree) -> int:
        if self.grading == "legendre":
            return legendre_degree(tree)
        return leaf_count(tree)

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, tree) -> bool:
        return tree in self._index

    def index(self, tree) -> int:
        return self._index[tree]

    def __eq__(self, other):
        return (
            isinstance(other, HallBasis)
            and self.generators == other.generators
            and self.max_degree == other.max_degree
            and self.grading == other.grading
        )

    def __hash__(self):
        return hash((self.generators, self.max_degree, self.grading))

    def __repr__(self):
        return (
            f"HallBasis(generators={self.generators}, "
            f"max_degree={self.max_degree}, grading={self.grading!r})"
        )

    def dump(self) -> str:
        """One element per line in bracket notation, for golden files."""
        return "\n".join(tree_str(t) for t in self.elements)


def hall_basis_build(generators: int, max_degree: int, grading: str = "legendre"):
    return HallBasis(generators, max_degree, grading)


# ---------------------------------------------------------------------------
# Lie elements


class LieElement:
    """Sparse rational (or float) combination of Hall basis elements."""

    __slots__ = ("basis", "terms", "truncated")

    def __init__(self, basis: HallBasis, terms: dict | None = None, truncated=False):
        self.basis = basis
        self.terms = {t: c for t, c in (terms or {}).items() if c}
        self.truncated = truncated

    @classmethod
    def generator(cls, basis: HallBasis, n: int) -> "LieElement":
        if not 1 <= n <= basis.generators:
            raise LieAlgebraError(f"generator A_{n} outside basis")
        return cls(basis, {n: Fraction(1)})

    def coefficient(self, tree):
        return self.terms.get(tree, Fraction(0))

    def _check(self, other: "LieElement"):
        if self.basis != other.basis:
            raise BasisMismatchError("operands over different bases")

    def __add__(self, other: "LieElement") -> "LieElement":
        self._check(other)
        acc = dict(self.terms)
        _accumulate(acc, other.terms)
        return LieElement(self.basis, acc, self.truncated or other.truncated)

    def __sub__(self, other: "LieElement") -> "LieElement":
        self._check(other)
        acc = dict(self.terms)
        _accumulate(acc, other.terms, -1)
        return LieElement(self.basis, acc, self.truncated or other.truncated)

    def __neg__(self) -> "LieElement":
        return LieElement(self.basis, _scaled(self.terms, -1), self.truncated)

    def __mul__(self, k) -> "LieElement":
        return LieElement(self.basis, _scaled(self.terms, k), self.truncated)

    __rmul__ = __mul__

    def __eq__(self, other):
        return (
            isinstance(other, LieElement)
            and self.basis == other.basis
            and self.terms == other.terms
        )

    def __bool__(self):
        return bool(self.terms)

    def bracket(self, other: "LieElement") -> "LieElement":
        return bracket(self, other, self.basis)

    def __repr__(self):
        if not self.terms:
            return "LieElement(0)"
        parts = [f"{c}*{tree_str(t)}" for t, c in sorted(
            self.terms.items(), key=lambda kv: _hall_key(kv[0]))]
        return "LieElement(" + " + ".join(parts) + ")"


def rewrite_to_hall(tree, basis: HallBasis) -> LieElement:
    """Express an arbitrary nested commutator in the Hall basis."""
    if basis.degree(tree) > basis.max_degree:
        raise DegreeOverflowError(
            f"degree {basis.degree(tree)} exceeds basis cap {basis.max_degree}"
        )
    if max_leaf(tree) > basis.generators:
        raise LieAlgebraError("leaf index outside basis generators")
    return LieElement(basis, {t: Fraction(k) for t, k in rewrite_tree(tree).items()})


def bracket(a: LieElement, b: LieElement, basis: HallBasis | None = None) -> LieElement:
    """Bilinear bracket of two LieElements.

    Terms whose degree exceeds the basis cap are dropped and the result
    is marked ``truncated``.
    """
    if basis is None:
        basis = a.basis
    if a.basis != basis or b.basis != basis:
        raise BasisMismatchError("operands over different bases")
    cap = basis.max_degree
    deg = basis.degree
    acc: dict = {}
    truncated = a.truncated or b.truncated
    for t1, c1 in a.terms.items():
        d1 = deg(t1)
        for t2, c2 in b.terms.items():
            if d1 + deg(t2) > cap:
                truncated = True
                continue
            c12 = c1 * c2
            for t, k in hall_bracket_pair(t1, t2):
                v = acc.get(t, 0) + k * c12
                if v:
                    acc[t] = v
                elif t in acc:
                    del acc[t]
    return LieElement(basis, acc, truncated)


def filter_relevant(basis: HallBasis, N: int) -> list:
    """Hall elements that generate order conditions for an N-th order scheme.

    Odd Legendre grading <= N-1 with every leaf index <= N/2.  (Elements of
    even grading drop out by time-reversal parity; higher-index generators
    are excluded from the scheme ansatz.)
    """
    if N % 2:
        raise LieAlgebraError("N must be even")
    if N - 1 > basis.max_degree:
        raise LieAlgebraError("N exceeds basis degree cap")
    if basis.grading != "legendre":
        raise LieAlgebraError("relevance filter requires the Legendre grading")
    out = []
    for t in basis.elements:
        d = legendre_degree(t)
        if d % 2 == 1 and d <= N - 1 and max_leaf(t) <= N // 2:
            out.append(t)
    return out
