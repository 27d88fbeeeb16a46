"""Expansive matrices, digit sets, symbolic encoding and quadrature for self-affine measures.

The measure ``mu`` is the equal-weight invariant measure of the IFS
``phi_b(x) = R^{-1}(x + b)``.  Points of its support are encoded by digit
sequences ``w`` through ``h(w) = sum_i R^{-i} b_{w_i}``; finite words give
exact rational points and seeded streams give Monte Carlo samples.

Coordinates of words, anchors and quadrature nodes are exact rationals.
Conversion to double happens only when a coordinate feeds a float function.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np

from . import _rational as rat
from .errors import (
    BudgetExceeded,
    NonFinite,
    NotExpansive,
    ShiftPastEnd,
    Singular,
    SingularShift,
    ValidationError,
)

EIGEN_MARGIN = 1e-9
DEFAULT_NODE_BUDGET = 2**20
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class ExpansionMatrix:
    """A validated expansive integer matrix R."""

    entries: tuple[tuple[int, ...], ...]
    moduli: tuple[float, ...] = field(compare=False, default=())

    @property
    def dim(self) -> int:
        return len(self.entries)

    @cached_property
    def rational(self) -> rat.Matrix:
        return rat.as_matrix(self.entries)

    @cached_property
    def transpose(self) -> rat.Matrix:
        return rat.transpose(self.rational)

    @cached_property
    def inverse(self) -> rat.Matrix:
        return rat.inverse(self.rational)

    @cached_property
    def det(self) -> int:
        return int(rat.det(self.rational))

    @property
    def is_symmetric(self) -> bool:
        return self.rational == self.transpose

    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)

    def __str__(self) -> str:
        return str([list(r) for r in self.entries])


def validate_expansive(matrix) -> ExpansionMatrix:
    """Check that ``matrix`` is square, integer, invertible and strictly expanding.

    Eigenvalue moduli come from the roots of the exact characteristic polynomial.
    """
    if isinstance(matrix, ExpansionMatrix):
        matrix = matrix.entries
    if np.ndim(matrix) == 0:
        matrix = [[matrix]]
    rows = [list(r) for r in matrix]
    d = len(rows)
    if d == 0 or any(len(r) != d for r in rows):
        raise ValidationError(f"expected a square matrix, got {rows!r}")
    entries = []
    for r in rows:
        row = []
        for v in r:
            f = rat.as_fraction(v)
            if f.denominator != 1:
                raise ValidationError(f"matrix entry {v!r} is not an integer")
            row.append(int(f))
        entries.append(tuple(row))
    entries = tuple(entries)
    m = rat.as_matrix(entries)
    if rat.det(m) == 0:
        raise Singular(f"matrix {list(map(list, entries))} has zero determinant")
    coeffs = [float(c) for c in rat.charpoly(m)]
    moduli = tuple(sorted(float(abs(z)) for z in np.roots(coeffs)))
    if min(moduli) <= 1 + EIGEN_MARGIN:
        raise NotExpansive(
            f"matrix {list(map(list, entries))} has an eigenvalue of modulus {min(moduli):.12g} <= 1"
        )
    return ExpansionMatrix(entries, moduli)


@dataclass(frozen=True)
class DigitSet:
    digits: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.digits) < 2:
            raise ValidationError("a digit set needs at least two digits")
        if len(set(self.digits)) != len(self.digits):
            raise ValidationError(f"digits are not pairwise distinct: {self.digits}")
        if len({len(b) for b in self.digits}) != 1:
            raise ValidationError("digits have mixed dimensions")

    @property
    def N(self) -> int:
        return len(self.digits)

    @property
    def dim(self) -> int:
        return len(self.digits[0])

    @cached_property
    def mean(self) -> rat.Vector:
        return tuple(Fraction(sum(col), self.N) for col in zip(*self.digits))

    def array(self) -> np.ndarray:
        return np.array(self.digits, dtype=np.int64)

    def index(self, b) -> int:
        vec = _int_vector(b)
        try:
            return self.digits.index(vec)
        except ValueError:
            raise ValidationError(f"{vec} is not a digit of {self.digits}") from None

    def __iter__(self):
        return iter(self.digits)

    def __len__(self):
        return self.N


def _int_vector(v) -> tuple[int, ...]:
    vec = rat.as_vector(v)
    if not rat.is_integral(vec):
        raise ValidationError(f"{v!r} is not an integer vector")
    return tuple(int(x) for x in vec)


def make_digit_set(digits, dim: int | None = None) -> DigitSet:
    ds = DigitSet(tuple(_int_vector(b) for b in digits))
    if dim is not None and ds.dim != dim:
        raise ValidationError(f"digits have dimension {ds.dim}, expected {dim}")
    return ds


@dataclass(frozen=True)
class AffineIFS:
    """The pair (R, B); anything exposing ``.R`` and ``.B`` works where this is expected."""

    R: ExpansionMatrix
    B: DigitSet

    def __post_init__(self):
        if self.R.dim != self.B.dim:
            raise ValidationError(f"R is {self.R.dim}x{self.R.dim} but digits have dimension {self.B.dim}")


def make_ifs(R, B) -> AffineIFS:
    R = R if isinstance(R, ExpansionMatrix) else validate_expansive(R)
    B = B if isinstance(B, DigitSet) else make_digit_set(B)
    return AffineIFS(R, B)


def phi(ifs, b_index: int, x: Sequence) -> rat.Vector:
    """The contraction phi_b(x) = R^{-1}(x + b), exactly."""
    return rat.mat_vec(ifs.R.inverse, rat.vec_add(ifs.B.digits[b_index], rat.as_vector(x)))


# ---------------------------------------------------------------------------
# symbolic space


@dataclass(frozen=True)
class DigitWord:
    indices: tuple[int, ...]
    n_digits: int

    def __post_init__(self):
        if any(not 0 <= i < self.n_digits for i in self.indices):
            raise ValidationError(f"word {self.indices} has an index outside 0..{self.n_digits - 1}")

    def __len__(self):
        return len(self.indices)


def word(indices: Sequence[int], n_digits: int) -> DigitWord:
    return DigitWord(tuple(int(i) for i in indices), int(n_digits))


@dataclass(frozen=True)
class DigitStream:
    """A seeded infinite digit sequence with random access.

    Digit ``k`` (counted from ``position``) is a pure function of
    ``(seed, index, position + k)``: it is drawn from a Philox counter-based
    generator keyed by ``(seed, index)``.  A ``constant`` stream repeats one
    digit forever and ignores the seed.
    """

    seed: int
    n_digits: int
    index: int = 0
    position: int = 0
    constant: int | None = None

    @cached_property
    def _key(self) -> np.ndarray:
        return np.random.SeedSequence([self.seed & _U64, self.index & _U64]).generate_state(2, np.uint64)

    def digits(self, count: int, start: int = 0) -> np.ndarray:
        """Digits at offsets ``start .. start+count-1`` past the current position."""
        count = int(count)
        if self.constant is not None:
            return np.full(count, self.constant, dtype=np.int64)
        absolute = self.position + int(start)
        gen = np.random.Philox(key=self._key)
        # Philox emits four 64-bit words per counter value
        block, offset = divmod(absolute, 4)
        if block:
            gen.advance(block)
        raw = gen.random_raw(count + offset)[offset:]
        return (raw % np.uint64(self.n_digits)).astype(np.int64)

    def prefix(self, m: int) -> DigitWord:
        return DigitWord(tuple(int(i) for i in self.digits(m)), self.n_digits)


def constant_stream(digit_index: int, n_digits: int) -> DigitStream:
    if not 0 <= digit_index < n_digits:
        raise ValidationError(f"digit index {digit_index} outside 0..{n_digits - 1}")
    return DigitStream(seed=0, n_digits=n_digits, constant=digit_index)


def shift_stream(obj: DigitStream | DigitWord, k: int):
    """Drop the first ``k`` digits (the left shift S^k)."""
    if k < 0:
        raise ValueError("shift must be non-negative")
    if isinstance(obj, DigitWord):
        if k > len(obj):
            raise ShiftPastEnd(f"cannot shift a word of length {len(obj)} by {k}")
        return DigitWord(obj.indices[k:], obj.n_digits)
    return replace(obj, position=obj.position + k)


def sample_stream(seed: int, count: int, n_digits: int) -> list[DigitStream]:
    if count < 1:
        raise ValueError("count must be at least 1")
    return [DigitStream(seed=int(seed), n_digits=int(n_digits), index=h) for h in range(count)]


def digit_matrix(streams: Sequence[DigitStream], count: int, start: int = 0) -> np.ndarray:
    """Stack ``count`` digits of each stream into an (H, count) index array."""
    out = np.empty((len(streams), count), dtype=np.int64)
    for h, s in enumerate(streams):
        out[h] = s.digits(count, start)
    return out


def encode(ifs, w: DigitWord | Sequence[int]) -> rat.Vector:
    """h(w) = sum_{i=1}^m R^{-i} b_{w_i} in exact arithmetic (Horner from the tail)."""
    indices = w.indices if isinstance(w, DigitWord) else tuple(w)
    x = tuple(Fraction(0) for _ in range(ifs.R.dim))
    for i in reversed(indices):
        x = rat.mat_vec(ifs.R.inverse, rat.vec_add(ifs.B.digits[i], x))
    return x


@lru_cache(maxsize=64)
def _digit_images(R: ExpansionMatrix, B: DigitSet, depth: int) -> np.ndarray:
    """(depth, N, d) float array whose row i-1 holds R^{-i} b for each digit b."""
    out = np.empty((depth, B.N, R.dim))
    vecs = [rat.as_vector(b) for b in B.digits]
    for i in range(depth):
        vecs = [rat.mat_vec(R.inverse, v) for v in vecs]
        out[i] = [[float(c) for c in v] for v in vecs]
    return out


def encode_digits(ifs, digits: np.ndarray) -> np.ndarray:
    """Float encoding of digit rows: (..., m) index array -> (..., d) points.

    Terms are added from the deepest digit up so small contributions are not
    swamped.
    """
    digits = np.asarray(digits)
    m = digits.shape[-1]
    images = _digit_images(ifs.R, ifs.B, m)
    out = np.zeros(digits.shape[:-1] + (ifs.R.dim,))
    for i in range(m - 1, -1, -1):
        out += images[i][digits[..., i]]
    return out


def fixed_anchor(ifs, b) -> rat.Vector:
    """(I - R^{-1})^{-1} b = (R - I)^{-1} R b, the fixed point of x -> R^{-1}x + b."""
    R = ifs.R
    vec = rat.as_vector(b, R.dim)
    shifted = rat.mat_sub(R.rational, rat.identity(R.dim))
    try:
        return rat.solve(shifted, rat.mat_vec(R.rational, vec))
    except ZeroDivisionError:
        raise SingularShift("R - I is singular") from None


def barycenter(ifs) -> rat.Vector:
    """Mean of mu: sum_{i>=1} R^{-i} mean(B) = (R - I)^{-1} mean(B)."""
    R = ifs.R
    shifted = rat.mat_sub(R.rational, rat.identity(R.dim))
    try:
        return rat.solve(shifted, ifs.B.mean)
    except ZeroDivisionError:
        raise SingularShift("R - I is singular") from None


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Equal-weight cylinder rule: node ``i`` is ``numerators[i] / denominator``.

    Nodes are stored in lexicographic word order, first digit most significant.
    """

    depth: int
    n_digits: int
    numerators: np.ndarray
    denominator: int
    anchor: rat.Vector
    anchor_policy: str
    det_R: int

    @property
    def size(self) -> int:
        return self.n_digits**self.depth

    @property
    def weight(self) -> Fraction:
        return Fraction(1, self.size)

    @property
    def dim(self) -> int:
        return self.numerators.shape[1]

    @cached_property
    def coords(self) -> np.ndarray:
        num = self.numerators
        if num.dtype == object:
            return np.array([[c / self.denominator for c in row] for row in num], dtype=float)
        return num / self.denominator

    def point(self, i: int) -> rat.Vector:
        return tuple(Fraction(int(c), self.denominator) for c in self.numerators[i])

    def points(self) -> Iterator[rat.Vector]:
        for i in range(self.size):
            yield self.point(i)

    def word(self, i: int) -> tuple[int, ...]:
        return tuple(int(k) for k in np.unravel_index(i, (self.n_digits,) * self.depth))

    def phases(self, v, offset=0) -> np.ndarray:
        """Fractional parts of ``v . x_w - offset`` for every node, reduced exactly.

        ``v`` must be an integer vector and ``offset`` a rational.  The result is
        the correctly rounded double of an exact value in [0, 1).
        """
        v = [int(c) for c in v]
        den = self.denominator
        off = rat.frac_part(rat.as_fraction(offset))
        a, b = off.numerator, off.denominator
        bound = int(np.max(np.abs(self.numerators))) * sum(abs(c) for c in v) if self.size else 0
        if self.numerators.dtype != object and bound < 2**62 and den * b < 2**62:
            s = self.numerators @ np.array(v, dtype=np.int64)
            total = (s % den) * b - a * den
            return (total % (den * b)) / (den * b)
        s = [(sum(int(c) * vi for c, vi in zip(row, v)) % den) * b - a * den for row in self.numerators]
        q = den * b
        return np.array([(t % q) / q for t in s], dtype=float)


def _anchor_vector(ifs, anchor) -> tuple[rat.Vector, str]:
    if isinstance(anchor, str):
        if anchor == "corner":
            return tuple(Fraction(0) for _ in range(ifs.R.dim)), "corner"
        if anchor == "center":
            return barycenter(ifs), "center"
        raise ValidationError(f"unknown anchor policy {anchor!r}")
    return rat.as_vector(anchor, ifs.R.dim), "custom"


def build_quadrature(ifs, depth: int, anchor="corner", budget: int = DEFAULT_NODE_BUDGET) -> QuadratureRule:
    """Enumerate the N^m depth-``depth`` cylinders of mu.

    Node for word w is ``sum_{i=1}^m R^{-i} b_{w_i} + R^{-m} anchor``.  With the
    ``corner`` anchor (0) the nodes are the exact digit expansions; ``center``
    uses the barycenter of mu so each node is the barycenter of its cylinder.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    R, B = ifs.R, ifs.B
    size = B.N**depth
    if size > budget:
        raise BudgetExceeded(size, budget)
    d = R.dim
    z_anchor, policy = _anchor_vector(ifs, anchor)
    p, q = rat.common_denominator(z_anchor)

    # z_w = sum_i R^{m-i} b_{w_i}, built by z <- R z + b one digit at a time
    norm = max(sum(abs(c) for c in row) for row in R.entries)
    bmax = max(abs(c) for b in B.digits for c in b)
    zbound = bmax * sum(norm**i for i in range(depth))
    Rt = rat.int_array(R.entries, bound=norm).T
    digits = rat.int_array(B.digits, bound=bmax)
    if zbound >= 2**62:
        Rt, digits = Rt.astype(object), digits.astype(object)
    z = np.zeros((1, d), dtype=digits.dtype)
    for _ in range(depth):
        z = ((z @ Rt)[:, None, :] + digits[None, :, :]).reshape(-1, d)

    # x_w = R^{-m}(z_w + p/q) = adj (q z_w + p) / (q det R^m)
    Rm = rat.mat_pow(R.rational, depth)
    D = int(rat.det(Rm))
    adj = [[int(c * D) for c in row] for row in rat.inverse(Rm)]
    if D < 0:
        D, adj = -D, [[-c for c in row] for row in adj]
    adj_norm = max(sum(abs(c) for c in row) for row in adj)
    num_bound = adj_norm * (q * zbound + max((abs(c) for c in p), default=0))
    if num_bound < 2**62 and z.dtype != object:
        lifted = q * z + np.array(p, dtype=np.int64)
        numerators = lifted @ np.array(adj, dtype=np.int64).T
    else:
        lifted = q * z.astype(object) + np.array(p, dtype=object)
        numerators = lifted @ np.array(adj, dtype=object).T
    return QuadratureRule(depth, B.N, numerators, q * D, z_anchor, policy, abs(R.det))


def _fsum_mean(values: np.ndarray, size: int):
    if np.iscomplexobj(values):
        return complex(math.fsum(values.real), math.fsum(values.imag)) / size
    return math.fsum(values) / size


def check_finite(values: np.ndarray, rule: QuadratureRule) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NonFinite(rule.word(i), values[i])


def integrate(f: Callable[[np.ndarray], np.ndarray], rule: QuadratureRule):
    """N^{-m} sum_w f(x_w).

    ``f`` is vectorised: it receives the (N^m, d) float array of nodes and
    returns N^m values.  The sum is ``math.fsum`` (correctly rounded), so the
    result does not depend on how nodes are ordered or partitioned.
    """
    values = np.asarray(f(rule.coords))
    if values.shape != (rule.size,):
        values = np.broadcast_to(values, (rule.size,))
    check_finite(values, rule)
    return _fsum_mean(values, rule.size)


def integrate_exact(f: Callable[[rat.Vector], Fraction], rule: QuadratureRule) -> Fraction:
    """Same rule with an exact rational integrand evaluated at exact nodes."""
    return sum((Fraction(f(x)) for x in rule.points()), Fraction(0)) * rule.weight


def min_node_gap(rule: QuadratureRule) -> Fraction:
    """Smallest sup-norm distance between distinct node positions (0 if two nodes coincide)."""
    num = rule.numerators
    if rule.dim == 1:
        col = sorted(int(c) for c in num[:, 0])
        gaps = [b - a for a, b in zip(col, col[1:])]
        return Fraction(min(gaps), rule.denominator)
    best = None
    rows = [tuple(int(c) for c in r) for r in num]
    for u, v in itertools.combinations(rows, 2):
        g = max(abs(a - b) for a, b in zip(u, v))
        best = g if best is None else min(best, g)
    return Fraction(best, rule.denominator)


# ---------------------------------------------------------------------------
# doubling diagnostic


@dataclass(frozen=True)
class DoublingEntry:
    center_index: int
    radius: float
    inner_mass: float
    outer_mass: float
    ratio: float


@dataclass(frozen=True)
class DoublingReport:
    max_ratio: float
    entries: tuple[DoublingEntry, ...]
    empty_count: int


def doubling_scan(rule: QuadratureRule, centers, radii: Sequence[float]) -> DoublingReport:
    """Node-count estimate of mu(B(x, 2r)) / mu(B(x, r)) over closed Euclidean balls.

    Entries whose inner ball holds no node are skipped and counted in
    ``empty_count``.
    """
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii):
        raise ValueError("radii must be positive")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if rule.dim == 1 and centers.shape[0] == 1 and centers.shape[1] != 1:
        centers = centers.T
    # typical cylinder diameter |det R|^{-m/d}
    spacing = rule.det_R ** (-rule.depth / rule.dim)
    if radii and min(radii) <= spacing:
        warnings.warn(
            f"smallest radius {min(radii):.3g} does not exceed the node spacing {spacing:.3g}; "
            "ball masses are resolution limited",
            RuntimeWarning,
            stacklevel=2,
        )
    coords = rule.coords
    size = rule.size
    entries = []
    empty = 0
    for ci, x in enumerate(centers):
        dist = np.sqrt(((coords - x) ** 2).sum(axis=1))
        for r in radii:
            inner = int(np.count_nonzero(dist <= r))
            if inner == 0:
                empty += 1
                continue
            outer = int(np.count_nonzero(dist <= 2 * r))
            entries.append(DoublingEntry(ci, r, inner / size, outer / size, outer / inner))
    max_ratio = max((e.ratio for e in entries), default=float("nan"))
    return DoublingReport(max_ratio, tuple(entries), empty)
