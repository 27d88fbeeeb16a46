"""Small exact linear algebra over the rationals.

Matrices are tuples of row tuples, vectors are tuples; entries are ints or
``Fraction``.  Dimensions here are tiny (d <= 4), so plain Python beats any
dependency.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Integral, Rational, Real
from typing import Iterable, Sequence

import numpy as np

Vector = tuple[Fraction, ...]
Matrix = tuple[tuple[Fraction, ...], ...]


def as_fraction(value) -> Fraction:
    """Exact conversion; floats are taken at their binary value."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (Integral, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, (Real, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            raise ValueError(f"non-finite coordinate {v!r}")
        return Fraction(v)
    raise TypeError(f"cannot convert {type(value).__name__} to a rational")


def as_vector(values, dim: int | None = None) -> Vector:
    if isinstance(values, (str, bytes)):
        return parse_vector(values if isinstance(values, str) else values.decode())
    if np.ndim(values) == 0:
        values = [values]
    vec = tuple(as_fraction(v) for v in np.asarray(values, dtype=object).ravel())
    if dim is not None and len(vec) != dim:
        raise ValueError(f"expected a vector of length {dim}, got {len(vec)}")
    return vec


def as_matrix(rows) -> Matrix:
    return tuple(tuple(as_fraction(v) for v in row) for row in rows)


def identity(d: int) -> Matrix:
    return tuple(tuple(Fraction(int(i == j)) for j in range(d)) for i in range(d))


def transpose(m: Matrix) -> Matrix:
    return tuple(zip(*m))


def mat_vec(m: Matrix, v: Sequence) -> Vector:
    return tuple(sum((a * b for a, b in zip(row, v)), Fraction(0)) for row in m)


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    cols = transpose(b)
    return tuple(tuple(sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in cols) for row in a)


def mat_pow(m: Matrix, k: int) -> Matrix:
    result = identity(len(m))
    base = m
    while k:
        if k & 1:
            result = mat_mul(result, base)
        base = mat_mul(base, base)
        k >>= 1
    return result


def mat_sub(a: Matrix, b: Matrix) -> Matrix:
    return tuple(tuple(x - y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def vec_add(u: Sequence, v: Sequence) -> Vector:
    return tuple(Fraction(x) + y for x, y in zip(u, v))


def vec_sub(u: Sequence, v: Sequence) -> Vector:
    return tuple(Fraction(x) - y for x, y in zip(u, v))


def dot(u: Sequence, v: Sequence) -> Fraction:
    return sum((Fraction(a) * b for a, b in zip(u, v)), Fraction(0))


def det(m: Matrix) -> Fraction:
    a = [list(map(Fraction, row)) for row in m]
    n = len(a)
    sign = 1
    result = Fraction(1)
    for i in range(n):
        pivot = next((r for r in range(i, n) if a[r][i] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != i:
            a[i], a[pivot] = a[pivot], a[i]
            sign = -sign
        result *= a[i][i]
        for r in range(i + 1, n):
            f = a[r][i] / a[i][i]
            if f:
                a[r] = [x - f * y for x, y in zip(a[r], a[i])]
    return sign * result


def inverse(m: Matrix) -> Matrix:
    """Gauss-Jordan inverse; raises ZeroDivisionError for singular input."""
    n = len(m)
    a = [list(map(Fraction, row)) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for i in range(n):
        pivot = next((r for r in range(i, n) if a[r][i] != 0), None)
        if pivot is None:
            raise ZeroDivisionError("matrix is singular")
        a[i], a[pivot] = a[pivot], a[i]
        p = a[i][i]
        a[i] = [x / p for x in a[i]]
        for r in range(n):
            if r != i and a[r][i] != 0:
                f = a[r][i]
                a[r] = [x - f * y for x, y in zip(a[r], a[i])]
    return tuple(tuple(row[n:]) for row in a)


def solve(m: Matrix, v: Sequence) -> Vector:
    return mat_vec(inverse(m), v)


def charpoly(m: Matrix) -> list[Fraction]:
    """Characteristic polynomial coefficients, leading 1 first (Faddeev-LeVerrier)."""
    n = len(m)
    coeffs = [Fraction(1)]
    mk = identity(n)
    eye = identity(n)
    for k in range(1, n + 1):
        am = mat_mul(m, mk)
        c = -sum(am[i][i] for i in range(n)) / k
        coeffs.append(c)
        mk = tuple(tuple(am[i][j] + c * eye[i][j] for j in range(n)) for i in range(n))
    return coeffs


def frac_part(x: Fraction) -> Fraction:
    return x - math.floor(x)


def mod1(v: Iterable[Fraction]) -> Vector:
    return tuple(frac_part(Fraction(x)) for x in v)


def common_denominator(v: Sequence[Fraction]) -> tuple[tuple[int, ...], int]:
    """Return integer numerators and a positive common denominator."""
    q = 1
    for x in v:
        q = math.lcm(q, Fraction(x).denominator)
    return tuple(int(Fraction(x) * q) for x in v), q


def is_integral(v: Iterable[Fraction]) -> bool:
    return all(Fraction(x).denominator == 1 for x in v)


def format_vector(v: Sequence) -> str:
    """Serialize as comma-joined ``p/q`` strings (integers stay bare)."""
    return ",".join(str(Fraction(x)) for x in v)


def parse_vector(text: str) -> Vector:
    return tuple(Fraction(part.strip()) for part in text.split(","))


def to_float(v: Sequence) -> np.ndarray:
    return np.array([float(x) for x in v], dtype=float)


def int_array(rows, bound: int | None = None) -> np.ndarray:
    """int64 array when every value provably fits, else an object array of Python ints."""
    arr = np.array(rows, dtype=object)
    if bound is None:
        bound = max((abs(int(x)) for x in arr.ravel()), default=0)
    if bound < 2**62:
        return arr.astype(np.int64)
    return arr
