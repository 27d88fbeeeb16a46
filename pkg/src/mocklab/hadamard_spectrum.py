"""Hadamard triples (R, B, L), their scaled spectra and the Fourier transform of mu."""

from __future__ import annotations

import cmath
import csv
import io
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from . import _rational as rat
from .affine_ifs import DigitSet, ExpansionMatrix, make_digit_set, validate_expansive
from .errors import BudgetExceeded, CardinalityMismatch, DegenerateSpectrum, NotHadamard, ValidationError

UNITARITY_TOL = 1e-12
DEFAULT_TRUNCATION = 40
DEFAULT_SPECTRUM_BUDGET = 2**20
LEVEL_CONVENTION = "Lambda_n = sum_{k=0}^{n} (R^t)^k L, so |Lambda_n| = N^(n+1) and Lambda_0 = L"


def _exp2pi(phase) -> complex:
    return cmath.exp(2j * math.pi * float(phase))


@dataclass(frozen=True)
class HadamardTriple:
    R: ExpansionMatrix
    B: DigitSet
    L: tuple[tuple[int, ...], ...]
    tau: int = 1
    defect: float = 0.0

    @property
    def N(self) -> int:
        return self.B.N

    @property
    def dim(self) -> int:
        return self.R.dim

    def describe(self) -> dict:
        return {
            "R": [list(r) for r in self.R.entries],
            "B": [list(b) for b in self.B.digits],
            "L": [list(l) for l in self.L],
            "tau": self.tau,
        }


def _coerce(R, B, L):
    R = R if isinstance(R, ExpansionMatrix) else validate_expansive(R)
    B = B if isinstance(B, DigitSet) else make_digit_set(B, R.dim)
    freqs = []
    for l in L:
        vec = rat.as_vector(l, R.dim)
        if not rat.is_integral(vec):
            raise ValidationError(f"frequency {l!r} is not an integer vector")
        freqs.append(tuple(int(c) for c in vec))
    return R, B, tuple(freqs)


def check_unitary(R, B, L) -> float:
    """Max-norm of H*H - I for H = N^{-1/2} [exp(2 pi i R^{-1}b . l)]_{l, b}.

    Phases ``R^{-1}b . l`` are reduced mod 1 exactly before exponentiation.
    """
    R, B, L = _coerce(R, B, L)
    if len(L) != B.N:
        raise CardinalityMismatch(f"|B| = {B.N} but |L| = {len(L)}")
    n = B.N
    scale = 1 / math.sqrt(n)
    cols = [rat.mat_vec(R.inverse, b) for b in B.digits]
    H = np.array([[_exp2pi(rat.frac_part(rat.dot(c, l))) * scale for c in cols] for l in L])
    gram = H.conj().T @ H
    return float(np.max(np.abs(gram - np.eye(n))))


def make_triple(R, B, L, tau: int = 1, tol: float = UNITARITY_TOL) -> HadamardTriple:
    """Validate (R, B, L) as a Hadamard triple and attach the integer scale ``tau``."""
    R, B, L = _coerce(R, B, L)
    if len(set(L)) != len(L):
        raise ValidationError(f"frequencies are not distinct: {L}")
    tau_f = rat.as_fraction(tau)
    if tau_f.denominator != 1 or tau_f == 0:
        raise ValidationError(f"tau must be a nonzero integer, got {tau!r}")
    defect = check_unitary(R, B, L)
    if not defect < tol:
        raise NotHadamard(defect, tol)
    return HadamardTriple(R, B, L, int(tau_f), defect)


def quarter_cantor(tau: int = 1, digits=(0, 2)) -> HadamardTriple:
    """The R = 4 triple with L = {0, 1}; ``digits`` defaults to {0, 2}."""
    return make_triple([[4]], [[b] for b in digits], [[0], [1]], tau)


@dataclass(frozen=True, eq=False)
class SpectrumLevel:
    n: int
    tau: int
    elements: np.ndarray

    def __len__(self):
        return len(self.elements)

    def as_tuples(self) -> list[tuple[int, ...]]:
        return [tuple(int(c) for c in row) for row in self.elements]


def spectrum_level(triple: HadamardTriple, n: int, budget: int = DEFAULT_SPECTRUM_BUDGET) -> SpectrumLevel:
    """tau * sum_{k=0}^{n} (R^t)^k l_k over all choices l_k in L.

    Rows are ordered lexicographically in (l_0, ..., l_n) with l_0 varying slowest.
    """
    if n < 0:
        raise ValueError("level must be non-negative")
    N = triple.N
    count = N ** (n + 1)
    if count > budget:
        raise BudgetExceeded(count, budget, "spectrum elements")
    d = triple.dim
    Rt = triple.R.transpose
    lmax = max(abs(c) for l in triple.L for c in l)
    norm = max(sum(abs(int(c)) for c in row) for row in Rt)
    bound = abs(triple.tau) * lmax * sum(norm**k for k in range(n + 1))
    use_obj = bound >= 2**62
    dtype = object if use_obj else np.int64

    elems = np.array(triple.L, dtype=dtype)
    power = rat.identity(d)
    for _ in range(n):
        power = rat.mat_mul(Rt, power)
        shifted = np.array([[int(c) for c in rat.mat_vec(power, l)] for l in triple.L], dtype=dtype)
        elems = (elems[:, None, :] + shifted[None, :, :]).reshape(-1, d)
    elems = elems * triple.tau
    distinct = len({tuple(row) for row in elems.tolist()})
    if distinct < count:
        raise DegenerateSpectrum(f"level {n} has {distinct} distinct elements, expected {count}")
    return SpectrumLevel(n, triple.tau, elems)


def spectrum_csv(level: SpectrumLevel) -> str:
    buf = io.StringIO()
    buf.write(f"# {LEVEL_CONVENTION}\n")
    d = level.elements.shape[1]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["level", "tau"] + [f"component_{i}" for i in range(d)])
    for row in level.elements:
        writer.writerow([level.n, level.tau] + [int(c) for c in row])
    return buf.getvalue()


def _digit_mask(triple, eta: rat.Vector) -> complex:
    """M_B(eta) = N^{-1} sum_b exp(2 pi i b . eta) with exact phase reduction."""
    return sum(_exp2pi(rat.frac_part(rat.dot(b, eta))) for b in triple.B.digits) / triple.N


def mu_hat(triple, xi, K: int = DEFAULT_TRUNCATION) -> complex:
    """Truncated infinite product prod_{k=1}^{K} M_B((R^t)^{-k} xi)."""
    if K < 1:
        raise ValueError("truncation must be at least 1")
    eta = rat.as_vector(xi, triple.R.dim)
    inv_t = rat.transpose(triple.R.inverse)
    value = 1 + 0j
    for _ in range(K):
        eta = rat.mat_vec(inv_t, eta)
        value *= _digit_mask(triple, eta)
    return value


def mu_hat_tail_bound(triple, xi, K: int) -> float:
    """Bound on |mu_hat(xi, K) - mu_hat(xi, K+1)|: 2 pi max|b| ||(R^t)^{-K-1} xi||."""
    eta = rat.as_vector(xi, triple.R.dim)
    inv_t = rat.transpose(triple.R.inverse)
    for _ in range(K + 1):
        eta = rat.mat_vec(inv_t, eta)
    bmax = max(math.sqrt(sum(c * c for c in b)) for b in triple.B.digits)
    return 2 * math.pi * bmax * math.sqrt(sum(float(c) ** 2 for c in eta))


class OrthoDefect(NamedTuple):
    max_offdiagonal: float
    diagonal: float
    worst_pair: tuple


def orthonormality_defect(triple, n: int, K: int = DEFAULT_TRUNCATION, budget: int = 4096) -> OrthoDefect:
    """Largest |<e_lambda, e_lambda'>_mu| over distinct lambda, lambda' in tau Lambda_n."""
    level = spectrum_level(triple, n, budget=budget)
    elems = level.as_tuples()
    worst, pair = 0.0, ()
    # |mu_hat(-xi)| = |mu_hat(xi)| since mu is real, so unordered pairs suffice
    for a, b in itertools.combinations(elems, 2):
        diff = tuple(x - y for x, y in zip(a, b))
        v = abs(mu_hat(triple, diff, K))
        if v > worst or not pair:
            worst, pair = v, (a, b)
    zero = tuple(Fraction(0) for _ in range(triple.dim))
    return OrthoDefect(worst, abs(mu_hat(triple, zero, K) - 1), pair)
