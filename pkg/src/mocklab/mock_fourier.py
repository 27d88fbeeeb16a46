"""Mock Dirichlet kernels, Mock Fourier coefficients and partial sums.

Three ways to evaluate the kernel D_n(x) = sum_{lambda in tau Lambda_n} e(lambda . x):

``direct``
    explicit sum over the spectrum level (small n only);
``product``
    prod_{k=0}^{n} m_tau(R^k x) with x held as an exact rational and
    reduced mod 1 before every multiplication by R;
``orbit``
    for a point given by its digit stream, the k-th factor is evaluated at the
    shifted point h(S^k w) = R^k x mod Z^d, so R^k x is never formed.

Here e(t) = exp(2 pi i t).  Phases are always reduced exactly before the
exponential is taken in double precision.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _rational as rat
from .affine_ifs import DigitStream, QuadratureRule, check_finite, encode_digits, fixed_anchor
from .hadamard_spectrum import LEVEL_CONVENTION, HadamardTriple, spectrum_level

ZERO_TOL = 1e-15
CLIP_EPS = 1e-300
ORBIT_DEPTH = 48
DIRECT_BUDGET = 2**20

TWO_PI_I = 2j * math.pi


def _csum(values) -> complex:
    values = np.asarray(values, dtype=complex)
    return complex(math.fsum(values.real), math.fsum(values.imag))


@dataclass(frozen=True)
class TrigPolynomial:
    """m_tau(x) = sum_{l in L} e(tau l . x)."""

    L: tuple[tuple[int, ...], ...]
    tau: int = 1

    @property
    def frequencies(self) -> list[tuple[int, ...]]:
        return [tuple(self.tau * c for c in l) for l in self.L]

    def __call__(self, x):
        return m_tau_eval(self, x)


def trig_poly(triple: HadamardTriple) -> TrigPolynomial:
    return TrigPolynomial(triple.L, triple.tau)


def point_phases(freqs, x) -> np.ndarray:
    """Exact fractional parts of f . x for integer rows ``freqs`` and a rational point ``x``."""
    freqs = np.asarray(freqs, dtype=object)
    if freqs.ndim == 1:
        freqs = freqs[None, :]
    nums, q = rat.common_denominator(rat.as_vector(x, freqs.shape[1]))
    dots = freqs @ np.array(nums, dtype=object)
    return np.array([(int(t) % q) / q for t in dots], dtype=float)


def m_tau_eval(poly: TrigPolynomial, x):
    """Evaluate m_tau at one point (exact reduction) or at an (M, d) float array."""
    freqs = poly.frequencies
    if isinstance(x, np.ndarray) and x.ndim == 2:
        ph = np.mod(x @ np.array(freqs, dtype=float).T, 1.0)
        return np.exp(TWO_PI_I * ph).sum(axis=1)
    return _csum(np.exp(TWO_PI_I * point_phases(freqs, x)))


@dataclass(frozen=True)
class KernelEvaluation:
    order: int
    value: complex
    log_magnitude: float
    mode: str
    zero_factors: int = 0


def _from_log(order: int, log_mag: float, arg: float, mode: str, zeros: int) -> KernelEvaluation:
    if zeros:
        return KernelEvaluation(order, 0j, -math.inf, mode, zeros)
    mag = math.exp(log_mag) if log_mag < 709.0 else math.inf
    value = cmath.rect(mag, arg) if math.isfinite(mag) else complex(math.inf, 0.0)
    return KernelEvaluation(order, value, log_mag, mode, 0)


def dirichlet_direct(triple: HadamardTriple, n: int, x, budget: int = DIRECT_BUDGET) -> KernelEvaluation:
    """sum over tau Lambda_n of e(lambda . x), term by term."""
    level = spectrum_level(triple, n, budget=budget)
    value = _csum(np.exp(TWO_PI_I * point_phases(level.elements, x)))
    mag = abs(value)
    log_mag = math.log(mag) if mag > 0 else -math.inf
    return KernelEvaluation(n, value, log_mag, "direct")


def kernel_trace(triple: HadamardTriple, n: int, x) -> list[KernelEvaluation]:
    """Product-mode evaluations D_0(x), ..., D_n(x) from one pass over the factors."""
    y = rat.mod1(rat.as_vector(x, triple.dim))
    R = triple.R.rational
    freqs = trig_poly(triple).frequencies
    log_mag, arg, zeros = 0.0, 0.0, 0
    running = 1 + 0j
    out = []
    for k in range(n + 1):
        factor = _csum(np.exp(TWO_PI_I * point_phases(freqs, y)))
        mag = abs(factor)
        if mag <= ZERO_TOL:
            zeros += 1
        else:
            log_mag += math.log(mag)
            arg += cmath.phase(factor)
        running *= factor
        if zeros == 0 and math.isfinite(running.real) and math.isfinite(running.imag) and abs(running) > 1e-290:
            # direct multiplication is more accurate while it stays in range
            out.append(KernelEvaluation(k, running, log_mag, "product", 0))
        else:
            out.append(_from_log(k, log_mag, arg, "product", zeros))
        # (R^t l) . x = l . (R x), so the next factor is taken at R y
        y = rat.mod1(rat.mat_vec(R, y))
    return out


def dirichlet_product(triple: HadamardTriple, n: int, x) -> KernelEvaluation:
    """prod_{k=0}^{n} m_tau(R^k x), the factorisation of the sum over tau Lambda_n.

    ``log_magnitude`` is the sum of log-moduli of the factors and the phase is
    the sum of their arguments; for very large n only the log-magnitude is
    meaningful.  A factor with modulus <= 1e-15 counts as a zero.
    """
    return kernel_trace(triple, n, x)[-1]


def kernel_trace_csv(evals: Sequence[KernelEvaluation]) -> str:
    buf = io.StringIO()
    buf.write(f"# {LEVEL_CONVENTION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "re", "im", "log_magnitude", "mode"])
    for e in evals:
        w.writerow([e.order, repr(e.value.real), repr(e.value.imag), repr(e.log_magnitude), e.mode])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# orbit mode


def atom_orbit(triple, atom, n: int) -> tuple[list[rat.Vector], np.ndarray]:
    """Distinct states of R^k a mod 1 and, for k = 0..n, the index of the state at step k.

    The orbit of a rational point is eventually periodic; iteration stops at the
    first repeated state.
    """
    R = triple.R.rational
    y = rat.mod1(rat.as_vector(atom, triple.dim))
    seen: dict[rat.Vector, int] = {}
    states: list[rat.Vector] = []
    while len(states) <= n and y not in seen:
        seen[y] = len(states)
        states.append(y)
        y = rat.mod1(rat.mat_vec(R, y))
    k = np.arange(n + 1)
    if len(states) > n:
        return states, k
    start = seen[y]
    period = len(states) - start
    index = np.where(k < start, k, start + (k - start) % period)
    return states, index


def atom_offsets(triple, atom, n: int) -> np.ndarray:
    """(n+1, |L|) array of exact phases tau l . (R^k a) mod 1."""
    freqs = trig_poly(triple).frequencies
    states, index = atom_orbit(triple, atom, n)
    table = np.array([point_phases(freqs, s) for s in states])
    return table[index]


class OrbitFactors(NamedTuple):
    logs: np.ndarray
    args: np.ndarray
    clipped: int


def orbit_factors(
    triple,
    digits: np.ndarray,
    atom,
    n: int,
    depth: int = ORBIT_DEPTH,
    eps: float = CLIP_EPS,
    with_args: bool = False,
) -> OrbitFactors:
    """log|m_tau(h(S^k w) - R^k a)| for k = 0..n and every digit row w.

    ``digits`` is an (H, n + depth) index array; row h encodes the sample point
    x_h = h(w).  Factors with modulus <= 1e-15 are clipped to log(eps) and
    counted.
    """
    digits = np.atleast_2d(digits)
    if digits.shape[1] < n + depth:
        raise ValueError(f"need {n + depth} digits per row, got {digits.shape[1]}")
    windows = sliding_window_view(digits[:, : n + depth], depth, axis=1)
    points = encode_digits(triple, windows)  # (H, n+1, d)

    freqs = trig_poly(triple).frequencies
    offsets = atom_offsets(triple, atom, n)
    ph = np.mod(points @ np.array(freqs, dtype=float).T - offsets[None, :, :], 1.0)
    values = np.exp(TWO_PI_I * ph).sum(axis=-1)
    mags = np.abs(values)
    zero = mags <= ZERO_TOL
    clipped = int(np.count_nonzero(zero))
    logs = np.log(np.where(zero, eps, mags))
    args = np.where(zero, 0.0, np.angle(values)) if with_args else np.empty((0,))
    return OrbitFactors(logs, args, clipped)


def dirichlet_orbit_log(
    triple, stream: DigitStream, b, n: int, depth: int = ORBIT_DEPTH, eps: float = CLIP_EPS
) -> np.ndarray:
    """Partial sums s_j = sum_{k<=j} log|m_tau(R^k x - x_b)| = log|D_j(x - x_b)|.

    ``x`` is the point encoded by ``stream`` and ``b`` is a digit vector; its
    translate x_b = (I - R^{-1})^{-1} b is used as the atom.
    """
    digits = stream.digits(n + depth)[None, :]
    logs = orbit_factors(triple, digits, fixed_anchor(triple, b), n, depth, eps).logs[0]
    return np.cumsum(logs)


# ---------------------------------------------------------------------------
# coefficients and partial sums


def exponential(freq) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised y -> e(freq . y)."""
    f = np.array(rat.as_vector(freq), dtype=float)

    def fn(points: np.ndarray) -> np.ndarray:
        return np.exp(TWO_PI_I * np.mod(points @ f, 1.0))

    return fn


def _node_values(f, rule: QuadratureRule) -> np.ndarray:
    if callable(f):
        vals = np.asarray(f(rule.coords))
    else:
        vals = np.asarray(f)
    return np.broadcast_to(vals, (rule.size,))


def _rule_mean(values: np.ndarray, rule: QuadratureRule) -> complex:
    check_finite(values, rule)
    return _csum(values) / rule.size


def mock_coefficient(f, lam, rule: QuadratureRule) -> complex:
    """c_lambda(f) = integral of f(y) e(-lambda . y) d mu, by quadrature."""
    vals = _node_values(f, rule) * np.exp(-TWO_PI_I * rule.phases(rat.as_vector(lam)))
    return _rule_mean(vals, rule)


def _kernel_at_nodes(triple, n: int, x, rule: QuadratureRule) -> np.ndarray:
    """D_n(x - y_w) for every node via the product formula with exact phases."""
    x = rat.as_vector(x, triple.dim)
    out = np.ones(rule.size, dtype=complex)
    Rt = triple.R.transpose
    vs = [tuple(Fraction(triple.tau * c) for c in l) for l in triple.L]
    for _ in range(n + 1):
        factor = np.zeros(rule.size, dtype=complex)
        for v in vs:
            # phase of v.(x - y) is -(v.y - v.x)
            factor += np.exp(-TWO_PI_I * rule.phases(v, offset=rat.dot(v, x)))
        out *= factor
        vs = [rat.mat_vec(Rt, v) for v in vs]
    return out


def partial_sum(
    triple: HadamardTriple, f, n: int, xs, rule: QuadratureRule, path: str = "coefficients"
) -> list[complex]:
    """S_n(f)(x) = sum_{lambda in tau Lambda_n} c_lambda(f) e(lambda . x).

    ``path="coefficients"`` sums coefficients times exponentials;
    ``path="kernel"`` integrates f(y) D_n(x - y) against the rule.
    """
    fvals = np.asarray(_node_values(f, rule), dtype=complex)
    points = [rat.as_vector(x, triple.dim) for x in _point_list(xs, triple.dim)]
    if path == "coefficients":
        level = spectrum_level(triple, n)
        coeffs = np.array([mock_coefficient(fvals, lam, rule) for lam in level.as_tuples()])
        return [_csum(coeffs * np.exp(TWO_PI_I * point_phases(level.elements, x))) for x in points]
    if path == "kernel":
        return [_rule_mean(fvals * _kernel_at_nodes(triple, n, x, rule), rule) for x in points]
    raise ValueError(f"unknown path {path!r}")


def _point_list(xs, dim: int) -> list:
    if isinstance(xs, np.ndarray):
        return list(xs.reshape(-1, dim))
    return list(xs)


def partial_sum_discrete(triple: HadamardTriple, atoms, n: int, xs) -> list[complex]:
    """S_n(nu)(x) = H^{-1} sum_h D_n(x - x_h) for nu = H^{-1} sum_h delta_{x_h}."""
    atoms = [rat.as_vector(a, triple.dim) for a in _point_list(atoms, triple.dim)]
    if not atoms:
        raise ValueError("need at least one atom")
    out = []
    for x in _point_list(xs, triple.dim):
        x = rat.as_vector(x, triple.dim)
        terms = [dirichlet_product(triple, n, rat.vec_sub(x, a)).value for a in atoms]
        out.append(_csum(terms) / len(atoms))
    return out


def l0_distance(f, g, rule: QuadratureRule) -> float:
    """d(f, g) = integral of |f - g| / (1 + |f - g|) d mu."""
    diff = np.abs(_node_values(f, rule) - _node_values(g, rule))
    vals = diff / (1 + diff)
    check_finite(vals, rule)
    return math.fsum(vals) / rule.size


def kernel_defect(triple: HadamardTriple, n: int, x) -> float:
    """|D_direct - D_product| / (1 + |D_direct|) at order n; stable near kernel zeros."""
    direct = dirichlet_direct(triple, n, x).value
    product = dirichlet_product(triple, n, x).value
    return abs(direct - product) / (1 + abs(direct))
