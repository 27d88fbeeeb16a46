"""Divergence indicator estimates, kernel growth rates, maximal-operator tails, classification.

For a digit b the indicator is

    log Delta(m_{tau,b}) = integral of log|m_tau(x - x_b)| d mu(x),
    x_b = (I - R^{-1})^{-1} b.

It is estimated two independent ways: by cylinder quadrature and by a
Birkhoff average along one long orbit of the shift.  A positive value means
|D_n(x - x_b)| grows like Delta^n for mu-almost every x, which is the
criterion for divergence of some Mock Fourier series on a set of positive
measure.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import binomtest

from . import _rational as rat
from .affine_ifs import DigitStream, build_quadrature, digit_matrix, fixed_anchor, sample_stream
from .errors import DimensionalityNote, MethodDisagreement, Unreliable
from .hadamard_spectrum import LEVEL_CONVENTION, HadamardTriple
from .mock_fourier import (
    CLIP_EPS,
    ORBIT_DEPTH,
    TWO_PI_I,
    ZERO_TOL,
    dirichlet_orbit_log,
    orbit_factors,
    trig_poly,
)

UNRELIABLE_CLIP_RATIO = 1e-3
AGREEMENT_FLOOR = 0.01
REFINEMENT_TOL = 0.01
BATCH_SEGMENTS = 20

SATISFIED = "divergence criterion satisfied"
NOT_SATISFIED = "not satisfied"


@dataclass(frozen=True)
class DeltaEstimate:
    log_delta: float
    method: str
    params: dict
    clipped_count: int = 0
    stderr: float = 0.0
    unreliable: bool = False


def _digit_vector(triple, b) -> tuple[int, ...]:
    return triple.B.digits[triple.B.index(b)]


def delta_quadrature(
    triple: HadamardTriple,
    b,
    depth: int,
    eps: float = CLIP_EPS,
    anchor="center",
    budget: int = 2**20,
) -> DeltaEstimate:
    """Cylinder quadrature of log|m_tau(x - x_b)|.

    Phases are reduced mod 1 exactly from the rational nodes.  Nodes where
    |m_tau| <= 1e-15 are clipped to log(eps); more than 0.1% clipped nodes
    marks the estimate unreliable.  ``anchor="center"`` keeps nodes off the
    rational zeros that corner nodes can hit.
    """
    b = _digit_vector(triple, b)
    rule = build_quadrature(triple, depth, anchor=anchor, budget=budget)
    xb = fixed_anchor(triple, b)
    values = np.zeros(rule.size, dtype=complex)
    for freq in trig_poly(triple).frequencies:
        values += np.exp(TWO_PI_I * rule.phases(freq, offset=rat.dot(freq, xb)))
    mags = np.abs(values)
    zero = mags <= ZERO_TOL
    clipped = int(np.count_nonzero(zero))
    logs = np.log(np.where(zero, eps, mags))
    log_delta = math.fsum(logs) / rule.size
    params = {"depth": depth, "eps": eps, "anchor": rule.anchor_policy, "b": list(b)}
    return DeltaEstimate(
        log_delta,
        "quadrature",
        params,
        clipped_count=clipped,
        unreliable=clipped / rule.size > UNRELIABLE_CLIP_RATIO,
    )


def batch_means_stderr(values: np.ndarray, segments: int = BATCH_SEGMENTS) -> float:
    """Standard error of the mean from ``segments`` equal contiguous batches."""
    values = np.asarray(values)
    size = len(values) // segments
    if size < 1:
        return math.nan
    means = values[: size * segments].reshape(segments, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(segments))


def delta_birkhoff(
    triple: HadamardTriple,
    b,
    n: int,
    seed: int = 0,
    stream: DigitStream | None = None,
    depth: int = ORBIT_DEPTH,
    eps: float = CLIP_EPS,
) -> DeltaEstimate:
    """(1/n) sum_{k<n} log|m_tau(R^k x - x_b)| along one sampled orbit."""
    if n < 1:
        raise ValueError("orbit length must be positive")
    b = _digit_vector(triple, b)
    if stream is None:
        stream = sample_stream(seed, 1, triple.N)[0]
    digits = stream.digits(n - 1 + depth)[None, :]
    factors = orbit_factors(triple, digits, fixed_anchor(triple, b), n - 1, depth, eps)
    logs = factors.logs[0]
    params = {
        "length": n,
        "seed": stream.seed,
        "stream_index": stream.index,
        "depth": depth,
        "eps": eps,
        "b": list(b),
    }
    return DeltaEstimate(
        math.fsum(logs) / n,
        "birkhoff",
        params,
        clipped_count=factors.clipped,
        stderr=batch_means_stderr(logs),
    )


@dataclass(frozen=True)
class GrowthReport:
    slope: float
    intercept: float
    max_deviation: float
    window: tuple[int, int]


def growth_rate(
    triple: HadamardTriple, b, stream: DigitStream, n_max: int, depth: int = ORBIT_DEPTH
) -> GrowthReport:
    """Least-squares slope of s_j = log|D_j(x - x_b)| against j over [n_max/2, n_max]."""
    if n_max < 100:
        raise ValueError("n_max must be at least 100")
    s = dirichlet_orbit_log(triple, stream, _digit_vector(triple, b), n_max, depth)
    lo = n_max // 2
    j = np.arange(lo, n_max + 1)
    window = s[lo:]
    slope, intercept = np.polyfit(j, window, 1)
    deviation = float(np.max(np.abs(window / j - slope)))
    return GrowthReport(float(slope), float(intercept), deviation, (lo, n_max))


# ---------------------------------------------------------------------------
# maximal operator tail


@dataclass(frozen=True)
class TailCurve:
    alphas: tuple[float, ...]
    n_max: int
    masses: tuple[float, ...]
    ci_low: tuple[float, ...]
    ci_high: tuple[float, ...]
    sample_count: int
    seed: int
    atoms: tuple[tuple[str, ...], ...]
    sup_log: np.ndarray = field(repr=False, compare=False, default=None)

    def to_csv(self) -> str:
        lines = [f"# {LEVEL_CONVENTION}", "alpha,mass,ci_low,ci_high,n_max,samples"]
        for a, m, lo, hi in zip(self.alphas, self.masses, self.ci_low, self.ci_high):
            lines.append(f"{a!r},{m!r},{lo!r},{hi!r},{self.n_max},{self.sample_count}")
        return "\n".join(lines) + "\n"


def _sup_log_partial_sums(triple, streams, atoms, n_max, depth, eps) -> np.ndarray:
    """log max_{n <= n_max} |S_n(nu)(x)| for the points encoded by ``streams``."""
    digits = digit_matrix(streams, n_max + depth)
    H = len(atoms)
    if H == 1:
        logs = orbit_factors(triple, digits, atoms[0], n_max, depth, eps).logs
        return np.cumsum(logs, axis=1).max(axis=1)
    cum_log, cum_arg = [], []
    for a in atoms:
        fac = orbit_factors(triple, digits, a, n_max, depth, eps, with_args=True)
        cum_log.append(np.cumsum(fac.logs, axis=1))
        cum_arg.append(np.cumsum(fac.args, axis=1))
    L = np.stack(cum_log)  # (H, S, n+1)
    A = np.stack(cum_arg)
    top = L.max(axis=0)
    total = np.exp(L - top + 1j * A).sum(axis=0)
    with np.errstate(divide="ignore"):
        log_s = top + np.log(np.abs(total)) - math.log(H)
    return log_s.max(axis=1)


def tail_distribution(
    triple: HadamardTriple,
    atoms,
    n_max: int,
    alphas: Sequence[float],
    sample_count: int,
    seed: int = 0,
    depth: int = ORBIT_DEPTH,
    eps: float = CLIP_EPS,
    workers: int = 1,
    chunk: int = 2048,
) -> TailCurve:
    """Empirical mu{x : max_{n<=n_max} |S_n(nu)(x)| > alpha} for nu = H^{-1} sum_h delta_{atom_h}.

    Samples x ~ mu come from ``sample_count`` seeded digit streams.  Every
    alpha is judged on the same sample set, so masses are non-increasing in
    alpha; each sample's sup only grows with ``n_max``.  Intervals are Wilson
    95%.  Chunks may run on ``workers`` threads; results are concatenated in
    chunk order.
    """
    alphas = tuple(float(a) for a in alphas)
    if any(a <= 0 for a in alphas) or any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be positive and strictly increasing")
    atoms_q = [rat.as_vector(a, triple.dim) for a in atoms]
    if not atoms_q:
        raise ValueError("need at least one atom")
    streams = sample_stream(seed, sample_count, triple.N)
    chunks = [streams[i : i + chunk] for i in range(0, sample_count, chunk)]

    def work(part):
        return _sup_log_partial_sums(triple, part, atoms_q, n_max, depth, eps)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    sup_log = np.concatenate(parts)

    masses, lows, highs = [], [], []
    for a in alphas:
        k = int(np.count_nonzero(sup_log > math.log(a)))
        ci = binomtest(k, sample_count).proportion_ci(confidence_level=0.95, method="wilson")
        masses.append(k / sample_count)
        lows.append(float(ci.low))
        highs.append(float(ci.high))
    return TailCurve(
        alphas,
        n_max,
        tuple(masses),
        tuple(lows),
        tuple(highs),
        sample_count,
        seed,
        tuple(tuple(str(c) for c in a) for a in atoms_q),
        sup_log,
    )


def default_tail_n_max(alpha: float, log_delta: float) -> int:
    """n_max = ceil(3 log(alpha) / log Delta): room for Delta^n to pass alpha."""
    if not log_delta > 0:
        raise ValueError("log Delta must be positive to size the orbit")
    return math.ceil(3 * math.log(alpha) / log_delta)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class ClassifyEntry:
    b: tuple[int, ...]
    quadrature: DeltaEstimate
    birkhoff: DeltaEstimate
    refinement_gap: float
    tolerance: float
    agree: bool
    satisfied: bool


@dataclass(frozen=True)
class ClassifyReport:
    triple: dict
    entries: tuple[ClassifyEntry, ...]
    verdict: str
    assumptions: dict

    def to_json(self) -> dict:
        rows = []
        for e in self.entries:
            rows.append(
                {
                    "b": list(e.b),
                    "log_delta_quadrature": e.quadrature.log_delta,
                    "log_delta_birkhoff": e.birkhoff.log_delta,
                    "stderr": e.birkhoff.stderr,
                    "clipped_count": e.quadrature.clipped_count + e.birkhoff.clipped_count,
                    "refinement_gap": e.refinement_gap,
                    "tolerance": e.tolerance,
                    "agree": e.agree,
                    "verdict": SATISFIED if e.satisfied else NOT_SATISFIED,
                    "quadrature": asdict(e.quadrature),
                    "birkhoff": asdict(e.birkhoff),
                }
            )
        return {
            "convention": LEVEL_CONVENTION,
            "triple": self.triple,
            "tau": self.triple["tau"],
            "assumptions": self.assumptions,
            "entries": rows,
            "verdict": self.verdict,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def classify(
    triple: HadamardTriple,
    depth: int = 12,
    n: int = 100_000,
    seed: int = 0,
    anchor="center",
    eps: float = CLIP_EPS,
    orbit_depth: int = ORBIT_DEPTH,
    floor: float = AGREEMENT_FLOOR,
    assume_doubling: bool = True,
    assume_complete: bool = True,
) -> ClassifyReport:
    """Apply the Delta > 1 criterion to every digit of B.

    A digit passes when both estimators exceed max(2 stderr, floor); the
    overall verdict is the disjunction over digits.  Estimators that differ by
    more than that tolerance raise :class:`MethodDisagreement`, and a
    quadrature that is clip-dominated or moves by more than 0.01 between
    ``depth`` and ``depth + 2`` raises :class:`Unreliable`.
    """
    if triple.dim > 1 and not triple.R.is_symmetric:
        raise DimensionalityNote("the classification criterion is stated for symmetric R only")
    stream = sample_stream(seed, 1, triple.N)[0]
    entries = []
    for b in triple.B.digits:
        quad = delta_quadrature(triple, b, depth, eps=eps, anchor=anchor)
        finer = delta_quadrature(triple, b, depth + 2, eps=eps, anchor=anchor)
        gap = abs(finer.log_delta - quad.log_delta)
        birk = delta_birkhoff(triple, b, n, stream=stream, depth=orbit_depth, eps=eps)
        tol = max(2 * birk.stderr, floor)
        agree = abs(quad.log_delta - birk.log_delta) <= tol
        satisfied = quad.log_delta > tol and birk.log_delta > tol
        entries.append(ClassifyEntry(b, quad, birk, gap, tol, agree, satisfied))
        if quad.unreliable or finer.unreliable or gap >= REFINEMENT_TOL:
            report = _report(triple, entries, "withheld", assume_doubling, assume_complete)
            raise Unreliable(
                f"quadrature for b={b} is unreliable (clipped {quad.clipped_count}, "
                f"refinement gap {gap:.3g})",
                report,
            )
    verdict = SATISFIED if any(e.satisfied for e in entries) else NOT_SATISFIED
    if not all(e.agree for e in entries):
        report = _report(triple, entries, "withheld", assume_doubling, assume_complete)
        bad = [e.b for e in entries if not e.agree]
        raise MethodDisagreement(f"quadrature and Birkhoff estimates disagree for b in {bad}", report)
    return _report(triple, entries, verdict, assume_doubling, assume_complete)


def _report(triple, entries, verdict, doubling, complete) -> ClassifyReport:
    return ClassifyReport(
        triple.describe(),
        tuple(entries),
        verdict,
        {"doubling": doubling, "complete_spectrum": complete},
    )
