import cmath
import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from mocklab import _rational as rat
from mocklab.affine_ifs import build_quadrature, constant_stream, digit_matrix, encode, fixed_anchor, sample_stream
from mocklab.divergence_lab import delta_quadrature
from mocklab.hadamard_spectrum import make_triple, mu_hat, quarter_cantor, spectrum_level
from mocklab.mock_fourier import (
    atom_orbit,
    dirichlet_direct,
    dirichlet_orbit_log,
    dirichlet_product,
    exponential,
    kernel_defect,
    kernel_trace,
    kernel_trace_csv,
    l0_distance,
    m_tau_eval,
    mock_coefficient,
    orbit_factors,
    partial_sum,
    partial_sum_discrete,
    trig_poly,
)

QC1, QC17 = quarter_cantor(1), quarter_cantor(17)
SQUARE = make_triple([[2, 0], [0, 2]], [[0, 0], [1, 0], [0, 1], [1, 1]], [[0, 0], [1, 0], [0, 1], [1, 1]])
SHEAR = make_triple([[2, 1], [0, 2]], [[0, 0], [0, 1]], [[0, 0], [0, 1]])

unit_fractions = st.fractions(min_value=0, max_value=1, max_denominator=10**9)


def test_m_tau_examples():
    assert m_tau_eval(trig_poly(QC1), [0]) == 2
    assert abs(m_tau_eval(trig_poly(QC1), [F(1, 2)])) < 1e-15
    assert m_tau_eval(trig_poly(QC17), [F(1, 4)]) == pytest.approx(1 + 1j, abs=1e-15)


@given(st.lists(st.floats(0, 1, exclude_max=True), min_size=1, max_size=20))
def test_m_tau_vectorized_matches_pointwise(xs):
    poly = trig_poly(QC17)
    arr = np.array(xs)[:, None]
    vec = m_tau_eval(poly, arr)
    for x, v in zip(xs, vec):
        # the array path reduces 17 x in floating point, the point path exactly
        assert v == pytest.approx(m_tau_eval(poly, [x]), abs=1e-13)


def test_direct_kernel_examples():
    for x in ([F(0)], [F(3, 7)], [F(1, 9)]):
        assert dirichlet_direct(QC17, 0, x).value == pytest.approx(m_tau_eval(trig_poly(QC17), x), abs=1e-14)
    for n in range(5):
        assert dirichlet_direct(QC1, n, [0]).value == 2 ** (n + 1)
        assert dirichlet_product(QC1, n, [0]).value == 2 ** (n + 1)
    assert abs(dirichlet_direct(QC1, 1, [F(1, 2)]).value) < 1e-15


def test_product_zero_factor_is_flagged():
    ev = dirichlet_product(QC1, 3, [F(1, 2)])
    assert ev.value == 0 and ev.log_magnitude == -math.inf and ev.zero_factors == 1


@pytest.mark.parametrize("triple", [QC1, QC17], ids=["tau1", "tau17"])
def test_kernel_equivalence_on_seeded_points(triple):
    xs = np.random.default_rng(0).random(100)
    assert max(kernel_defect(triple, n, [x]) for n in range(7) for x in xs) < 1e-9


@given(st.lists(unit_fractions, min_size=2, max_size=2), st.integers(0, 5))
def test_kernel_equivalence_in_the_plane(x, n):
    assert kernel_defect(SQUARE, n, x) < 1e-9
    assert kernel_defect(SHEAR, n, x) < 1e-9


def _rel(a: complex, b: complex) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


@given(unit_fractions, st.sampled_from([1, 17]), st.integers(0, 200))
def test_recursion_holds_in_product_mode(x, tau, n):
    # D_{n+1}(x) = m_tau(x) D_n(R^t x)
    triple = QC1 if tau == 1 else QC17
    lhs = dirichlet_product(triple, n + 1, [x]).value
    rhs = m_tau_eval(trig_poly(triple), [x]) * dirichlet_product(triple, n, [4 * x]).value
    if lhs == 0:
        assert abs(rhs) < 1e-15 * 2 ** (n + 2)
    else:
        assert _rel(lhs, rhs) < 1e-10


@given(unit_fractions, st.integers(-50, 50), st.integers(0, 60))
def test_kernel_is_integer_periodic(x, z, n):
    a = dirichlet_product(QC17, n, [x])
    b = dirichlet_product(QC17, n, [x + z])
    assert a == b


@given(st.lists(unit_fractions, min_size=2, max_size=2), st.lists(st.integers(-9, 9), min_size=2, max_size=2))
def test_kernel_is_periodic_in_the_plane(x, z):
    shifted = rat.vec_add(x, z)
    assert _rel(dirichlet_direct(SHEAR, 3, x).value + 1e-300, dirichlet_direct(SHEAR, 3, shifted).value + 1e-300) < 1e-10


def test_kernel_trace_matches_individual_orders():
    x = [F(2, 7)]
    trace = kernel_trace(QC17, 8, x)
    for n, ev in enumerate(trace):
        assert ev.order == n
        assert ev.value == dirichlet_product(QC17, n, x).value


def test_log_magnitude_survives_long_products():
    ev = dirichlet_product(QC17, 5000, [F(1, 3)])
    assert math.isfinite(ev.log_magnitude)
    short = dirichlet_product(QC17, 100, [F(1, 3)])
    assert short.log_magnitude == pytest.approx(math.log(abs(short.value)), rel=1e-12)


def test_kernel_trace_csv_schema():
    text = kernel_trace_csv(kernel_trace(QC1, 2, [F(1, 5)]))
    lines = text.split("\n")
    assert lines[0].startswith("# ")
    assert lines[1] == "n,re,im,log_magnitude,mode"
    assert len([l for l in lines[2:] if l]) == 3
    row = lines[2].split(",")
    assert float(row[1]) == float(repr(float(row[1])))


# --- orbit mode ---------------------------------------------------------------


def test_orbit_of_all_zero_stream():
    s = dirichlet_orbit_log(QC17, constant_stream(0, 2), [0], 50)
    assert s == pytest.approx([(j + 1) * math.log(2) for j in range(51)], rel=1e-13)


@given(st.lists(st.integers(0, 1), min_size=56, max_size=56))
def test_orbit_mode_in_the_plane(indices):
    # non-symmetric R: the shift still realises x -> R x mod Z^2.  The Jordan
    # block makes window truncation decay like k 2^-k, hence the full depth.
    n, depth = 8, 48
    atom = fixed_anchor(SHEAR, [0, 1])
    fac = orbit_factors(SHEAR, np.array(indices)[None, :], atom, n, depth)
    trace = kernel_trace(SHEAR, n, rat.vec_sub(encode(SHEAR, indices), atom))
    assume(fac.clipped == 0 and np.min(fac.logs) > math.log(1e-3))
    assert np.cumsum(fac.logs) == pytest.approx([e.log_magnitude for e in trace], abs=1e-8)


def test_atom_orbit_detects_cycles():
    states, idx = atom_orbit(QC1, [F(8, 3)], 10)
    assert states == [(F(2, 3),)]
    assert list(idx) == [0] * 11
    states, idx = atom_orbit(QC1, [F(1, 5)], 6)
    assert states == [(F(1, 5),), (F(4, 5),)]
    assert list(idx) == [0, 1, 0, 1, 0, 1, 0]
    states, idx = atom_orbit(QC1, [F(1, 2)], 4)
    assert states == [(F(1, 2),), (F(0),)]
    assert list(idx) == [0, 1, 1, 1, 1]


@given(st.lists(st.integers(0, 1), min_size=60, max_size=60), st.sampled_from([0, 2]), st.sampled_from([1, 17]))
def test_orbit_mode_matches_product_mode(indices, b, tau):
    triple = QC1 if tau == 1 else QC17
    n, depth = 12, 48
    digits = np.array(indices)[None, :]
    fac = orbit_factors(triple, digits, fixed_anchor(triple, [b]), n, depth)
    x = rat.vec_sub(encode(triple, indices), fixed_anchor(triple, [b]))
    trace = kernel_trace(triple, n, x)
    assume(fac.clipped == 0 and np.min(fac.logs) > math.log(1e-6))
    assert np.cumsum(fac.logs) == pytest.approx([e.log_magnitude for e in trace], abs=1e-9)


def test_tau1_orbit_growth_is_not_positive():
    for stream in sample_stream(3, 20, 2):
        s = dirichlet_orbit_log(QC1, stream, [2], 200)
        assert s[200] / 200 <= 0.01


def test_tau17_orbit_growth_tracks_delta():
    ref = delta_quadrature(QC17, [2], 12).log_delta
    s = dirichlet_orbit_log(QC17, sample_stream(0, 1, 2)[0], [2], 10_000)
    assert abs(s[10_000] / 10_000 - ref) <= 0.02


# --- coefficients and partial sums --------------------------------------------

RULE = build_quadrature(QC17, 10, anchor="center")


def test_coefficient_examples():
    assert mock_coefficient(lambda x: np.ones(len(x)), [0], RULE) == pytest.approx(1, abs=1e-15)
    lam0 = [68]
    assert mock_coefficient(exponential(lam0), lam0, RULE) == pytest.approx(1, abs=1e-12)
    level = spectrum_level(QC17, 2).as_tuples()
    for lam in level:
        if list(lam) != lam0:
            c = mock_coefficient(exponential(lam0), lam, RULE)
            assert abs(c) < 1e-6


def test_coefficient_tracks_mu_hat():
    # with the center anchor the rule integrates e(xi . x) with mu_hat's truncated product
    for xi in (1, 2, 5, 6):
        c = mock_coefficient(lambda x: np.ones(len(x)), [-xi], build_quadrature(QC1, 12, anchor="corner"))
        assert c == pytest.approx(mu_hat(QC1, [xi], 12), abs=1e-12)


SAMPLES = [encode(QC17, r) for r in digit_matrix(sample_stream(2, 12, 2), 20)]


def test_partial_sum_reproduces_basis_vectors():
    lam0 = spectrum_level(QC17, 2).as_tuples()[5]
    vals = partial_sum(QC17, exponential(lam0), 2, SAMPLES, RULE)
    for x, v in zip(SAMPLES, vals):
        assert v == pytest.approx(cmath.exp(2j * math.pi * lam0[0] * float(x[0])), abs=1e-6)
    ones = partial_sum(QC17, lambda x: np.ones(len(x)), 2, SAMPLES, RULE)
    assert np.allclose(ones, 1, atol=1e-6)


def test_partial_sum_paths_agree():
    f = lambda x: np.cos(3 * x[:, 0]) + 1j * x[:, 0] ** 2  # noqa: E731
    rule = build_quadrature(QC1, 8)
    a = partial_sum(QC1, f, 3, SAMPLES, rule, path="coefficients")
    b = partial_sum(QC1, f, 3, SAMPLES, rule, path="kernel")
    for u, v in zip(a, b):
        assert abs(u - v) <= 1e-9 * max(1.0, abs(u))
    with pytest.raises(ValueError):
        partial_sum(QC1, f, 1, SAMPLES, rule, path="fft")


def test_partial_sums_approach_identity_function():
    rule = build_quadrature(QC1, 10)
    xs = [encode(QC1, r) for r in digit_matrix(sample_stream(0, 50, 2), 30)]
    fx = np.array([float(x[0]) for x in xs])

    def dist(n):
        d = np.abs(np.array(partial_sum(QC1, lambda x: x[:, 0], n, xs, rule)) - fx)
        return float(np.mean(d / (1 + d)))

    assert dist(6) < dist(4)


def test_parseval_at_desk_scale():
    rule = build_quadrature(QC1, 10)
    f = lambda x: x[:, 0] ** 2  # noqa: E731
    energy = l0_free = math.fsum(np.abs(f(rule.coords)) ** 2) / rule.size
    coeffs = [mock_coefficient(f, lam, rule) for lam in spectrum_level(QC1, 5).as_tuples()]
    assert sum(abs(c) ** 2 for c in coeffs) <= energy + 1e-9
    # a finite combination of basis exponentials reaches equality
    g = lambda x: exponential([1])(x) + 2 * exponential([5])(x)  # noqa: E731
    gc = [mock_coefficient(g, lam, rule) for lam in spectrum_level(QC1, 2).as_tuples()]
    assert sum(abs(c) ** 2 for c in gc) == pytest.approx(5, abs=1e-9)
    assert l0_free == energy


def test_discrete_partial_sums():
    xs = [[F(1, 7)], [F(2, 5)]]
    d = [dirichlet_product(QC17, 3, x).value for x in xs]
    assert partial_sum_discrete(QC17, [[0]], 3, xs) == pytest.approx(d, abs=1e-12)
    atom = [F(8, 3)]
    assert partial_sum_discrete(QC17, [atom], 3, [atom])[0] == pytest.approx(16, abs=1e-12)
    assert partial_sum_discrete(QC17, [atom, atom], 3, xs) == partial_sum_discrete(QC17, [atom], 3, xs)
    with pytest.raises(ValueError):
        partial_sum_discrete(QC17, [], 3, xs)


def test_l0_distance_examples():
    rule = build_quadrature(QC1, 10)
    f = lambda x: x[:, 0]  # noqa: E731
    assert l0_distance(f, f, rule) == 0
    assert l0_distance(lambda x: np.ones(len(x)), lambda x: np.zeros(len(x)), rule) == 0.5
    zero = lambda x: np.zeros(len(x))  # noqa: E731
    coarse = l0_distance(f, zero, rule)
    fine = l0_distance(f, zero, build_quadrature(QC1, 14))
    assert 0 < coarse < 1 and abs(coarse - fine) < 1e-3
