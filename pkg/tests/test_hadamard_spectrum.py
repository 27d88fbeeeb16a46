import cmath
import itertools
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mocklab.errors import (
    BudgetExceeded,
    CardinalityMismatch,
    DegenerateSpectrum,
    NotHadamard,
    ValidationError,
)
from mocklab.hadamard_spectrum import (
    check_unitary,
    make_triple,
    mu_hat,
    mu_hat_tail_bound,
    orthonormality_defect,
    quarter_cantor,
    spectrum_csv,
    spectrum_level,
)

SQUARE = make_triple([[2, 0], [0, 2]], [[0, 0], [1, 0], [0, 1], [1, 1]], [[0, 0], [1, 0], [0, 1], [1, 1]])
SHEAR = make_triple([[2, 1], [0, 2]], [[0, 0], [0, 1]], [[0, 0], [0, 1]])


def test_unitarity_examples():
    assert check_unitary([[4]], [[0], [2]], [[0], [1]]) < 1e-15
    assert check_unitary([[4]], [[-1], [1]], [[0], [1]]) < 1e-15
    assert check_unitary([[4]], [[0], [1]], [[0], [1]]) > 0.2


def test_unitarity_oracle_two_by_two():
    # <c_1, c_2> for B={0,1}, L={0,1}, R=4 is (1 + e^{2 pi i/4}) / 2
    expected = abs(1 + cmath.exp(2j * math.pi / 4)) / 2
    assert check_unitary([[4]], [[0], [1]], [[0], [1]]) == pytest.approx(expected, abs=1e-15)


def test_cardinality_and_triple_validation():
    with pytest.raises(CardinalityMismatch):
        check_unitary([[4]], [[0], [2]], [[0]])
    with pytest.raises(NotHadamard) as info:
        make_triple([[4]], [[0], [1]], [[0], [1]])
    assert info.value.defect > 0.2
    with pytest.raises(ValidationError):
        make_triple([[4]], [[0], [2]], [[0], [1]], tau=0)
    with pytest.raises(ValidationError):
        make_triple([[4]], [[0], [2]], [[0], [0]])
    with pytest.raises(ValidationError):
        make_triple([[4]], [[0], [2]], [[0], [0.5]])


@given(st.permutations(range(4)), st.permutations(range(4)))
def test_unitarity_is_order_invariant(pb, pl):
    B = [[0, 0], [1, 0], [0, 1], [1, 1]]
    base = check_unitary([[2, 0], [0, 2]], B, B)
    again = check_unitary([[2, 0], [0, 2]], [B[i] for i in pb], [B[i] for i in pl])
    assert abs(base - again) <= 1e-15


def test_spectrum_examples():
    qc1, qc17 = quarter_cantor(1), quarter_cantor(17)
    assert spectrum_level(qc1, 0).as_tuples() == [(0,), (1,)]
    assert sorted(spectrum_level(qc1, 1).as_tuples()) == [(0,), (1,), (4,), (5,)]
    assert sorted(spectrum_level(qc17, 1).as_tuples()) == [(0,), (17,), (68,), (85,)]


def _brute_level(triple, n):
    Rt = np.array(triple.R.entries, dtype=object).T
    out = set()
    for choice in itertools.product(triple.L, repeat=n + 1):
        v = np.zeros(triple.dim, dtype=object)
        for k, l in enumerate(choice):
            v = v + np.linalg.matrix_power(Rt, k).dot(np.array(l, dtype=object))
        out.add(tuple(int(triple.tau * c) for c in v))
    return out


@pytest.mark.parametrize("triple", [quarter_cantor(17), SQUARE, SHEAR], ids=["qc17", "square", "shear"])
@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_spectrum_matches_brute_force(triple, n):
    level = spectrum_level(triple, n)
    assert set(level.as_tuples()) == _brute_level(triple, n)
    assert len(level) == triple.N ** (n + 1)
    assert all(c % triple.tau == 0 for row in level.as_tuples() for c in row)


@pytest.mark.parametrize("triple", [quarter_cantor(1), SHEAR], ids=["qc1", "shear"])
@pytest.mark.parametrize("n", range(5))
def test_spectrum_recursion(triple, n):
    # Lambda_{n+1} = L + R^t Lambda_n
    Rt = np.array(triple.R.entries, dtype=np.int64).T
    prev = spectrum_level(triple, n).elements
    rec = {tuple(int(c) for c in np.array(l) + Rt @ p) for l in triple.L for p in prev}
    assert rec == set(spectrum_level(triple, n + 1).as_tuples())


def test_spectrum_budget_and_degeneracy():
    with pytest.raises(BudgetExceeded):
        spectrum_level(quarter_cantor(1), 25)
    # valid triples never collide, so install L = {0, 1, 3} by hand: 3 + 3*0 = 0 + 3*1
    base = make_triple([[3]], [[0], [1], [2]], [[0], [1], [2]])
    bad = replace(base, L=((0,), (1,), (3,)))
    with pytest.raises(DegenerateSpectrum):
        spectrum_level(bad, 1)


def test_spectrum_csv_header_and_rows():
    text = spectrum_csv(spectrum_level(quarter_cantor(17), 1))
    lines = text.splitlines()
    assert lines[0].startswith("# ") and "sum_{k=0}^{n}" in lines[0]
    assert lines[1] == "level,tau,component_0"
    assert lines[2:] == ["1,17,0", "1,17,68", "1,17,17", "1,17,85"]
    assert "\r" not in text


def _cosine_product(xi, K):
    # B = {0, 2}, R = 4: M_B(eta) = e(eta) cos(2 pi eta)
    phase = cmath.exp(2j * math.pi * xi * (1 - 4.0**-K) / 3)
    return phase * math.prod(math.cos(2 * math.pi * xi / 4**k) for k in range(1, K + 1))


def test_mu_hat_examples():
    qc = quarter_cantor(1)
    assert mu_hat(qc, [0], 1) == 1
    assert mu_hat(qc, [0], 40) == 1
    assert abs(mu_hat(qc, [1], 1)) < 1e-15
    assert abs(mu_hat(qc, [1], 40)) < 1e-15
    # every odd integer is a zero: the k=1 factor is cos(pi xi / 2)
    assert abs(mu_hat(qc, [3], 40)) < 1e-15
    v = mu_hat(qc, [2], 40)
    assert abs(v) > 0.1
    assert v == pytest.approx(_cosine_product(2, 40), abs=1e-12)


@given(st.fractions(min_value=-200, max_value=200, max_denominator=64), st.integers(1, 45))
def test_mu_hat_matches_cosine_product(xi, K):
    v = mu_hat(quarter_cantor(1), [xi], K)
    assert abs(v) <= 1 + 1e-15
    assert v == pytest.approx(_cosine_product(float(xi), K), abs=1e-9)


@given(st.lists(st.integers(-50, 50), min_size=2, max_size=2), st.integers(2, 30))
def test_mu_hat_stabilizes_within_tail_bound(xi, K):
    step = abs(mu_hat(SHEAR, xi, K) - mu_hat(SHEAR, xi, K + 1))
    assert step <= mu_hat_tail_bound(SHEAR, xi, K) + 1e-14


def test_orthonormality_examples():
    d1 = orthonormality_defect(quarter_cantor(1), 2, 40)
    assert d1.max_offdiagonal < 1e-10
    assert d1.diagonal == 0
    d17 = orthonormality_defect(quarter_cantor(17), 2, 40)
    assert d17.max_offdiagonal < 1e-6
    single = orthonormality_defect(quarter_cantor(17), 0, 40)
    assert {single.worst_pair} == {((0,), (17,))}
    assert single.max_offdiagonal == pytest.approx(abs(mu_hat(quarter_cantor(17), [17], 40)), rel=1e-12)


def test_orthonormality_in_the_plane():
    assert orthonormality_defect(SQUARE, 1, 40).max_offdiagonal < 1e-12
