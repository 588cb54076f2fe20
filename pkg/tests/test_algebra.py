from fractions import Fraction
from math import factorial
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbnf.algebra import (
    GaussianRational,
    WeylSeries,
    change_chart,
    commutative_product,
    harmonic_oscillator,
    heat_transform,
    ihbar_bracket,
    moyal_bracket,
    moyal_product,
    poisson_bracket,
)
from strategies import homogeneous_series, real_series, series

I = GaussianRational(0, 1)


def brute_moyal(A, B, W):
    """Weyl product from the factorized exponential, one variable pair at a time."""
    n = A.n
    out = WeylSeries.zero(n, max_weight=W)
    top = W  # derivative orders beyond W cannot survive truncation
    ranges = [range(top + 1)] * (2 * n)
    for st_ in product(*ranges):
        s, t = st_[:n], st_[n:]
        k = sum(s) + sum(t)
        if k > top:
            continue
        dA, dB = A, B
        for j in range(n):
            for _ in range(s[j]):
                dA, dB = dA.derivative(j), dB.derivative(n + j)
            for _ in range(t[j]):
                dA, dB = dA.derivative(n + j), dB.derivative(j)
        if not dA or not dB:
            continue
        coef = GaussianRational(1)
        for j in range(n):
            coef = coef * (I * Fraction(1, 2)) ** s[j] * (-I * Fraction(1, 2)) ** t[j]
            coef = coef * Fraction(1, factorial(s[j]) * factorial(t[j]))
        term = commutative_product(dA, dB, W).times_hbar(k).scale(coef)
        out = out + term.with_max_weight(W)
    return out.with_max_weight(W)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_canonical_commutator(n):
    for j in range(n):
        xi = WeylSeries.generator(n, "xi", j, max_weight=4)
        x = WeylSeries.generator(n, "x", j, max_weight=4)
        hbar = WeylSeries.generator(n, "hbar", max_weight=4)
        assert moyal_bracket(xi, x) == hbar.scale(-I)
        for k in range(n):
            if k != j:
                assert not moyal_bracket(xi, WeylSeries.generator(n, "x", k, max_weight=4))


@settings(max_examples=25)
@given(real_series(n=1, hi=5), real_series(n=1, hi=5))
def test_moyal_matches_direct_expansion_1d(A, B):
    W = 8
    A, B = A.with_max_weight(W), B.with_max_weight(W)
    assert moyal_product(A, B, W) == brute_moyal(A, B, W)


@settings(max_examples=10)
@given(real_series(n=2, hi=4, max_terms=3), real_series(n=2, hi=4, max_terms=3))
def test_moyal_matches_direct_expansion_2d(A, B):
    W = 6
    A, B = A.with_max_weight(W), B.with_max_weight(W)
    assert moyal_product(A, B, W) == brute_moyal(A, B, W)


@settings(max_examples=15)
@given(real_series(n=2, hi=4, max_terms=3), real_series(n=2, hi=4, max_terms=3), real_series(n=2, hi=4, max_terms=3))
def test_associativity(A, B, C):
    W = 8
    A, B, C = (s.with_max_weight(W) for s in (A, B, C))
    assert moyal_product(moyal_product(A, B), C) == moyal_product(A, moyal_product(B, C))


@settings(max_examples=30)
@given(homogeneous_series(n=2, w=3), homogeneous_series(n=2, w=4))
def test_bracket_divisible_by_hbar_and_filtered(A, B):
    br = moyal_bracket(A, B)
    assert br == -moyal_bracket(B, A)
    assert all(k[-1] >= 1 for k in br)
    assert br.min_weight() is None or br.min_weight() >= 7
    # (i/hbar)[A,B] and the commutator agree after multiplying back
    assert ihbar_bracket(A, B).times_hbar(1).scale(-I) == br


@settings(max_examples=30)
@given(real_series(n=2, lo=1, hi=6, max_terms=6))
def test_quadratic_bracket_is_poisson(A):
    H2 = harmonic_oscillator([1, Fraction(3, 2)], max_weight=6)
    A = A.with_max_weight(6)
    assert ihbar_bracket(H2, A) == poisson_bracket(H2, A)


@settings(max_examples=40)
@given(real_series(n=2, hi=6, max_terms=6), st.sampled_from(["birkhoff", "bargmann"]))
def test_chart_round_trip(A, convention):
    C = change_chart(A, "complex", convention)
    assert C.is_real()
    assert change_chart(C, "real") == A
    other = "bargmann" if convention == "birkhoff" else "birkhoff"
    assert change_chart(change_chart(C, "complex", other), "real") == A


@settings(max_examples=20)
@given(real_series(n=2, hi=5, max_terms=5), st.sampled_from(["birkhoff", "bargmann"]))
def test_chart_change_preserves_values(A, convention):
    rng = np.random.default_rng(1)
    x, xi = rng.normal(size=(2, 7, 2))
    C = change_chart(A, "complex", convention)
    np.testing.assert_allclose(C.evaluate(x, xi, 0.3), A.evaluate(x, xi, 0.3), rtol=1e-10, atol=1e-10)


@settings(max_examples=20)
@given(real_series(n=2, hi=6, max_terms=4), st.sampled_from(["birkhoff", "bargmann"]))
def test_charts_carry_the_same_product(A, convention):
    B = harmonic_oscillator([1, 2], max_weight=6) + WeylSeries(2, {(1, 0, 2, 0, 0): 1}, max_weight=6)
    A = A.with_max_weight(6)
    direct = moyal_product(A, B)
    via = moyal_product(change_chart(A, "complex", convention), change_chart(B, "complex", convention))
    assert change_chart(via, "real") == direct


@settings(max_examples=30)
@given(real_series(n=2, hi=6, max_terms=5), st.fractions(min_value=-2, max_value=2, max_denominator=4))
def test_heat_transform_inverts(A, s):
    assert heat_transform(heat_transform(A, s), -s) == A
    B = change_chart(A, "complex", "bargmann")
    assert heat_transform(heat_transform(B, s), -s) == B


def test_heat_transform_in_real_and_complex_charts_agree():
    A = series(1, {(4, 0, 0): 1, (2, 2, 0): 3, (0, 2, 1): -2}, 6)
    real = heat_transform(A, Fraction(1, 2))
    cplx = heat_transform(change_chart(A, "complex", "bargmann"), Fraction(1, 2))
    assert change_chart(cplx, "real") == real


def test_product_is_hermitian_compatible():
    A = series(2, {(1, 0, 0, 1, 0): 1, (2, 0, 0, 0, 0): 2}, 6)
    B = series(2, {(0, 1, 1, 0, 0): 1, (0, 0, 1, 1, 1): -1}, 6)
    assert moyal_product(A, B).conj() == moyal_product(B.conj(), A.conj())


def test_truncation_drops_high_weights():
    x = WeylSeries.generator(1, "x", max_weight=3)
    x2 = moyal_product(x, x)
    assert x2 == series(1, {(2, 0, 0): 1}, 3)
    x4 = moyal_product(x2, x2)
    assert not x4


def test_series_json_round_trip():
    A = series(2, {(1, 2, 0, 0, 1): Fraction(-3, 7), (0, 0, 2, 2, 0): 5}, 8)
    assert WeylSeries.from_json(A.to_json()) == A
    C = change_chart(A, "complex", "bargmann")
    assert WeylSeries.from_json(C.to_json()) == C


def test_gaussian_rational_arithmetic():
    a = GaussianRational(Fraction(1, 2), 3)
    b = GaussianRational(-2, Fraction(1, 3))
    assert (a * b) / b == a
    assert a + b - b == a
    assert (a * a.conj()).is_real()
    assert complex(a) == 0.5 + 3j


def test_weight_rejects_bad_keys():
    with pytest.raises(ValueError):
        WeylSeries(1, {(1, 0): 1})
    with pytest.raises(ValueError):
        WeylSeries(1, {(-1, 0, 0): 1})
