from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbnf.algebra import WeylSeries, change_chart, harmonic_oscillator, ihbar_bracket, moyal_bracket
from qbnf.birkhoff import (
    HomologicalError,
    NormalFormResult,
    action_polynomial,
    adjoint_eigenvalue,
    birkhoff_normal_form,
    classical_normal_form,
    conjugation_residual,
    evaluate_action_polynomial,
    harmonic_frequencies,
    is_resonant_key,
    leading_resonant_terms,
    solve_homological,
)
from strategies import homogeneous_series, random_series, series

F = Fraction


def quartic_1d(W=10):
    return harmonic_oscillator([1], max_weight=W), series(1, {(4, 0, 0): 1}, W)


def test_quartic_action_polynomial():
    H2, L = quartic_1d()
    f = action_polynomial(birkhoff_normal_form(H2, L, 10).normal_form())
    # first- and second-order Rayleigh-Schroedinger terms written in I = hbar (n + 1/2)
    assert f[((1,), 0)] == 1
    assert f[((2,), 0)] == F(3, 2)
    assert f[((0,), 2)] == F(3, 8)
    assert f[((3,), 0)] == F(-17, 4)
    assert f[((1,), 2)] == F(-67, 16)


def test_cubic_action_polynomial():
    H2 = harmonic_oscillator([1], max_weight=6)
    L = series(1, {(3, 0, 0): 1}, 6)
    f = action_polynomial(birkhoff_normal_form(H2, L, 6).normal_form())
    assert f == {((1,), 0): 1, ((2,), 0): F(-15, 4), ((0,), 2): F(-7, 16),
                 ((3,), 0): F(-705, 16), ((1,), 2): F(-1155, 64)}


def test_quartic_levels_match_exact_expectations():
    H2, L = quartic_1d(4)
    f = action_polynomial(birkhoff_normal_form(H2, L, 4).normal_form())
    hbar = 0.01
    for n in range(5):
        # <n| x^4 |n> = hbar^2 (6 n^2 + 6 n + 3) / 4
        expected = hbar * (n + 0.5) + hbar**2 * (6 * n * n + 6 * n + 3) / 4
        assert evaluate_action_polynomial(f, [hbar * (n + 0.5)], hbar) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("n, nu", [(1, [1]), (2, [1, 1]), (2, [1, 2]), (2, [2, 3])])
def test_conjugation_is_exact(n, nu):
    rng = np.random.default_rng(len(nu) * 7 + sum(nu))
    W = 6
    H2 = harmonic_oscillator(nu, max_weight=W)
    for _ in range(2):
        L = random_series(rng, n, 3, W, 5, W)
        res = birkhoff_normal_form(H2, L, W)
        assert not conjugation_residual(res, L)
        K = res.K_total()
        H2c = change_chart(H2, "complex", "birkhoff")
        assert not moyal_bracket(K, H2c, W + 2)
        assert K.is_real() and res.A_total().is_real()
        for piece in res.A:
            assert all(not is_resonant_key(k, res.nu) for k in piece)


@settings(max_examples=30)
@given(homogeneous_series(n=2, w=4, max_terms=6), st.sampled_from([[1, 1], [1, 2], [2, 3], [1, 3]]))
def test_homological_equation(R, nu):
    H2 = change_chart(harmonic_oscillator(nu, max_weight=12), "complex", "birkhoff")
    A, K = solve_homological(R, H2)
    Rc = change_chart(R, "complex", "birkhoff")
    assert ihbar_bracket(H2, A) == Rc - K
    assert all(is_resonant_key(k, nu) for k in K)


def test_adjoint_eigenvalue_is_frequency_combination():
    nu = [F(1), F(3, 2)]
    key = (2, 0, 0, 1, 0)  # z1^2 zbar2
    lam = adjoint_eigenvalue(key, nu)
    assert lam.re == 0 and abs(lam.im) == 2 * nu[0] - nu[1]


def test_nonresonant_third_order_vanishes():
    W = 3
    H2 = harmonic_oscillator([1, 3], max_weight=W)
    L = series(2, {(3, 0, 0, 0, 0): 1, (1, 1, 0, 1, 0): 2, (0, 3, 0, 0, 0): 1}, W)
    assert not birkhoff_normal_form(H2, L, W).K_piece(3)


def test_leading_terms_agree_with_full_normal_form():
    W = 4
    H2 = harmonic_oscillator([1, 2], max_weight=W)
    L = series(2, {(2, 1, 0, 0, 0): 1, (1, 2, 0, 0, 0): F(1, 2), (0, 3, 0, 0, 0): F(1, 3),
                   (4, 0, 0, 0, 0): F(1, 7), (1, 1, 1, 1, 0): -1}, W)
    res = birkhoff_normal_form(H2, L, W)
    k3, k4, a3 = leading_resonant_terms(L.homogeneous_part(3), L.homogeneous_part(4), [1, 2])
    assert res.K_piece(3) == k3.with_max_weight(W)
    assert res.K_piece(4).drop_hbar() == k4.with_max_weight(W)
    assert classical_normal_form(res) == change_chart((k3 + k4).with_max_weight(W), "real")


def test_result_round_trip():
    H2, L = quartic_1d(6)
    res = birkhoff_normal_form(H2, L, 6)
    back = NormalFormResult.from_dict(res.to_dict())
    assert back.K == res.K and back.A == res.A and back.nu == res.nu


def test_harmonic_frequencies_validation():
    assert harmonic_frequencies(harmonic_oscillator([1, F(5, 3)])) == (1, F(5, 3))
    with pytest.raises(ValueError):
        harmonic_frequencies(series(1, {(2, 0, 0): 1, (0, 2, 0): 2}, 4))
    with pytest.raises(ValueError):
        harmonic_frequencies(series(1, {(2, 0, 0): -1, (0, 2, 0): -1}, 4))
    with pytest.raises(ValueError):
        harmonic_frequencies(series(1, {(2, 0, 0): 1, (0, 2, 0): 1, (1, 1, 0): 1}, 4))


def test_perturbation_must_start_at_weight_three():
    H2 = harmonic_oscillator([1], max_weight=4)
    with pytest.raises(ValueError):
        birkhoff_normal_form(H2, series(1, {(2, 0, 0): 1}, 4), 4)


def test_action_polynomial_rejects_resonant_exchange():
    K = WeylSeries(2, {(1, 0, 0, 1, 0): 1, (0, 1, 1, 0, 0): 1}, chart="complex", max_weight=4)
    with pytest.raises(ValueError):
        action_polynomial(K)


def test_vectorized_action_polynomial():
    f = {((1, 0), 0): F(1), ((0, 1), 0): F(2), ((1, 1), 0): F(1, 2), ((0, 0), 2): F(1, 8)}
    u = np.array([[0.1, 0.2], [0.3, 0.0]])
    got = evaluate_action_polynomial(f, u, 0.5)
    expected = u[:, 0] + 2 * u[:, 1] + 0.5 * u[:, 0] * u[:, 1] + 0.25 / 8
    np.testing.assert_allclose(got, expected, rtol=1e-15)
    assert isinstance(evaluate_action_polynomial(f, [0.1, 0.2], 0.5), float)


def test_homological_error_type():
    assert issubclass(HomologicalError, ArithmeticError)
