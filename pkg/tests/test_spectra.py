import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbnf.algebra import WeylSeries, change_chart, harmonic_oscillator
from qbnf.birkhoff import birkhoff_normal_form
from qbnf.fock import WickOperator
from qbnf.resonance import zeta_strata
from qbnf.spectra import (
    BranchCrossingError,
    ClusterOverlapError,
    ConditioningError,
    EnumerationBoundError,
    PhasePolynomial,
    action_angle_to_phase,
    assign_clusters,
    cluster_spectrum,
    cluster_spectrum_rescaled,
    density_check,
    density_exact_monomial,
    evaluate_expansion,
    grid_extrema,
    level_energy,
    liouville_mass,
    liouville_monomial_integral,
    liouville_sample,
    low_lying,
    sublevel_volume,
    symbol_extrema,
    trace_fit,
    track_branches,
    weyl_count,
)
from strategies import series

F = Fraction


def cubic_12():
    W = 3
    H2 = harmonic_oscillator([1, 2], max_weight=W)
    L = series(2, {(2, 1, 0, 0, 0): 1, (1, 2, 0, 0, 0): F(1, 2), (0, 3, 0, 0, 0): F(1, 3)}, W)
    return birkhoff_normal_form(H2, L, W)


def action_symbol(alpha):
    """I^alpha in the birkhoff chart (z zbar = 2 I)."""
    n = len(alpha)
    key = tuple(alpha) + tuple(alpha) + (0,)
    return WeylSeries(n, {key: F(1, 2 ** sum(alpha))}, chart="complex", max_weight=2 * sum(alpha))


# -- clusters -------------------------------------------------------------------

def test_monomial_cluster_is_falling_factorials():
    alpha, p, N, hbar = (1, 1), (1, 2), 9, 0.1
    c = cluster_spectrum(WickOperator.K_alpha(alpha), p, 1, hbar, N)
    expected = sorted(hbar**2 * a * b for a in range(N + 1) for b in range(N + 1) if a + 2 * b == N)
    np.testing.assert_allclose(c.lambdas, expected, rtol=1e-14, atol=1e-300)
    assert c.E == pytest.approx(hbar * (1.5 + N))
    assert c.h == pytest.approx(1 / (1.5 + N))


@pytest.mark.parametrize("N", [0, 3, 8])
def test_rescaled_route_matches(N):
    res = cubic_12()
    hbar = 0.01
    c = cluster_spectrum(res, (1, 2), 1, hbar, N)
    direct = cluster_spectrum_rescaled(res, (1, 2), 1, c.h, N, c.epsilon)
    np.testing.assert_allclose(direct, c.lambdas, rtol=1e-12, atol=1e-15)


def test_cluster_windows():
    hbar = 0.1
    spectrum = [level_energy((1, 1), 1, hbar, N) + d for N, d in [(0, 0.0), (1, 0.01), (1, -0.02), (2, 0.03)]]
    out = assign_clusters(spectrum + [1.0], (1, 1), 1, hbar, 0.5)
    assert out.ok and out.counts() == {0: 1, 1: 2, 2: 1}
    bad = assign_clusters(spectrum + [level_energy((1, 1), 1, hbar, 1) + 0.05], (1, 1), 1, hbar, 0.5)
    assert len(bad.unassigned) == 1
    with pytest.raises(ClusterOverlapError):
        assign_clusters([level_energy((1, 1), 1, hbar, 1) + 0.05], (1, 1), 1, hbar, 0.5, strict=True)


# -- Liouville measure ------------------------------------------------------------

def simplex_moment(alpha, nu, E):
    """int over {<nu, I> <= E} of I^alpha dI (Dirichlet integral)."""
    out = F(E) ** (sum(alpha) + len(nu))
    for a, v in zip(alpha, nu):
        out *= F(math.factorial(a)) / F(v) ** (a + 1)
    return out / math.factorial(sum(alpha) + len(nu))


@given(st.sampled_from([(1,), (1, 1), (1, 2), (2, 3), (1, 1, 2)]), st.integers(0, 3),
       st.fractions(min_value=F(1, 3), max_value=3), st.fractions(min_value=F(1, 3), max_value=3))
def test_liouville_integral_is_energy_derivative_of_phase_volume(p, k, nu_c, E):
    """mu = (2 pi / nu_c) mu_E dE, with dx dxi = (2 pi)^n dI dtheta/(2 pi)^n."""
    alpha = tuple((k + i) % 3 for i in range(len(p)))
    nu = [nu_c * a for a in p]
    S = liouville_monomial_integral(alpha, p, nu_c, E)
    n = len(p)
    # d/dE of the Dirichlet moment, times (2 pi)^n / (2 pi / nu_c)
    deriv = simplex_moment(alpha, nu, E) * (sum(alpha) + n) / E
    assert S.coefficient == deriv * nu_c
    assert S.two_pi_power == n - 1


@settings(max_examples=15)
@given(st.sampled_from([(1, 1), (1, 2), (2, 3), (1, 1, 2)]), st.integers(0, 10**6))
def test_liouville_sample_matches_exact_moments(p, seed):
    nu_c, E = F(3, 2), F(2)
    sample = liouville_sample(p, nu_c, E, 20000, seed=seed)
    H2 = sum(float(nu_c) * a * sample.actions[:, i] for i, a in enumerate(p))
    np.testing.assert_allclose(H2, float(E), rtol=1e-12)
    assert sample.weights.sum() == pytest.approx(float(liouville_mass(p, nu_c, E)), rel=1e-12)
    alpha = (1,) + (2,) * (len(p) - 1)
    vals = np.prod(sample.actions ** np.array(alpha), axis=1)
    est = sample.integrate(vals)
    sigma = sample.weights[0] * np.std(vals) * math.sqrt(sample.count)
    assert abs(est - float(liouville_monomial_integral(alpha, p, nu_c, E))) <= 4 * sigma


def test_action_angle_map():
    I = np.array([[0.5, 2.0]])
    th = np.array([[0.3, 1.1]])
    x, xi = action_angle_to_phase(I, th)
    np.testing.assert_allclose((x**2 + xi**2) / 2, I)


def test_liouville_rejects_floats():
    with pytest.raises(TypeError):
        liouville_monomial_integral((0, 0), (1, 1), 1, 0.5)


# -- extrema ----------------------------------------------------------------------

def test_extrema_of_averaged_cubic():
    k = cubic_12().K_piece(3).drop_hbar()
    a = symbol_extrema(k, (1, 2), 1, 1)
    b = grid_extrema(k, (1, 2), 1, 1, resolution=400)
    ref = 1 / (3 * math.sqrt(3))
    assert a.max == pytest.approx(ref, rel=1e-9) and a.min == pytest.approx(-ref, rel=1e-9)
    assert b.max == pytest.approx(ref, rel=1e-4) and b.min == pytest.approx(-ref, rel=1e-4)
    assert a.inf_abs == pytest.approx(0, abs=1e-12) and a.sup_abs == pytest.approx(ref)


@pytest.mark.parametrize("p", [(1, 1), (1, 2), (2, 3)])
def test_extrema_of_action_monomials(p):
    k = action_symbol((1, 0))
    E = 2.0
    a = symbol_extrema(k, p, 1, E, n_starts=16)
    b = grid_extrema(k, p, 1, E, resolution=200)
    assert a.min == pytest.approx(0, abs=1e-9) and a.max == pytest.approx(E / p[0], rel=1e-9)
    assert b.min == pytest.approx(0, abs=1e-12) and b.max == pytest.approx(E / p[0], rel=1e-12)


def test_extrema_in_one_and_three_modes():
    a = symbol_extrema(action_symbol((1,)), (1,), 1, 2.0)
    assert a.min == pytest.approx(2.0) and a.max == pytest.approx(2.0)
    assert grid_extrema(action_symbol((1,)), (1,), 1, 2.0, resolution=20).as_tuple() == pytest.approx((2.0, 2.0))
    c = symbol_extrema(action_symbol((1, 0, 1)), (1, 1, 1), 1, 1.0, n_starts=32)
    assert c.max == pytest.approx(0.25, rel=1e-8) and c.min == pytest.approx(0, abs=1e-9)
    with pytest.raises(NotImplementedError):
        grid_extrema(action_symbol((1, 0, 1)), (1, 1, 1), 1, 1.0)


def test_phase_polynomial_gradient():
    k = change_chart(cubic_12().K_piece(3), "real")
    f = PhasePolynomial(k)
    y = np.random.default_rng(0).normal(size=(5, 4))
    g = f.gradient(y)
    step = 1e-6
    for j in range(4):
        e = np.zeros(4)
        e[j] = step
        fd = (f(y + e) - f(y - e)) / (2 * step)
        np.testing.assert_allclose(g[:, j], fd, rtol=1e-6, atol=1e-8)


# -- densities --------------------------------------------------------------------

def test_density_exact_sides_converge():
    errs = []
    for N in (20, 40, 80, 160):
        lhs, rhs = density_exact_monomial((1, 0), (1, 1), 1, N)
        errs.append(float(abs(lhs - rhs) / rhs))
    slope = np.polyfit(np.log([20, 40, 80, 160]), np.log(errs), 1)[0]
    assert slope == pytest.approx(-1, abs=0.1)


@pytest.mark.parametrize("alpha, p", [((1, 1), (1, 1)), ((2, 0), (1, 1)), ((1, 1), (1, 2)), ((2, 1), (1, 2))])
def test_density_rate_for_larger_monomials(alpha, p):
    Ns = [25, 50, 100, 200]
    errs = [float(abs(l - r) / r) for l, r in (density_exact_monomial(alpha, p, 1, N) for N in Ns)]
    assert np.polyfit(np.log(Ns), np.log(errs), 1)[0] == pytest.approx(-1, abs=0.15)


def test_density_monte_carlo_matches_exact():
    alpha, p, N = (1, 1), (1, 2), 12
    hbar = 0.05
    c = cluster_spectrum(WickOperator.K_alpha(alpha), p, 1, hbar, N)
    res = density_check(c, action_symbol(alpha), lambda t: t**2, r=4, samples=400_000, seed=2)
    lhs, rhs = density_exact_monomial(alpha, p, 1, N)
    assert res.lhs == pytest.approx(float(lhs), rel=1e-10)
    assert res.rhs == pytest.approx(float(rhs), rel=0.02)


# -- fits -------------------------------------------------------------------------

@settings(max_examples=20)
@given(st.sampled_from([(1, 1), (1, 2), (2, 3), (1, 1, 2)]), st.integers(0, 10**6))
def test_trace_fit_recovers_synthetic_coefficients(p, seed):
    rng = np.random.default_rng(seed)
    strata = zeta_strata(p)
    L = 2
    coefs = {}
    for z in strata:
        for l in range(L + 1):
            c = complex(rng.normal(), rng.normal()) if z.d > 2 else complex(rng.normal())
            coefs[(z.q, z.d, l)] = c
    # conjugate strata carry conjugate coefficients so the data are real
    for z in strata:
        q2, d = z.conjugate()
        if (q2, d) != (z.q, z.d) and q2 < z.q:
            for l in range(L + 1):
                coefs[(z.q, z.d, l)] = coefs[(q2, d, l)].conjugate()
    Ns = np.arange(20, 400)
    data = dict(zip(Ns.tolist(), evaluate_expansion(coefs, strata, Ns)))
    fit = trace_fit(data, strata, L)
    for key, c in coefs.items():
        assert abs(fit.coefficients[key] - c) < 1e-6 * max(1, abs(c))


def test_trace_fit_guards():
    strata = zeta_strata((1, 1))
    with pytest.raises(ValueError):
        trace_fit({N: 1.0 for N in range(1, 5)}, strata, 3)
    with pytest.raises(ConditioningError):
        trace_fit({N: 1.0 for N in range(1000, 1100)}, strata, 10)


# -- Weyl counting ----------------------------------------------------------------

def test_weyl_count_linear():
    nu = [1.0, 1.5]
    hbar, E = 0.01, 1.0
    wc = weyl_count(lambda u, h: u @ np.array(nu), nu, hbar, E, linear=True)
    brute = sum(1 for a in range(300) for b in range(300) if hbar * (a + 0.5) + 1.5 * hbar * (b + 0.5) <= E)
    assert wc.count == brute
    assert wc.volume == pytest.approx(E**2 / (2 * 1.5) / hbar**2)
    assert wc.relerr < 0.02


def test_sublevel_volume():
    assert sublevel_volume(lambda u: u[0] + 2 * u[1], [1, 2], 3.0) == pytest.approx(9 / 4, rel=1e-9)
    assert sublevel_volume(lambda u: (u[0] + u[1]) ** 2, [1, 1], 4.0) == pytest.approx(2.0, rel=1e-9)
    assert sublevel_volume(lambda u: u[0] + u[1] + u[2], [1, 1, 1], 1.0) == pytest.approx(1 / 6, rel=1e-7)


def test_weyl_count_boundary_guard():
    with pytest.raises(EnumerationBoundError):
        weyl_count(lambda u, h: 0.25 * u.sum(axis=1), [1.0, 1.0], 0.05, 1.0, linear=True, slack=2.0)


# -- low-lying levels -------------------------------------------------------------

def test_low_lying_quartic_series():
    W = 10
    res = birkhoff_normal_form(harmonic_oscillator([1], max_weight=W), series(1, {(4, 0, 0): 1}, W), W)
    # K stops at weight 10, so lambda/hbar is a degree-8 polynomial in e
    eps = np.linspace(0.0125, 0.5, 40)
    fit = low_lying(res, (1,), 1, 0, eps, degree=8)
    even = fit.coefficients[0, ::2]
    np.testing.assert_allclose(even[:4], [1 / 2, 3 / 4, -21 / 8, 333 / 16], rtol=1e-9)
    assert fit.mu0 == 0.5
    assert np.max(np.abs(fit.odd_half_powers())) < 1e-8


def test_track_branches_detects_crossing():
    e = np.linspace(0, 1, 11)
    spectra = np.sort(np.stack([e - 0.5, 0.5 - e], axis=1), axis=1)
    with pytest.raises(BranchCrossingError):
        track_branches(e, spectra)
    flat = np.zeros((11, 2))
    assert track_branches(e, flat).shape == (11, 2)
