from fractions import Fraction
from itertools import product
from math import gcd

import pytest
from hypothesis import given, strategies as st

from qbnf.resonance import (
    analyze,
    band_exponent,
    complete_resonance,
    resonance_lattice,
    resonance_order,
    torus_decomposition,
    zeta_strata,
)

weights = st.lists(st.integers(1, 9), min_size=2, max_size=3)


def brute_order(v, box=12):
    best = None
    for a in product(range(-box, box + 1), repeat=len(v)):
        if any(a) and sum(x * y for x, y in zip(a, v)) == 0:
            s = sum(abs(x) for x in a)
            best = s if best is None else min(best, s)
    return best


@given(weights, st.fractions(min_value=Fraction(1, 5), max_value=5))
def test_complete_resonance_factorization(p, scale):
    nu = [scale * v for v in p]
    nu_c, q = complete_resonance(nu)
    assert all(nu_c * a == b for a, b in zip(q, nu))
    g = 0
    for a in q:
        g = gcd(g, a)
    assert g == 1 and all(a > 0 for a in q)


@given(weights)
def test_lattice_is_orthogonal_and_saturated(p):
    basis = resonance_lattice(p)
    assert len(basis) == len(p) - 1
    for b in basis:
        assert sum(x * y for x, y in zip(b, p)) == 0
    _, q = complete_resonance(p)
    if len(p) == 2:
        assert tuple(abs(x) for x in basis[0]) == (q[1], q[0])
    else:
        (a1, a2, a3), (b1, b2, b3) = basis
        cross = (a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1)
        assert cross in (q, tuple(-c for c in q))


@given(st.lists(st.integers(1, 6), min_size=2, max_size=3))
def test_resonance_order_against_enumeration(p):
    _, q = complete_resonance(p)
    expected = brute_order(q, box=max(q))
    assert resonance_order(p, bound=3 * max(q)) == expected


def test_known_resonances():
    assert resonance_order([1, 1]) == 2
    assert resonance_order([1, 2]) == 3
    assert resonance_order([2, 3]) == 5
    assert complete_resonance([1, Fraction(5, 3)]) == (Fraction(1, 3), (3, 5))
    assert resonance_order([3, 17], bound=10) is None


@pytest.mark.parametrize("p, r", [((1, 1), 4), ((1, 2), 3), ((2, 3), 4), ((1, 1, 2), 3), ((1, 3, 4), 3), ((1, 3, 5), 4)])
def test_band_exponent(p, r):
    assert band_exponent(p) == r


@given(weights)
def test_torus_decomposition_reconstructs_nu(p):
    k, parts = torus_decomposition(p)
    assert k == 1
    total = [sum(lam * u[i] for lam, u in parts) for i in range(len(p))]
    assert total == [Fraction(v) for v in p]


@given(weights)
def test_strata_cover_all_fixed_roots(p):
    strata = zeta_strata(p)
    seen = {(z.q, z.d) for z in strata}
    for d in range(1, max(p) + 1):
        for q in range(d):
            if gcd(q, d) != 1 and not (d == 1 and q == 0):
                continue
            fixed = [i for i, a in enumerate(p) if (q * a) % d == 0]
            assert ((q, d) in seen) == bool(fixed)
    for z in strata:
        assert z.n_zeta == len(z.index_set) - 1
        m = 0
        for i in z.index_set:
            m = gcd(m, p[i])
        assert z.m_zeta == m


def test_stratum_powers_are_exact_on_real_roots():
    z = next(s for s in zeta_strata((2, 3)) if s.d == 2)
    assert z.power(7) == -1 and z.power(10**12) == 1


def test_analyze_round_trip():
    data = analyze([1, 2])
    d = data.to_dict()
    assert d["p"] == [1, 2] and d["band_r"] == 3 and d["r_nu"] == 3
    assert len(d["strata"]) == 2


def test_rejects_nonpositive():
    with pytest.raises(ValueError):
        complete_resonance([1, -1])
    with pytest.raises(ValueError):
        zeta_strata((0, 1))
