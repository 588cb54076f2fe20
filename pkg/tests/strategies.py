"""Hypothesis strategies and small builders shared by the test modules."""
from fractions import Fraction
from itertools import product

from hypothesis import strategies as st

from qbnf.algebra import WeylSeries


def keys_of_weight(n, w):
    """All (x-exponents, xi-exponents, h) keys of exact weight w."""
    out = []
    for h in range(w // 2 + 1):
        deg = w - 2 * h
        for exps in product(range(deg + 1), repeat=2 * n):
            if sum(exps) == deg:
                out.append(tuple(exps) + (h,))
    return out


def keys_between(n, lo, hi):
    return [k for w in range(lo, hi + 1) for k in keys_of_weight(n, w)]


rationals = st.fractions(min_value=-3, max_value=3, max_denominator=6)


@st.composite
def real_series(draw, n=1, lo=0, hi=6, max_terms=5, W=None):
    """Random real-chart symbol with rational coefficients in weights lo..hi."""
    keys = keys_between(n, lo, hi)
    chosen = draw(st.lists(st.sampled_from(keys), min_size=1, max_size=max_terms, unique=True))
    coefs = draw(st.lists(rationals.filter(bool), min_size=len(chosen), max_size=len(chosen)))
    return WeylSeries(n, dict(zip(chosen, coefs)), max_weight=hi if W is None else W)


@st.composite
def homogeneous_series(draw, n=1, w=3, max_terms=4, W=12):
    keys = keys_of_weight(n, w)
    chosen = draw(st.lists(st.sampled_from(keys), min_size=1, max_size=max_terms, unique=True))
    coefs = draw(st.lists(rationals.filter(bool), min_size=len(chosen), max_size=len(chosen)))
    return WeylSeries(n, dict(zip(chosen, coefs)), max_weight=W)


def series(n, terms, W):
    return WeylSeries(n, {k: Fraction(c) for k, c in terms.items()}, max_weight=W)


def random_series(rng, n, lo, hi, max_terms, W, hbar_free=False):
    """numpy-Generator driven random real symbol (used where hypothesis is too slow)."""
    keys = [k for k in keys_between(n, lo, hi) if not (hbar_free and k[-1])]
    idx = rng.choice(len(keys), size=min(max_terms, len(keys)), replace=False)
    terms = {}
    for i in idx:
        num = int(rng.integers(-5, 6)) or 1
        den = int(rng.integers(1, 5))
        terms[keys[i]] = Fraction(num, den)
    return WeylSeries(n, terms, max_weight=W)
