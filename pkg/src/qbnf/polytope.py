"""Exact lattice sums over the slices P(alpha, N) and their large-N expansion.

    S(alpha, p, N) = sum_{gamma >= 0, <gamma, p> = N - <alpha, p>} (gamma + alpha)! / gamma!

is alpha! times the coefficient of X^(N - <alpha, p>) in
prod_i (1 - X^{p_i})^-(alpha_i + 1), so it is a quasi-polynomial in N.
Its expansion reads

    N^-|alpha| S = sum_zeta zeta^-N N^n(zeta) sum_l N^-l a_l(alpha, zeta),

summed over the roots of unity zeta with zeta^{p_i} = 1 for some i.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .resonance import ZetaStratum, zeta_strata
from .spectra.fits import TraceFit, trace_fit

__all__ = [
    "PolytopeExpansion",
    "lattice_points",
    "exact_sum",
    "exact_sum_enumerated",
    "exact_sums",
    "rising_product",
    "a0",
    "leading_term",
    "leading_prediction",
    "fit_expansion",
    "default_orders",
]


def _vec(v) -> tuple[int, ...]:
    return tuple(int(a) for a in v)


def lattice_points(alpha: Sequence[int], p: Sequence[int], N: int) -> list[tuple[int, ...]]:
    """All gamma >= 0 with <gamma, p> = N - <alpha, p>."""
    alpha, p = _vec(alpha), _vec(p)
    M = N - sum(a * b for a, b in zip(alpha, p))
    if M < 0:
        return []
    out = []

    def rec(i, rest, prefix):
        if i == len(p) - 1:
            if rest % p[i] == 0:
                out.append(prefix + (rest // p[i],))
            return
        for g in range(rest // p[i] + 1):
            rec(i + 1, rest - g * p[i], prefix + (g,))

    rec(0, M, ())
    return out


def rising_product(gamma: Sequence[int], alpha: Sequence[int]) -> int:
    """prod_i (gamma_i + 1) ... (gamma_i + alpha_i)."""
    out = 1
    for g, a in zip(gamma, alpha):
        for k in range(1, a + 1):
            out *= g + k
    return out


def exact_sum_enumerated(alpha: Sequence[int], p: Sequence[int], N: int) -> int:
    alpha = _vec(alpha)
    return sum(rising_product(g, alpha) for g in lattice_points(alpha, p, N))


def exact_sums(alpha: Sequence[int], p: Sequence[int], Nmax: int) -> list[int]:
    """[S(alpha, p, N) for N = 0..Nmax] from the generating function."""
    alpha, p = _vec(alpha), _vec(p)
    shift = sum(a * b for a, b in zip(alpha, p))
    size = Nmax - shift + 1
    if size <= 0:
        return [0] * (Nmax + 1)
    coeffs = [1] + [0] * (size - 1)
    for a, pi in zip(alpha, p):
        for _ in range(a + 1):
            for k in range(pi, size):
                coeffs[k] += coeffs[k - pi]
    mult = 1
    for a in alpha:
        mult *= math.factorial(a)
    return [0] * shift + [mult * c for c in coeffs]


def exact_sum(alpha: Sequence[int], p: Sequence[int], N: int) -> int:
    if N < 0:
        return 0
    return exact_sums(alpha, p, N)[N]


def _zeta_power(zeta: ZetaStratum, k: int) -> complex:
    return zeta.power(k)


def leading_term(alpha: Sequence[int], zeta: ZetaStratum, p: Sequence[int]) -> tuple[int, complex]:
    """(k, c) with the zeta-part of N^-|alpha| S equal to zeta^-N (c N^k + lower).

    From the pole of prod (1 - X^{p_i})^-(alpha_i+1) at X = conj(zeta):
    c = zeta^<alpha,p> prod_{i not fixed} alpha_i! (1 - zeta^{p_i})^-(alpha_i+1)
        prod_{i fixed} alpha_i! / p_i^(alpha_i+1) / (m - 1)!,
    where m = sum_{i fixed} (alpha_i + 1) and k = m - 1 - |alpha|.
    """
    alpha, p = _vec(alpha), _vec(p)
    fixed = set(zeta.index_set)
    c = _zeta_power(zeta, sum(a * b for a, b in zip(alpha, p)))
    m = 0
    for i, (a, pi) in enumerate(zip(alpha, p)):
        if i in fixed:
            c *= math.factorial(a) / pi ** (a + 1)
            m += a + 1
        else:
            c *= math.factorial(a) * (1 - _zeta_power(zeta, pi)) ** (-(a + 1))
    c /= math.factorial(m - 1)
    return m - 1 - sum(alpha), complex(c)


def a0(alpha: Sequence[int], zeta: ZetaStratum, p: Sequence[int], corrected: bool = True):
    """Coefficient of zeta^-N N^n(zeta) in N^-|alpha| S(alpha, p, N).

    The default evaluates the generating-function residue (see
    :func:`leading_term`); it vanishes when alpha has support outside the
    fixed indices of zeta.  ``corrected=False`` evaluates the product
    formula with the extra 1/m(zeta) factor and no support condition,
    which agrees with the residue only when m(zeta) = 1 and the support
    of alpha is fixed by zeta.  Real values are returned as ``Fraction``
    when zeta = +-1, complex floats otherwise.
    """
    alpha, p = _vec(alpha), _vec(p)
    if not any((zeta.q * pi) % zeta.d == 0 for pi in p):
        raise ValueError("zeta is not a stratum of p")
    if corrected:
        k, c = leading_term(alpha, zeta, p)
        if k != zeta.n_zeta:
            return Fraction(0) if zeta.d <= 2 else 0j
        if zeta.d <= 2:
            return _exact_real(alpha, zeta, p)
        return c
    fixed = set(zeta.index_set)
    val = 1.0 + 0j
    for i, pi in enumerate(p):
        if i not in fixed:
            val /= 1 - _zeta_power(zeta, pi)
    den = zeta.m_zeta
    g_num = 1
    g_den_arg = 0
    for i in fixed:
        den *= p[i] ** (alpha[i] + 1)
        g_num *= math.factorial(alpha[i])
        g_den_arg += alpha[i] + 1
    val *= g_num / (den * math.factorial(g_den_arg - 1))
    if zeta.d <= 2:
        return Fraction(val.real).limit_denominator(10**12)
    return val


def _exact_real(alpha, zeta, p) -> Fraction:
    """Residue coefficient for zeta = 1 or -1 in exact arithmetic."""
    sign = 1 if zeta.d == 1 else -1
    fixed = set(zeta.index_set)
    c = Fraction(sign ** sum(a * b for a, b in zip(alpha, p)))
    m = 0
    for i, (a, pi) in enumerate(zip(alpha, p)):
        if i in fixed:
            c *= Fraction(math.factorial(a), pi ** (a + 1))
            m += a + 1
        else:
            c *= Fraction(math.factorial(a), (1 - sign ** pi) ** (a + 1))
    return c / math.factorial(m - 1)


def leading_prediction(alpha: Sequence[int], p: Sequence[int], N: int, corrected: bool = True) -> float:
    """Re sum_zeta zeta^-N N^n(zeta) a0(alpha, zeta)."""
    total = 0j
    scale = 0.0
    for z in zeta_strata(p):
        term = _zeta_power(z, -N) * complex(a0(alpha, z, p, corrected)) * float(N) ** z.n_zeta
        total += term
        scale += abs(term)
    if abs(total.imag) > 1e-10 * max(scale, 1e-300):
        raise ArithmeticError(f"leading prediction not real: {total}")
    return total.real


def default_orders(alpha: Sequence[int], p: Sequence[int]) -> int:
    """Number of orders beyond the leading one present in the quasi-polynomial."""
    n_max = max(z.n_zeta for z in zeta_strata(p))
    return n_max + sum(_vec(alpha))


@dataclass
class PolytopeExpansion:
    alpha: tuple[int, ...]
    p: tuple[int, ...]
    exact_sums: dict
    strata: tuple
    a0: dict
    fitted: dict
    residuals: dict = field(default_factory=dict)
    fit: TraceFit | None = field(default=None, repr=False)

    @property
    def n_max(self) -> int:
        return max(z.n_zeta for z in self.strata)

    def normalized(self, N: int) -> float:
        return self.exact_sums[N] / float(N) ** sum(self.alpha)

    def leading_mismatch(self) -> dict:
        """Relative (or absolute, for a vanishing closed form) fit error per stratum."""
        out = {}
        for z in self.strata:
            ref = complex(self.a0[(z.q, z.d)])
            got = self.fitted[(z.q, z.d, 0)]
            out[(z.q, z.d)] = abs(got - ref) / abs(ref) if abs(ref) > 1e-12 else abs(got)
        return out

    def tail_ratio(self, Ns, orders: int = 3) -> np.ndarray:
        """|data - fitted terms with l < orders| / N^(n_max - orders)."""
        Ns = np.asarray(list(Ns))
        data = np.array([self.normalized(int(N)) for N in Ns])
        approx = self.fit.partial_sum(Ns, orders)
        return np.abs(data - approx) / Ns.astype(float) ** (self.n_max - orders)

    def tail_bound(self, orders: int = 3) -> float:
        """sum of |fitted a_l| over l >= orders, a bound for tail_ratio at N >= 1."""
        return float(sum(abs(c) for (q, d, l), c in self.fitted.items() if l >= orders))

    def to_rows(self):
        for N in sorted(self.exact_sums):
            if N in self.residuals:
                pred = leading_prediction(self.alpha, self.p, N) if N > 0 else float("nan")
                yield N, self.exact_sums[N], pred, self.residuals[N]


def fit_expansion(alpha: Sequence[int], p: Sequence[int], Nrange: Sequence[int], L: int | None = None,
                  corrected: bool = True) -> PolytopeExpansion:
    """Fit N^-|alpha| S(alpha, p, N) over Nrange and compare with a0."""
    alpha, p = _vec(alpha), _vec(p)
    Ns = sorted(int(N) for N in Nrange)
    if not Ns:
        raise ValueError("empty N range")
    if Ns[0] <= 0:
        raise ValueError("fits need N >= 1")
    L = default_orders(alpha, p) if L is None else L
    sums = exact_sums(alpha, p, Ns[-1])
    data = {N: sums[N] / float(N) ** sum(alpha) for N in Ns}
    strata = tuple(zeta_strata(p))
    fit = trace_fit(data, strata, L)
    closed = {(z.q, z.d): a0(alpha, z, p, corrected) for z in strata}
    residuals = {int(N): float(r) for N, r in zip(fit.Ns, fit.residuals)}
    return PolytopeExpansion(alpha, p, {N: sums[N] for N in Ns}, strata, closed,
                             dict(fit.coefficients), residuals, fit)
