"""Cluster eigenvalue densities against the Liouville average of the symbol.

For a cluster at energy E the comparison is

    sum_i g(lambda'_i / E^(r/2))  vs  (2 pi hbar)^-(n-1) int g(k0 / E^(r/2)) mu_E.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from ..algebra import WeylSeries
from ..resonance import as_fractions, band_exponent
from .clusters import ClusterSpectrum
from .extrema import PhasePolynomial
from .liouville import liouville_monomial_integral, liouville_sample

__all__ = ["DensityResult", "density_check", "density_exact_monomial", "falling_square_sum"]


@dataclass(frozen=True)
class DensityResult:
    N: int
    lhs: float
    rhs: float

    @property
    def relerr(self) -> float:
        return abs(self.lhs - self.rhs) / max(abs(self.rhs), 1e-300)

    def to_row(self) -> list:
        return [self.N, self.lhs, self.rhs, self.relerr]


def density_check(cluster: ClusterSpectrum, k0: WeylSeries, g: Callable, r: int | None = None,
                  samples: int = 200_000, seed: int = 0) -> DensityResult:
    """Monte-Carlo version: the right side averages g(k0/E^(r/2)) over mu_E."""
    p = cluster.p
    n = len(p)
    r = band_exponent(p) if r is None else r
    E = cluster.E
    lhs = float(np.sum(g(cluster.normalized(r))))
    sample = liouville_sample(p, cluster.nu_c, E, samples, seed=seed)
    y = np.concatenate([sample.x, sample.xi], axis=1)
    vals = PhasePolynomial(k0)(y) if k0 else np.zeros(samples)
    integral = sample.integrate(g(vals / E ** (r / 2.0)))
    rhs = integral / (2.0 * math.pi * cluster.hbar) ** (n - 1)
    return DensityResult(cluster.N, lhs, rhs)


def _falling_product_expansion(a: int, b: int) -> dict:
    """(x)_a (x)_b = sum_k C(a,k) C(b,k) k! (x)_{a+b-k}."""
    return {a + b - k: math.comb(a, k) * math.comb(b, k) * math.factorial(k) for k in range(min(a, b) + 1)}


def falling_square_sum(alpha: Sequence[int], p: Sequence[int], N: int) -> int:
    """sum over <gamma, p> = N of prod_i (gamma_i!/(gamma_i - alpha_i)!)^2, via lattice sums.

    The square of a falling factorial is rewritten in the falling basis, and
    sum_gamma prod (gamma_i)_{beta_i} equals the lattice sum S(beta, p, N).
    """
    from ..polytope import exact_sums  # polytope itself imports spectra.fits

    alpha = tuple(int(a) for a in alpha)
    per_coord = [_falling_product_expansion(a, a) for a in alpha]
    total = 0
    for combo in _product_items(per_coord):
        beta = tuple(b for b, _ in combo)
        weight = 1
        for _, c in combo:
            weight *= c
        total += weight * exact_sums(beta, p, N)[N]
    return total


def _product_items(dicts):
    if not dicts:
        yield ()
        return
    for item in dicts[0].items():
        for rest in _product_items(dicts[1:]):
            yield (item,) + rest


def density_exact_monomial(alpha: Sequence[int], p: Sequence[int], nu_c, N: int) -> tuple[Fraction, Fraction]:
    """Both sides for K = z^alpha (hbar d_z)^alpha and g(t) = t^2, exactly.

    Here r = 2|alpha| (the weight of K) and k0 = I^alpha.  The eigenvalues
    on level N are hbar^|alpha| gamma!/(gamma-alpha)!, so hbar drops out of
    both sides, and so does the power of 2 pi.
    """
    alpha = tuple(int(a) for a in alpha)
    p = tuple(int(a) for a in p)
    nu_c = as_fractions([nu_c])[0]
    n = len(p)
    a = sum(alpha)
    level = nu_c * (Fraction(sum(p), 2) + N)  # E / hbar
    lhs = Fraction(falling_square_sum(alpha, p, N)) / level ** (2 * a)
    S = liouville_monomial_integral(tuple(2 * v for v in alpha), p, nu_c, level)
    assert S.two_pi_power == n - 1
    rhs = S.coefficient / level ** (2 * a)
    return lhs, rhs
