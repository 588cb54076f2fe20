"""Liouville measure on the energy surfaces {H2 = E} of a periodic oscillator.

With nu = nu_c p the H2 flow has period 2 pi / nu_c, and the surface
measure mu_E is normalized by dx dxi = (2 pi / nu_c) mu_E |dE|.  In action
angle coordinates the phase volume is (2 pi)^n dI dtheta, so

    int_{H2=E} I^alpha mu_E = nu_c (2 pi)^(n-1) prod Gamma(alpha_i + 1)
                              / (prod nu_i^(alpha_i+1) Gamma(|alpha| + n))
                              * E^(|alpha| + n - 1).

For nu_c = 1 this is the familiar mu = 2 pi mu_E (x) |dE|.  The power of
2 pi is checked against lattice counts: at p = (1, ..., 1) the mass of
mu_E divided by (2 pi hbar)^(n-1) is the dimension of the eigenspace.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ..resonance import as_fractions

__all__ = [
    "TWO_PI_POWER_SHIFT",
    "LiouvilleValue",
    "LiouvilleSample",
    "liouville_monomial_integral",
    "liouville_mass",
    "liouville_sample",
    "action_angle_to_phase",
]

# mu_E carries (2 pi)^(n + TWO_PI_POWER_SHIFT); see the module docstring.
TWO_PI_POWER_SHIFT = -1


@dataclass(frozen=True)
class LiouvilleValue:
    """Exact value ``coefficient * (2 pi)^two_pi_power``."""

    coefficient: Fraction
    two_pi_power: int

    def __float__(self) -> float:
        return float(self.coefficient) * (2.0 * math.pi) ** self.two_pi_power

    def __mul__(self, other):
        if isinstance(other, LiouvilleValue):
            return LiouvilleValue(self.coefficient * other.coefficient,
                                  self.two_pi_power + other.two_pi_power)
        return LiouvilleValue(self.coefficient * Fraction(other), self.two_pi_power)

    __rmul__ = __mul__


def _exact(value) -> Fraction:
    if isinstance(value, float):
        raise TypeError("exact integrals need rational E and nu_c")
    return as_fractions([value])[0]


def liouville_monomial_integral(alpha: Sequence[int], p: Sequence[int], nu_c, E) -> LiouvilleValue:
    """int_{H2 = E} I^alpha mu_E for H2 = sum nu_c p_j I_j."""
    alpha = tuple(int(a) for a in alpha)
    p = tuple(int(a) for a in p)
    if len(alpha) != len(p):
        raise ValueError("alpha and p must have the same length")
    nu_c = _exact(nu_c)
    E = _exact(E)
    n = len(p)
    coef = nu_c
    for a, pi in zip(alpha, p):
        coef *= Fraction(math.factorial(a), 1) / (nu_c * pi) ** (a + 1)
    coef /= math.factorial(sum(alpha) + n - 1)
    coef *= E ** (sum(alpha) + n - 1)
    return LiouvilleValue(coef, n + TWO_PI_POWER_SHIFT)


def liouville_mass(p: Sequence[int], nu_c, E) -> LiouvilleValue:
    return liouville_monomial_integral((0,) * len(p), p, nu_c, E)


@dataclass
class LiouvilleSample:
    """Points on {H2 = E} with equal weights summing to the mu_E mass."""

    x: np.ndarray
    xi: np.ndarray
    actions: np.ndarray
    angles: np.ndarray
    weights: np.ndarray

    @property
    def count(self) -> int:
        return self.x.shape[0]

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))


def action_angle_to_phase(I: np.ndarray, theta: np.ndarray):
    r = np.sqrt(2.0 * np.maximum(I, 0.0))
    return r * np.cos(theta), -r * np.sin(theta)


def liouville_sample(p: Sequence[int], nu_c, E, count: int, seed: int = 0) -> LiouvilleSample:
    """Draw ``count`` points distributed according to mu_E.

    The actions are uniform on the simplex {sum nu_j I_j = E, I >= 0}
    (Dirichlet(1, ..., 1) in the variables nu_j I_j / E) and the angles
    are uniform on the torus.
    """
    if count < 1:
        raise ValueError("count must be positive")
    p = tuple(int(a) for a in p)
    n = len(p)
    nu = np.array([float(nu_c) * a for a in p])
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(n), size=count)
    I = float(E) * w / nu
    theta = rng.uniform(0.0, 2.0 * math.pi, size=(count, n))
    x, xi = action_angle_to_phase(I, theta)
    mass = float(nu_c) * (2.0 * math.pi) ** (n + TWO_PI_POWER_SHIFT) * float(E) ** (n - 1)
    mass /= float(np.prod(nu)) * math.factorial(n - 1)
    weights = np.full(count, mass / count)
    return LiouvilleSample(x, xi, I, theta, weights)
