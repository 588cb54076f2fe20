"""Quantum Birkhoff normal form by successive approximation in the weight filtration.

Given H2 = sum_j nu_j (x_j^2 + xi_j^2)/2 and a perturbation L of weight at
least 3, find A and K (both of weight at least 3) with

    exp(i/hbar ad_A)(H2 + L) = H2 + K   modulo terms of weight > W,

and [K, H2] = 0.  All computations run in the complex ``birkhoff`` chart
z = x + i xi, where i/hbar ad_H2 acts diagonally on monomials.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from gmpy2 import mpq

from .algebra import (
    GaussianRational,
    WeylSeries,
    change_chart,
    harmonic_oscillator,
    ihbar_bracket,
    poisson_bracket,
    _key_weight,
)
from .resonance import as_fractions

__all__ = [
    "NormalFormResult",
    "harmonic_frequencies",
    "is_resonant_key",
    "split_resonant",
    "adjoint_eigenvalue",
    "solve_homological",
    "exp_ad",
    "birkhoff_normal_form",
    "classical_normal_form",
    "leading_resonant_terms",
    "action_polynomial",
    "conjugation_residual",
    "evaluate_action_polynomial",
    "HomologicalError",
]


class HomologicalError(ArithmeticError):
    """A monomial classified non-resonant has a vanishing adjoint eigenvalue."""


def _birkhoff(A: WeylSeries) -> WeylSeries:
    return change_chart(A, "complex", "birkhoff")


def harmonic_frequencies(H2: WeylSeries) -> tuple[Fraction, ...]:
    """Read nu from H2 = sum nu_j (x_j^2 + xi_j^2)/2, validating its shape."""
    R = change_chart(H2, "real") if H2.chart != "real" else H2
    n = R.n
    nu = []
    expected = {}
    for j in range(n):
        e = [0] * n
        e[j] = 2
        z = [0] * n
        kx = tuple(e) + tuple(z) + (0,)
        kxi = tuple(z) + tuple(e) + (0,)
        cx = R.coefficient(kx)
        cxi = R.coefficient(kxi)
        if cx != cxi or cx.im != 0:
            raise ValueError(f"quadratic part is not diagonal in mode {j + 1}")
        v = Fraction(int(cx.re.numerator), int(cx.re.denominator)) * 2
        if v <= 0:
            raise ValueError(f"non-elliptic quadratic part: nu_{j + 1} = {v}")
        nu.append(v)
        expected[kx] = cx
        expected[kxi] = cxi
    if dict(R.items()) != expected:
        raise ValueError("H2 must be exactly sum nu_j (x_j^2 + xi_j^2)/2")
    return tuple(nu)


def _dot(a, nu) -> Fraction:
    return sum((Fraction(x) * v for x, v in zip(a, nu)), Fraction(0))


def is_resonant_key(key: tuple, nu: Sequence[Fraction]) -> bool:
    n = len(nu)
    return _dot([key[j] - key[n + j] for j in range(n)], nu) == 0


def split_resonant(R: WeylSeries, nu: Sequence) -> tuple[WeylSeries, WeylSeries]:
    """Split a homogeneous complex-chart series into kernel and image parts."""
    if R.chart != "complex":
        raise ValueError("split_resonant expects a complex-chart series")
    if not R.is_homogeneous():
        raise ValueError("split_resonant expects a weight-homogeneous series")
    nu = as_fractions(nu)
    if len(nu) != R.n:
        raise ValueError("frequency vector does not match dimension")
    ker, img = {}, {}
    for k, c in R.items():
        (ker if is_resonant_key(k, nu) else img)[k] = c
    return R._like(ker), R._like(img)


@lru_cache(maxsize=None)
def _eigen_cached(nu: tuple, key: tuple) -> GaussianRational:
    n = len(nu)
    H2 = _birkhoff(harmonic_oscillator(nu, max_weight=_key_weight(key) + 2))
    mono = WeylSeries(n, {key: 1}, chart="complex", convention="birkhoff", max_weight=_key_weight(key))
    img = ihbar_bracket(H2, mono, _key_weight(key))
    lam = img.coefficient(key)
    rest = {k: c for k, c in img.items() if k != key}
    if rest:
        raise ArithmeticError("i/hbar ad_H2 is not diagonal on the birkhoff monomials")
    return lam


def adjoint_eigenvalue(key: tuple, nu: Sequence) -> GaussianRational:
    """Eigenvalue of i/hbar ad_H2 on the birkhoff monomial ``key``.

    Obtained from the Moyal bracket itself rather than a closed formula.
    """
    return _eigen_cached(as_fractions(nu), tuple(key))


def solve_homological(R: WeylSeries, H2: WeylSeries | Sequence, nu: Sequence | None = None):
    """Solve K = R - i/hbar ad_H2(A') for homogeneous R.

    K is the resonant part of R; A' carries no resonant component and
    satisfies i/hbar ad_H2(A') = (non-resonant part of R).  Returns
    ``(Aprime, K)`` in the birkhoff chart.
    """
    if nu is None:
        nu = harmonic_frequencies(H2) if isinstance(H2, WeylSeries) else as_fractions(H2)
    nu = as_fractions(nu)
    R = _birkhoff(R)
    ker, img = split_resonant(R, nu)
    out = {}
    for k, c in img.items():
        lam = adjoint_eigenvalue(k, nu)
        if not lam:
            raise HomologicalError(f"zero eigenvalue on non-resonant monomial {k}")
        out[k] = c / lam
    return R._like(out), ker


def exp_ad(A: WeylSeries, P: WeylSeries, W: int | None = None) -> WeylSeries:
    """sum_l (i/hbar ad_A)^l P / l! truncated at weight W (A of weight >= 3)."""
    if A.chart != P.chart or A.convention != P.convention:
        A = change_chart(A, P.chart, P.convention or "birkhoff")
    if not A.in_O(3):
        raise ValueError("exp_ad requires A of weight at least 3")
    if W is None:
        W = min(A.max_weight, P.max_weight)
    total = P.with_max_weight(W)
    term = total
    ell = 0
    A = A.with_max_weight(max(A.max_weight, W))
    while term:
        ell += 1
        term = ihbar_bracket(A, term, W).scale(GaussianRational(mpq(1, ell)))
        total = total + term
    return total


@dataclass(frozen=True)
class NormalFormResult:
    """Outcome of :func:`birkhoff_normal_form`.

    ``A`` and ``K`` hold weight-homogeneous pieces of weights 3..W in the
    birkhoff chart (``A[i]`` and ``K[i]`` have weight i + 3).
    """

    H2: WeylSeries
    nu: tuple[Fraction, ...]
    W: int
    A: tuple[WeylSeries, ...]
    K: tuple[WeylSeries, ...]

    def A_total(self) -> WeylSeries:
        out = WeylSeries.zero(self.H2.n, chart="complex", convention="birkhoff", max_weight=self.W)
        for piece in self.A:
            out = out + piece
        return out

    def K_total(self) -> WeylSeries:
        out = WeylSeries.zero(self.H2.n, chart="complex", convention="birkhoff", max_weight=self.W)
        for piece in self.K:
            out = out + piece
        return out

    def K_piece(self, w: int) -> WeylSeries:
        return self.K[w - 3]

    def normal_form(self) -> WeylSeries:
        """H2 + K in the birkhoff chart."""
        return _birkhoff(self.H2.with_max_weight(self.W)) + self.K_total()

    def to_dict(self) -> dict:
        return {
            "H2": self.H2.to_dict(),
            "nu": [str(v) for v in self.nu],
            "W": self.W,
            "A": [a.to_dict() for a in self.A],
            "K": [k.to_dict() for k in self.K],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data) -> "NormalFormResult":
        return cls(
            WeylSeries.from_dict(data["H2"]),
            tuple(Fraction(v) for v in data["nu"]),
            int(data["W"]),
            tuple(WeylSeries.from_dict(a) for a in data["A"]),
            tuple(WeylSeries.from_dict(k) for k in data["K"]),
        )


def birkhoff_normal_form(H2: WeylSeries, L: WeylSeries, W: int = 10) -> NormalFormResult:
    """Normalize H2 + L up to weight W.

    Each round recomputes exp(i/hbar ad_{A_<w})(H2 + L) up to weight w,
    reads off its weight-w piece R_w and solves the homological equation
    for A_w and K_w, taking A_w with zero resonant component.
    """
    nu = harmonic_frequencies(H2)
    n = len(nu)
    if L.n != n:
        raise ValueError("dimension mismatch between H2 and L")
    Lc = _birkhoff(L).with_max_weight(W)
    if not Lc.in_O(3):
        raise ValueError("perturbation must have weight at least 3")
    H2c = _birkhoff(H2).with_max_weight(W)
    P = H2c + Lc
    A_pieces: list[WeylSeries] = []
    K_pieces: list[WeylSeries] = []
    A_sum = WeylSeries.zero(n, chart="complex", convention="birkhoff", max_weight=W)
    for w in range(3, W + 1):
        T = exp_ad(A_sum, P.with_max_weight(w), w) if A_sum else P.with_max_weight(w)
        R = T.homogeneous_part(w).with_max_weight(W)
        Aw, Kw = solve_homological(R, H2c, nu)
        A_pieces.append(Aw.with_max_weight(W))
        K_pieces.append(Kw.with_max_weight(W))
        A_sum = A_sum + Aw.with_max_weight(W)
    return NormalFormResult(H2.with_max_weight(W), nu, W, tuple(A_pieces), tuple(K_pieces))


def conjugation_residual(result: NormalFormResult, L: WeylSeries) -> WeylSeries:
    """exp(i/hbar ad_A)(H2 + L) - (H2 + K) at truncation W."""
    W = result.W
    P = (_birkhoff(result.H2) + _birkhoff(L)).with_max_weight(W)
    lhs = exp_ad(result.A_total(), P, W)
    return lhs - result.normal_form()


def classical_normal_form(result: NormalFormResult) -> WeylSeries:
    """K with hbar set to zero, returned in the real chart."""
    return change_chart(result.K_total().drop_hbar(), "real")


def leading_resonant_terms(p3: WeylSeries, p4: WeylSeries, nu: Sequence):
    """Classical resonant terms (k3, k4) of H2 + p3 + p4.

    ``a3`` solves {H2, a3} = -nonres(p3) and
    k4 = res(p4 + {k3, a3} + (1/2){nonres(p3), a3}).
    Returns ``(k3, k4, a3)`` in the birkhoff chart, all hbar-free.
    """
    nu = as_fractions(nu)
    W = 6
    p3c = _birkhoff(p3).drop_hbar().with_max_weight(W)
    p4c = _birkhoff(p4).drop_hbar().with_max_weight(W)
    if p3c and p3c.weights() != {3}:
        raise ValueError("p3 must be homogeneous of degree 3")
    if p4c and p4c.weights() != {4}:
        raise ValueError("p4 must be homogeneous of degree 4")
    H2c = _birkhoff(harmonic_oscillator(nu, max_weight=W))
    k3, nonres = split_resonant(p3c, nu) if p3c else (p3c, p3c)
    a3 = {}
    for k, c in nonres.items():
        lam = poisson_bracket(H2c, WeylSeries(len(nu), {k: 1}, chart="complex",
                                              convention="birkhoff", max_weight=W)).coefficient(k)
        a3[k] = -c / lam
    a3 = p3c._like(a3)
    # time-one flow of b = -a3: p4 + {b, k3} + 1/2 {b, nonres(p3)}
    inner = p4c + poisson_bracket(k3, a3, W) + poisson_bracket(nonres, a3, W).scale(GaussianRational(mpq(1, 2)))
    inner = inner.homogeneous_part(4)
    k4, _ = split_resonant(inner, nu) if inner else (inner, inner)
    return k3, k4, a3


def action_polynomial(K: WeylSeries, nu: Sequence | None = None) -> dict:
    """Express a function of the actions as f(I_1..I_n; hbar) of the operators I_j.

    ``K`` must only contain birkhoff monomials with equal z and zbar
    exponents.  Returns a dict mapping (beta, l) to a Fraction so that the
    Weyl quantization of K equals sum c * hbar^l * prod_j Ihat_j^beta_j with
    Ihat_j the quantization of (x_j^2 + xi_j^2)/2.  The spectrum is then
    f(hbar (alpha + 1/2); hbar).
    """
    from .algebra import moyal_product

    Kc = _birkhoff(K)
    n = Kc.n
    W = Kc.max_weight
    residual = {}
    for k, c in Kc.items():
        beta = k[:n]
        if beta != k[n : 2 * n]:
            raise ValueError("series is not a function of the actions")
        if c.im != 0:
            raise ValueError("coefficients must be real")
        # z zbar = 2 I
        residual[(beta, k[-1])] = Fraction(int(c.re.numerator), int(c.re.denominator)) * 2 ** sum(beta)

    powers: dict = {}

    def star_power(j, m):
        if (j, m) in powers:
            return powers[(j, m)]
        e = [0] * n
        e[j] = 1
        I_j = WeylSeries(n, {tuple(e) + tuple(e) + (0,): mpq(1, 2)}, chart="complex",
                         convention="birkhoff", max_weight=W)
        if m == 0:
            val = WeylSeries.constant(n, 1, chart="complex", convention="birkhoff", max_weight=W)
        else:
            val = moyal_product(star_power(j, m - 1), I_j, W)
        powers[(j, m)] = val
        return val

    def basis_element(beta):
        # different modes commute, so the star product is the ordinary product
        from .algebra import commutative_product

        val = WeylSeries.constant(n, 1, chart="complex", convention="birkhoff", max_weight=W)
        for j, m in enumerate(beta):
            if m:
                val = commutative_product(val, star_power(j, m), W)
        return val

    f: dict = {}
    while residual:
        (beta, l), c = max(residual.items(), key=lambda kv: (sum(kv[0][0]), -kv[0][1], kv[0]))
        f[(beta, l)] = f.get((beta, l), Fraction(0)) + c
        elem = basis_element(beta)
        for k, v in elem.items():
            b2 = k[:n]
            key = (b2, k[-1] + l)
            if 2 * sum(b2) + 2 * key[1] > W:
                continue
            val = Fraction(int(v.re.numerator), int(v.re.denominator)) * 2 ** sum(b2) * c
            residual[key] = residual.get(key, Fraction(0)) - val
            if residual[key] == 0:
                del residual[key]
    return {k: v for k, v in f.items() if v}


def evaluate_action_polynomial(f: dict, u, hbar: float):
    """Evaluate sum c hbar^l u^beta; ``u`` has shape (..., n)."""
    u = np.asarray(u, dtype=float)
    total = np.zeros(u.shape[:-1])
    for (beta, l), c in f.items():
        term = float(c) * hbar ** l
        for j, bj in enumerate(beta):
            if bj:
                term = term * u[..., j] ** bj
        total = total + term
    return float(total) if total.ndim == 0 else total
