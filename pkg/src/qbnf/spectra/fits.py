"""Least-squares fits of oscillatory trace expansions and Weyl counting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate, optimize

from ..resonance import ZetaStratum

__all__ = [
    "ConditioningError",
    "TraceFit",
    "trace_fit",
    "evaluate_expansion",
    "WeylCount",
    "EnumerationBoundError",
    "weyl_count",
    "sublevel_volume",
]


class ConditioningError(ArithmeticError):
    def __init__(self, message, condition):
        super().__init__(message)
        self.condition = condition


@dataclass
class TraceFit:
    """Coefficients c[(q, d, l)] of zeta^(-N) N^(n(zeta) - l)."""

    coefficients: dict
    strata: tuple
    L: int
    residual_norm: float
    condition: float
    Ns: np.ndarray = field(repr=False, default=None)
    residuals: np.ndarray = field(repr=False, default=None)

    def coefficient(self, zeta: ZetaStratum, l: int) -> complex:
        return self.coefficients[(zeta.q, zeta.d, l)]

    def leading(self, zeta: ZetaStratum) -> complex:
        return self.coefficient(zeta, 0)

    def partial_sum(self, N, orders: int) -> np.ndarray:
        """Sum of the fitted terms with l < orders, evaluated at N."""
        return evaluate_expansion(self.coefficients, self.strata, N, orders)


def _column(zeta: ZetaStratum, power: int, Ns: np.ndarray) -> np.ndarray:
    phase = np.array([zeta.power(-int(N)) for N in Ns])
    return phase * Ns.astype(float) ** power


def evaluate_expansion(coefficients: Mapping, strata: Sequence[ZetaStratum], N, orders: int | None = None):
    Ns = np.atleast_1d(np.asarray(N))
    total = np.zeros(Ns.shape, dtype=complex)
    for z in strata:
        for (q, d, l), c in coefficients.items():
            if (q, d) != (z.q, z.d) or (orders is not None and l >= orders):
                continue
            total += c * _column(z, z.n_zeta - l, Ns)
    return total.real


def trace_fit(traces: Mapping[int, float], strata: Sequence[ZetaStratum], L: int,
              max_condition: float = 1e13) -> TraceFit:
    """Fit trace(N) = sum_zeta zeta^(-N) sum_{l<=L} c_{zeta,l} N^(n(zeta)-l).

    Columns are scaled to unit max norm before the solve; the reported
    condition number is that of the scaled design matrix.
    """
    strata = tuple(strata)
    Ns = np.array(sorted(traces), dtype=np.int64)
    need = 3 * len(strata) * (L + 1)
    if len(Ns) < need:
        raise ValueError(f"need at least {need} data points, got {len(Ns)}")
    y = np.array([float(traces[int(N)]) for N in Ns])
    labels = []
    cols = []
    for z in strata:
        for l in range(L + 1):
            labels.append((z.q, z.d, l))
            cols.append(_column(z, z.n_zeta - l, Ns))
    A = np.stack(cols, axis=1)
    scale = np.max(np.abs(A), axis=0)
    As = A / scale
    cond = float(np.linalg.cond(As))
    if not np.isfinite(cond) or cond > max_condition:
        raise ConditioningError(f"design matrix condition {cond:.3e}", cond)
    ys = max(1.0, float(np.max(np.abs(y))))
    sol, *_ = np.linalg.lstsq(As, (y / ys).astype(complex), rcond=None)
    coef = sol / scale * ys
    fitted = (A @ coef).real
    res = y - fitted
    return TraceFit(dict(zip(labels, coef)), strata, L, float(np.linalg.norm(res)), cond, Ns, res)


class EnumerationBoundError(RuntimeError):
    pass


@dataclass(frozen=True)
class WeylCount:
    count: int
    volume: float
    hbar: float
    E: float

    @property
    def relerr(self) -> float:
        return abs(self.count - self.volume) / max(self.volume, 1e-300)


def _linear_bound(nu: np.ndarray, hbar: float, E_lin: float):
    """All alpha with <nu, hbar (alpha + 1/2)> <= E_lin, as an integer array."""
    n = len(nu)
    out = []

    def rec(j, used, prefix):
        if j == n:
            out.append(prefix)
            return
        k = 0
        while used + nu[j] * hbar * (k + 0.5) <= E_lin * (1 + 1e-14):
            rec(j + 1, used + nu[j] * hbar * (k + 0.5), prefix + (k,))
            k += 1

    rec(0, 0.0, ())
    return np.array(out, dtype=float).reshape(-1, n)


def sublevel_volume(f0: Callable, nu: Sequence[float], E: float, u_max: float | None = None) -> float:
    """Volume of {u >= 0 : f0(u) <= E} for f0 increasing along rays (n <= 3).

    Innermost boundaries are located by a bracketing root finder and the
    outer directions integrated with adaptive quadrature.
    """
    nu = [float(v) for v in nu]
    n = len(nu)
    if u_max is None:
        u_max = 2.0 * E / min(nu)

    def extent(prefix):
        # sup of t with f0(prefix, t, 0, ..., 0) <= E
        def g(t):
            return f0(np.array(prefix + [t] + [0.0] * (n - 1 - len(prefix)))) - E
        if g(0.0) > 0:
            return 0.0
        if g(u_max) <= 0:
            raise EnumerationBoundError("sublevel set extends beyond the search box")
        return optimize.brentq(g, 0.0, u_max, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def vol(prefix):
        top = extent(prefix)
        if len(prefix) == n - 1:
            return top
        return integrate.quad(lambda t: vol(prefix + [t]), 0.0, top,
                              epsabs=0.0, epsrel=1e-11, limit=200)[0]

    return vol([])


def weyl_count(f: Callable, nu: Sequence[float], hbar: float, E: float,
               f0: Callable | None = None, linear: bool = False, slack: float = 2.0) -> WeylCount:
    """Count {alpha : f(hbar(alpha + 1/2); hbar) <= E} and compare with phase volume.

    ``f(u, hbar)`` is vectorized over rows of u.  The enumeration runs over
    the box <nu, u> <= slack * E; an eigenvalue below E on its outer shell
    raises :class:`EnumerationBoundError`.  The volume is
    hbar^-n Vol{f0 <= E}, exact for a linear f.
    """
    nu_arr = np.array([float(v) for v in nu])
    n = len(nu_arr)
    hbar = float(hbar)
    E = float(E)
    pts = _linear_bound(nu_arr, hbar, slack * E)
    count = 0
    if len(pts):
        u = hbar * (pts + 0.5)
        vals = np.asarray(f(u, hbar))
        inside = vals <= E
        count = int(np.sum(inside))
        lin = u @ nu_arr
        shell = lin > slack * E - hbar * float(np.max(nu_arr))
        if np.any(inside & shell):
            raise EnumerationBoundError("eigenvalues below E on the enumeration boundary")
    if linear:
        volume = E ** n / (math.factorial(n) * float(np.prod(nu_arr)))
    else:
        base = f0 if f0 is not None else (lambda u: float(np.asarray(f(u[None, :], 0.0))[0]))
        volume = sublevel_volume(base, nu_arr, E, u_max=slack * E / float(np.min(nu_arr)))
    return WeylCount(count, volume / hbar ** n, hbar, E)
