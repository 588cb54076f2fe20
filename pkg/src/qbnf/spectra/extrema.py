"""Extrema of a classical symbol on the energy sphere {H2 = E}.

Nothing here is certified: the optimizer is a multi-start projected
gradient method, and the grid routine is the independent check at n <= 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..algebra import WeylSeries, change_chart, harmonic_oscillator, poisson_bracket
from ..resonance import as_fractions
from .liouville import action_angle_to_phase, liouville_sample

__all__ = ["SymbolExtrema", "PhasePolynomial", "symbol_extrema", "grid_extrema"]


class PhasePolynomial:
    """Fast real evaluation of an hbar-free symbol and its gradient."""

    def __init__(self, k: WeylSeries):
        real = change_chart(k, "real") if k.chart != "real" else k
        self.n = k.n
        self.series = real.drop_hbar()
        self._grads = [self.series.derivative(v) for v in range(2 * self.n)]

    @staticmethod
    def _eval(series: WeylSeries, y: np.ndarray) -> np.ndarray:
        n = series.n
        return series.evaluate(y[..., :n], y[..., n:]).real

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self._eval(self.series, y)

    def gradient(self, y: np.ndarray) -> np.ndarray:
        return np.stack([self._eval(g, y) for g in self._grads], axis=-1)


@dataclass(frozen=True)
class SymbolExtrema:
    min: float
    max: float
    starts: int

    @property
    def inf_abs(self) -> float:
        if self.min <= 0.0 <= self.max:
            return 0.0
        return min(abs(self.min), abs(self.max))

    @property
    def sup_abs(self) -> float:
        return max(abs(self.min), abs(self.max))

    def as_tuple(self) -> tuple[float, float]:
        """(inf |k|, sup |k|)."""
        return self.inf_abs, self.sup_abs


def _radii(p, nu_c, E):
    nu = np.array([float(nu_c) * a for a in p])
    r = np.sqrt(2.0 * float(E) / nu)
    return np.concatenate([r, r])


def _descend(f: PhasePolynomial, D: np.ndarray, s: np.ndarray, sign: float, iters: int):
    """Projected gradient descent of sign * f(D s) on the unit sphere, per row."""
    val = sign * f(s * D)
    step = np.full(s.shape[0], 0.1)
    for _ in range(iters):
        g = sign * f.gradient(s * D) * D
        g -= np.sum(g * s, axis=1, keepdims=True) * s
        trial = s - step[:, None] * g
        trial /= np.linalg.norm(trial, axis=1, keepdims=True)
        tval = sign * f(trial * D)
        better = tval < val
        s = np.where(better[:, None], trial, s)
        val = np.where(better, tval, val)
        step = np.where(better, step * 1.5, step * 0.5)
        step = np.maximum(step, 1e-300)
    return s, sign * val


def symbol_extrema(k0: WeylSeries, p: Sequence[int], nu_c, E, n_starts: int = 64,
                   iters: int = 500, seed: int = 0) -> SymbolExtrema:
    """Signed minimum and maximum of k0 on {H2 = E} (heuristic)."""
    if not k0:
        return SymbolExtrema(0.0, 0.0, 0)
    f = PhasePolynomial(k0)
    D = _radii(p, nu_c, E)
    sample = liouville_sample(p, nu_c, E, n_starts, seed=seed)
    y0 = np.concatenate([sample.x, sample.xi], axis=1)
    s0 = y0 / D
    s0 /= np.linalg.norm(s0, axis=1, keepdims=True)
    _, lo = _descend(f, D, s0.copy(), 1.0, iters)
    _, hi = _descend(f, D, s0.copy(), -1.0, iters)
    return SymbolExtrema(float(np.min(lo)), float(np.max(hi)), n_starts)


def grid_extrema(k0: WeylSeries, p: Sequence[int], nu_c, E, resolution: int = 1000) -> SymbolExtrema:
    """Extrema over a dense action-angle grid (n = 1 or 2).

    For a symbol invariant under the H2 flow one angle can be fixed, which
    leaves a (resolution x resolution) grid at n = 2; otherwise the full
    torus is sampled with about resolution^2 points in total.
    """
    n = k0.n
    f = PhasePolynomial(k0)
    nu = np.array([float(nu_c) * a for a in p])
    E = float(E)
    if n == 1:
        theta = np.linspace(0.0, 2.0 * math.pi, resolution * resolution, endpoint=False)[:, None]
        I = np.full_like(theta, E / nu[0])
        x, xi = action_angle_to_phase(I, theta)
        vals = f(np.concatenate([x, xi], axis=1))
        return SymbolExtrema(float(vals.min()), float(vals.max()), vals.size)
    if n != 2:
        raise NotImplementedError("grid extrema are implemented for n <= 2")
    invariant = _flow_invariant(f.series, p, nu_c)
    lo, hi = math.inf, -math.inf
    if invariant:
        t = np.linspace(0.0, 1.0, resolution)
        phi = np.linspace(0.0, 2.0 * math.pi, resolution, endpoint=False)
        T, P = np.meshgrid(t, phi, indexing="ij")
        I = np.stack([T.ravel() * E / nu[0], (1.0 - T.ravel()) * E / nu[1]], axis=1)
        th = np.stack([P.ravel(), np.zeros(P.size)], axis=1)
        blocks = [(I, th)]
    else:
        m = max(8, round(resolution ** (2.0 / 3.0)))
        t = np.linspace(0.0, 1.0, m)
        phi = np.linspace(0.0, 2.0 * math.pi, m, endpoint=False)
        T, P1, P2 = np.meshgrid(t, phi, phi, indexing="ij")
        I = np.stack([T.ravel() * E / nu[0], (1.0 - T.ravel()) * E / nu[1]], axis=1)
        th = np.stack([P1.ravel(), P2.ravel()], axis=1)
        blocks = [(I, th)]
    count = 0
    for I, th in blocks:
        for start in range(0, I.shape[0], 250_000):
            x, xi = action_angle_to_phase(I[start:start + 250_000], th[start:start + 250_000])
            vals = f(np.concatenate([x, xi], axis=1))
            lo = min(lo, float(vals.min()))
            hi = max(hi, float(vals.max()))
            count += vals.size
    return SymbolExtrema(lo, hi, count)


def _flow_invariant(k: WeylSeries, p, nu_c) -> bool:
    if isinstance(nu_c, float):
        return False
    H2 = harmonic_oscillator([as_fractions([nu_c])[0] * a for a in p], max_weight=k.max_weight)
    return not poisson_bracket(H2, k)
