"""Low-lying eigenvalues as series in hbar^(1/2).

On the fixed level N the weight-w piece of the normal form restricts to
hbar^(w/2) M_w with M_w independent of hbar, so with e = hbar^(1/2)

    lambda / hbar = eig(mu0 + M_2 + e M_3 + e^2 M_4 + ...),

where M_2 can only hold hbar constants.

The branches are followed over a list of e values and each is fitted by a
polynomial in e; the coefficient of e^k is the coefficient of hbar^(1+k/2).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..algebra import WeylSeries
from ..birkhoff import NormalFormResult
from ..fock import enumerate_basis, hermitian_eigenvalues, matrix_of_wick, weyl_to_wick
from .clusters import level_energy

__all__ = ["LowLyingFit", "BranchCrossingError", "level_blocks", "low_lying", "track_branches"]


class BranchCrossingError(RuntimeError):
    pass


@dataclass
class LowLyingFit:
    """coefficients[i, k] multiplies hbar^(1 + k/2) on branch i."""

    mu0: float
    coefficients: np.ndarray
    residuals: np.ndarray
    eps: np.ndarray = field(repr=False, default=None)
    branches: np.ndarray = field(repr=False, default=None)

    def mu(self, m: int) -> np.ndarray:
        """Coefficients of hbar^(3/2 + m/2), one per branch."""
        return self.coefficients[:, m + 1]

    def odd_half_powers(self) -> np.ndarray:
        """Coefficients of hbar^(j + 1/2), j >= 1 (odd k)."""
        return self.coefficients[:, 1::2]


def _pieces(K) -> list[WeylSeries]:
    if isinstance(K, NormalFormResult):
        return list(K.K)
    if isinstance(K, WeylSeries):
        return [K.homogeneous_part(w) for w in sorted(K.weights())]
    return list(K)


def level_blocks(K, p: Sequence[int], N: int) -> dict:
    """{w: M_w} with M_w the matrix of the weight-w piece on level N at hbar = 1."""
    basis = enumerate_basis(p, N)
    blocks = {}
    for piece in _pieces(K):
        if not piece:
            continue
        for w in sorted(piece.weights()):
            part = piece.homogeneous_part(w)
            M = matrix_of_wick(weyl_to_wick(part), basis, 1.0, hermitian=False)
            M = 0.5 * (M + M.conj().T)
            blocks[w] = blocks.get(w, 0) + M
    return blocks


def track_branches(eps: np.ndarray, spectra: np.ndarray, gap_tol: float = 1e-9) -> np.ndarray:
    """Order eigenvalues by continuity in eps (nearest continuation).

    Each spectrum is matched greedily to the linear extrapolation of the
    previous two.  Branches that touch inside the range raise; branches
    that stay degenerate throughout are accepted.
    """
    out = [np.asarray(spectra[0])]
    for row in spectra[1:]:
        prev = out[-1]
        slope = (out[-1] - out[-2]) if len(out) > 1 else 0.0
        guess = prev + slope
        order = []
        free = list(range(len(row)))
        for g in guess:
            j = min(free, key=lambda k: abs(row[k] - g))
            free.remove(j)
            order.append(j)
        out.append(np.asarray(row)[order])
    arr = np.array(out)
    if arr.shape[1] > 1:
        gaps = np.diff(np.sort(arr, axis=1), axis=1)
        spread = np.max(np.abs(arr)) or 1.0
        # degenerate branches are fitted jointly, so only transient collisions matter
        closing = np.any(gaps < gap_tol * spread, axis=0) & ~np.all(gaps < gap_tol * spread, axis=0)
        if np.any(closing):
            raise BranchCrossingError("eigenvalue branches collide inside the e range")
    return arr


def low_lying(K, p: Sequence[int], nu_c, N: int, eps_list: Sequence[float], degree: int = 6) -> LowLyingFit:
    """Fit lambda/hbar on the N-th level as a polynomial in e = hbar^(1/2).

    ``K`` holds the pieces of weight >= 3 (a weight-2 piece, if given, must
    be a multiple of the identity on the level, e.g. an hbar constant);
    the oscillator contributes mu0 = nu_c (N + |p|/2).
    """
    eps = np.asarray(sorted(float(e) for e in eps_list))
    if len(eps) <= degree:
        raise ValueError("need more e values than the polynomial degree")
    blocks = level_blocks(K, p, N)
    mu0 = level_energy(p, nu_c, 1.0, N)
    dim = enumerate_basis(p, N).dim
    base = mu0 * np.eye(dim, dtype=complex) + blocks.pop(2, 0)
    if np.max(np.abs(base - base[0, 0] * np.eye(dim))) > 1e-12 * max(1.0, abs(mu0)):
        raise ValueError("weight-2 part is not constant on the level")
    rows = []
    for e in eps:
        M = base.copy()
        for w, B in blocks.items():
            M = M + e ** (w - 2) * B
        rows.append(hermitian_eigenvalues(M, check=False))
    branches = track_branches(eps, np.array(rows))
    # fit in t = e / max(e) to keep the Vandermonde matrix well conditioned
    top = float(eps[-1])
    V = np.vander(eps / top, degree + 1, increasing=True)
    coefs = np.zeros((dim, degree + 1))
    residuals = np.zeros(dim)
    for i in range(dim):
        y = branches[:, i]
        sol, *_ = np.linalg.lstsq(V, y, rcond=None)
        coefs[i] = sol / top ** np.arange(degree + 1)
        residuals[i] = float(np.max(np.abs(V @ sol - y)))
    return LowLyingFit(mu0, coefs, residuals, eps, branches)
