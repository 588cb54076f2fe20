"""Eigenvalue clusters around the harmonic levels E_N = hbar nu_c (N + |p|/2)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ..algebra import WeylSeries
from ..birkhoff import NormalFormResult
from ..fock import WickOperator, enumerate_basis, hermitian_eigenvalues, matrix_of_wick, wick_matrix, weyl_to_wick

__all__ = [
    "ClusterSpectrum",
    "ClusterAssignment",
    "ClusterOverlapError",
    "as_wick",
    "level_energy",
    "cluster_spectrum",
    "cluster_spectrum_rescaled",
    "assign_clusters",
]


def level_energy(p: Sequence[int], nu_c, hbar: float, N: int) -> float:
    return float(hbar) * float(nu_c) * (sum(p) / 2.0 + N)


def as_wick(K) -> WickOperator:
    """Accept a normal form result, a symbol, a list of symbols or a Wick operator."""
    if isinstance(K, WickOperator):
        return K
    if isinstance(K, NormalFormResult):
        K = K.K_total()
    if isinstance(K, WeylSeries):
        return weyl_to_wick(K)
    pieces = list(K)
    if not pieces:
        raise ValueError("empty list of normal form pieces")
    total = pieces[0]
    for piece in pieces[1:]:
        total = total + piece
    return weyl_to_wick(total)


@dataclass
class ClusterSpectrum:
    """Shifts lambda'_i of the eigenvalues E + lambda'_i in the N-th cluster."""

    p: tuple[int, ...]
    nu_c: Fraction
    hbar: float
    N: int
    lambdas: np.ndarray

    @property
    def E(self) -> float:
        return level_energy(self.p, self.nu_c, self.hbar, self.N)

    @property
    def epsilon(self) -> float:
        return math.sqrt(self.E)

    @property
    def h(self) -> float:
        return self.hbar / self.E

    @property
    def m(self) -> int:
        return len(self.lambdas)

    def normalized(self, r: int) -> np.ndarray:
        """lambda' / E^(r/2)."""
        return self.lambdas / self.E ** (r / 2.0)

    def to_row(self) -> list:
        return [self.N, self.E, *self.lambdas.tolist()]


def cluster_spectrum(K, p: Sequence[int], nu_c, hbar: float, N: int) -> ClusterSpectrum:
    """Eigenvalues of the resonant normal form pieces on the N-th eigenspace."""
    op = as_wick(K)
    basis = enumerate_basis(p, N)
    M = matrix_of_wick(op, basis, hbar)
    return ClusterSpectrum(tuple(basis.p), Fraction(nu_c), float(hbar), int(N), hermitian_eigenvalues(M))


def cluster_spectrum_rescaled(K, p: Sequence[int], nu_c, h: float, N: int, epsilon: float) -> np.ndarray:
    """Shifts computed from the dilated symbol q(x, xi; h) = K(e x, e xi; e^2 h).

    The result equals ``cluster_spectrum(K, p, nu_c, e^2 h, N).lambdas``
    when h = 1 / (nu_c (N + |p|/2)), i.e. when the level sits at energy 1.
    """
    op = as_wick(K)
    basis = enumerate_basis(p, N)
    if not op.is_resonant(basis.p):
        raise ValueError("operator has non-resonant terms")
    M = wick_matrix(op, basis.states, h, strict=True, weight_scale=epsilon)
    return hermitian_eigenvalues(0.5 * (M + M.conj().T))


class ClusterOverlapError(ValueError):
    pass


@dataclass
class ClusterAssignment:
    groups: dict = field(default_factory=dict)
    unassigned: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.unassigned

    def counts(self) -> dict:
        return {N: len(v) for N, v in sorted(self.groups.items())}


def assign_clusters(spectrum: Iterable[float], p: Sequence[int], nu_c, hbar: float, Emax: float,
                    strict: bool = False) -> ClusterAssignment:
    """Sort eigenvalues <= Emax into the windows E_N +- nu_c hbar / 3."""
    step = float(nu_c) * float(hbar)
    base = level_energy(p, nu_c, hbar, 0)
    out = ClusterAssignment()
    for lam in sorted(float(v) for v in spectrum):
        if lam > Emax:
            break
        N = round((lam - base) / step)
        if N >= 0 and abs(lam - (base + N * step)) <= step / 3.0:
            out.groups.setdefault(N, []).append(lam)
        else:
            out.unassigned.append(lam)
    if strict and out.unassigned:
        raise ClusterOverlapError(f"{len(out.unassigned)} eigenvalues fall between cluster windows")
    return out
