"""Bargmann-Fock representation of polynomial symbols.

Monomials z^gamma span the harmonic oscillator eigenspaces.  With norm
||z^gamma||^2 proportional to hbar^|gamma| gamma!, the operator
z^a (hbar d_z)^b acts on the orthonormal basis e_gamma by

    e_gamma -> hbar^((|a|+|b|)/2) sqrt(gamma!/(gamma-b)! * gamma'!/(gamma'-a)!) e_gamma',

where gamma' = gamma - b + a.  The Wick symbol z^a zbar^b corresponds to
that operator; Weyl and Wick symbols are related by the heat transform
with parameter +hbar/2.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from gmpy2 import mpq

from .algebra import GaussianRational, WeylSeries, change_chart, heat_transform

__all__ = [
    "FockBasis",
    "WickOperator",
    "HermitianMatrix",
    "TruncationError",
    "enumerate_basis",
    "enumerate_truncated",
    "weyl_to_wick",
    "wick_to_weyl",
    "wick_matrix",
    "matrix_of_wick",
    "ladder_matrices",
    "direct_spectrum",
    "hermitian_eigenvalues",
    "basis_dimension",
]

_SQRT2 = math.sqrt(2.0)


def _weighted_solutions(p: Sequence[int], N: int) -> list[tuple[int, ...]]:
    p = tuple(p)
    out = []

    def rec(i, remaining, prefix):
        if i == len(p) - 1:
            if remaining % p[i] == 0:
                out.append(prefix + (remaining // p[i],))
            return
        for a in range(remaining // p[i], -1, -1):
            rec(i + 1, remaining - a * p[i], prefix + (a,))

    if N >= 0:
        rec(0, N, ())
    return out


def _grlex_key(a):
    return (sum(a), a)


@dataclass(frozen=True)
class FockBasis:
    """States alpha with <p, alpha> = N in graded (descending) lex order."""

    p: tuple[int, ...]
    N: int
    states: tuple[tuple[int, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def index(self) -> dict:
        return {s: i for i, s in enumerate(self.states)}

    def to_dict(self) -> dict:
        return {"p": list(self.p), "N": self.N, "states": [list(s) for s in self.states]}


def enumerate_basis(p: Sequence[int], N: int) -> FockBasis:
    p = tuple(int(a) for a in p)
    if any(a <= 0 for a in p):
        raise ValueError("p must be positive integers")
    if N < 0:
        raise ValueError("N must be nonnegative")
    states = sorted(_weighted_solutions(p, N), key=_grlex_key, reverse=True)
    return FockBasis(p, int(N), tuple(states))


def enumerate_truncated(p: Sequence[int], Nmax: int) -> list[tuple[int, ...]]:
    """All alpha with <p, alpha> <= Nmax, grouped by level."""
    out = []
    for N in range(Nmax + 1):
        out.extend(enumerate_basis(p, N).states)
    return out


def basis_dimension(p: Sequence[int], N: int) -> int:
    """Coefficient of X^N in prod_i 1/(1 - X^{p_i}) by polynomial arithmetic."""
    coeffs = [1] + [0] * N
    for pi in p:
        for k in range(pi, N + 1):
            coeffs[k] += coeffs[k - pi]
    return coeffs[N]


class _QSqrt2:
    """Exact element c0 + c1 sqrt(2) with Gaussian-rational c0, c1."""

    __slots__ = ("c0", "c1")

    def __init__(self, c0=0, c1=0):
        self.c0 = GaussianRational.coerce(c0)
        self.c1 = GaussianRational.coerce(c1)

    def __add__(self, other):
        return _QSqrt2(self.c0 + other.c0, self.c1 + other.c1)

    def __neg__(self):
        return _QSqrt2(-self.c0, -self.c1)

    def __bool__(self):
        return bool(self.c0) or bool(self.c1)

    def __eq__(self, other):
        return isinstance(other, _QSqrt2) and self.c0 == other.c0 and self.c1 == other.c1

    def __complex__(self):
        return complex(self.c0) + _SQRT2 * complex(self.c1)

    def conj(self):
        return _QSqrt2(self.c0.conj(), self.c1.conj())

    def __repr__(self):
        return f"({self.c0!r} + sqrt2*{self.c1!r})"


@dataclass(frozen=True)
class WickOperator:
    """Normal-ordered operator sum c * hbar^l * z^a (hbar d_z)^b.

    ``terms`` maps (a, b, l) to an exact coefficient of the form
    c0 + c1 sqrt(2) (stored as :class:`_QSqrt2`).
    """

    n: int
    terms: Mapping = field(default_factory=dict)

    @classmethod
    def from_coefficients(cls, n: int, coeffs: Mapping) -> "WickOperator":
        """Build from {(a, b, l): exact coefficient} (Gaussian rationals)."""
        terms = {}
        for (a, b, l), c in coeffs.items():
            key = (tuple(a), tuple(b), int(l))
            val = _QSqrt2(c, 0)
            if val:
                terms[key] = val
        return cls(n, terms)

    @classmethod
    def K_alpha(cls, alpha: Sequence[int]) -> "WickOperator":
        """z^alpha (hbar d_z)^alpha."""
        a = tuple(int(v) for v in alpha)
        return cls.from_coefficients(len(a), {(a, a, 0): 1})

    def is_resonant(self, p: Sequence[int]) -> bool:
        return all(sum((x - y) * q for x, y, q in zip(a, b, p)) == 0 for (a, b, _l) in self.terms)

    def is_symmetric(self) -> bool:
        for (a, b, l), c in self.terms.items():
            other = self.terms.get((b, a, l))
            if other is None or other != c.conj():
                return False
        return True

    def numeric_terms(self):
        return [(a, b, l, complex(c)) for (a, b, l), c in self.terms.items()]

    def to_dict(self) -> dict:
        recs = []
        for (a, b, l), c in sorted(self.terms.items()):
            recs.append({"a": list(a), "b": list(b), "h": l,
                         "c0": list(c.c0.to_strings()), "c1_sqrt2": list(c.c1.to_strings())})
        return {"n": self.n, "terms": recs}


def _to_bargmann(A: WeylSeries) -> WeylSeries:
    return change_chart(A, "complex", "bargmann")


def weyl_to_wick(A: WeylSeries) -> WickOperator:
    """Normal-ordered form of the Weyl quantization of a polynomial symbol."""
    B = heat_transform(_to_bargmann(A), mpq(1, 2))
    n = B.n
    terms = {}
    for key, c in B.items():
        a, b, l = key[:n], key[n : 2 * n], key[-1]
        d = sum(a) + sum(b)
        scaled = c * (2 ** (d // 2))
        terms[(a, b, l)] = _QSqrt2(0, scaled) if d % 2 else _QSqrt2(scaled, 0)
    return WickOperator(n, terms)


def wick_to_weyl(op: WickOperator, max_weight: int | None = None) -> WeylSeries:
    """Inverse of :func:`weyl_to_wick` (returns the bargmann-chart Weyl symbol)."""
    n = op.n
    terms = {}
    top = 0
    for (a, b, l), c in op.terms.items():
        d = sum(a) + sum(b)
        if d % 2 == 0:
            if c.c1:
                raise ValueError("coefficient not representable in the scaled bargmann chart")
            val = c.c0 / (2 ** (d // 2))
        else:
            if c.c0:
                raise ValueError("coefficient not representable in the scaled bargmann chart")
            val = c.c1 / (2 ** ((d - 1) // 2))
        terms[tuple(a) + tuple(b) + (l,)] = val
        top = max(top, d + 2 * l)
    W = top if max_weight is None else max_weight
    B = WeylSeries(n, terms, chart="complex", convention="bargmann", max_weight=W)
    return heat_transform(B, mpq(-1, 2))


def _ratio_sqrt(gamma, b, gamma2, a) -> float:
    """sqrt(gamma!/(gamma-b)! * gamma2!/(gamma2-a)!) with a log-domain fallback."""
    prod = 1
    for g, k in zip(gamma, b):
        for i in range(k):
            prod *= g - i
    for g, k in zip(gamma2, a):
        for i in range(k):
            prod *= g - i
    if prod.bit_length() < 1000:
        return math.sqrt(float(prod))
    return math.exp(0.5 * _log_int(prod))


def _log_int(x: int) -> float:
    shift = max(0, x.bit_length() - 60)
    return math.log(x >> shift) + shift * math.log(2.0)


def wick_matrix(op: WickOperator, states: Sequence[tuple[int, ...]], hbar: float,
                strict: bool = False, weight_scale: float = 1.0) -> np.ndarray:
    """Matrix of ``op`` on the orthonormal states listed (truncation drops leaks).

    With ``strict`` true, a term mapping a state outside the list raises.
    ``weight_scale`` multiplies each term by weight_scale**weight, which
    realizes the symbol dilation (x, xi, hbar) -> (e x, e xi, e^2 hbar).
    """
    index = {tuple(s): i for i, s in enumerate(states)}
    dim = len(states)
    M = np.zeros((dim, dim), dtype=complex)
    for (a, b, l), coef in op.terms.items():
        c = complex(coef)
        scale = c * hbar ** (l + 0.5 * (sum(a) + sum(b)))
        if weight_scale != 1.0:
            scale *= weight_scale ** (sum(a) + sum(b) + 2 * l)
        for j, g in enumerate(states):
            if any(gi < bi for gi, bi in zip(g, b)):
                continue
            g2 = tuple(gi - bi + ai for gi, bi, ai in zip(g, b, a))
            i = index.get(g2)
            if i is None:
                if strict:
                    raise ValueError(f"term {(a, b)} maps {g} outside the basis")
                continue
            M[i, j] += scale * _ratio_sqrt(g, b, g2, a)
    return M


@dataclass
class HermitianMatrix:
    data: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def to_dict(self) -> dict:
        d = self.data
        return {"dim": self.dim, "meta": self.meta,
                "entries": [[float(v.real), float(v.imag)] for v in d.reshape(-1)]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _hermitize(M: np.ndarray, meta: dict, tol: float = 1e-12) -> HermitianMatrix:
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    dev = float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0
    if dev > tol * scale:
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e})")
    return HermitianMatrix(0.5 * (M + M.conj().T), meta)


def matrix_of_wick(op: WickOperator, basis: FockBasis, hbar: float, hermitian: bool = True):
    """Matrix of a resonant operator on one eigenspace.

    Returns a :class:`HermitianMatrix` (after a symmetry check) or the raw
    complex array when ``hermitian`` is false.
    """
    if not op.is_resonant(basis.p):
        raise ValueError("operator has non-resonant terms and does not preserve the eigenspace")
    M = wick_matrix(op, basis.states, hbar, strict=True)
    if not hermitian:
        return M
    return _hermitize(M, {"p": list(basis.p), "N": basis.N, "hbar": hbar})


def ladder_matrices(states: Sequence[tuple[int, ...]], hbar: float):
    """Annihilation matrices a_j on the listed states (creation is the adjoint)."""
    index = {tuple(s): i for i, s in enumerate(states)}
    n = len(states[0]) if states else 0
    out = []
    for j in range(n):
        a = np.zeros((len(states), len(states)))
        for col, s in enumerate(states):
            if s[j] == 0:
                continue
            t = list(s)
            t[j] -= 1
            row = index.get(tuple(t))
            if row is not None:
                a[row, col] = math.sqrt(hbar * s[j])
        out.append(a)
    return out


class TruncationError(RuntimeError):
    """Lowest eigenvalues changed between truncation levels Nmax and Nmax + 5."""

    def __init__(self, message, first, second):
        super().__init__(message)
        self.first = first
        self.second = second


def hermitian_eigenvalues(M, check: bool = True) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix (LAPACK via numpy)."""
    data = M.data if isinstance(M, HermitianMatrix) else np.asarray(M)
    if data.size == 0:
        return np.zeros(0)
    if not np.all(np.isfinite(data)):
        raise ValueError("matrix has non-finite entries")
    data = 0.5 * (data + data.conj().T)
    w, v = np.linalg.eigh(data)
    if check:
        norm = max(np.linalg.norm(data, 2), 1e-300)
        for k in {0, len(w) // 2, len(w) - 1}:
            r = np.linalg.norm(data @ v[:, k] - w[k] * v[:, k])
            if r > 1e-10 * norm:
                raise ArithmeticError(f"eigenpair residual {r:.3e} too large")
    return np.asarray(w, dtype=float)


def direct_spectrum(H: WeylSeries, hbar: float, Nmax: int, count: int,
                    p: Sequence[int] | None = None, tol: float = 1e-9,
                    check: bool = True) -> np.ndarray:
    """Lowest ``count`` eigenvalues of the Weyl quantization of H.

    The operator is represented on {alpha : <p, alpha> <= Nmax}; the run is
    repeated at Nmax + 5 and a :class:`TruncationError` is raised when the
    two disagree by more than ``tol`` (absolute, relative to max(1, |E|)).
    """
    n = H.n
    p = tuple(p) if p is not None else (1,) * n
    op = weyl_to_wick(H)

    def run(Nm):
        states = enumerate_truncated(p, Nm)
        M = wick_matrix(op, states, hbar)
        return hermitian_eigenvalues(_hermitize(M, {}, 1e-10), check=False)[:count]

    first = run(Nmax)
    if not check:
        return first
    second = run(Nmax + 5)
    diff = np.max(np.abs(first - second) / np.maximum(1.0, np.abs(second))) if len(first) else 0.0
    if diff > tol:
        raise TruncationError(f"truncation not converged (max change {diff:.3e})", first, second)
    return second
