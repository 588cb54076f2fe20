"""Integer-lattice analysis of a rational frequency vector.

Everything here is exact: frequencies are ``Fraction`` values and lattice
computations use unimodular integer column operations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import gcd
from typing import Sequence

__all__ = [
    "ResonanceData",
    "ZetaStratum",
    "as_fractions",
    "primitive_integer_vector",
    "integer_kernel",
    "resonance_lattice",
    "resonance_order",
    "complete_resonance",
    "band_exponent",
    "torus_decomposition",
    "zeta_strata",
    "analyze",
]


def as_fractions(nu: Sequence) -> tuple[Fraction, ...]:
    out = []
    for v in nu:
        if isinstance(v, float):
            raise TypeError("frequencies must be exact rationals")
        if hasattr(v, "numerator") and hasattr(v, "denominator"):
            out.append(Fraction(int(v.numerator), int(v.denominator)))
        else:
            out.append(Fraction(v))
    return tuple(out)


def _check_positive(nu):
    nu = as_fractions(nu)
    if not nu:
        raise ValueError("empty frequency vector")
    if any(v <= 0 for v in nu):
        raise ValueError(f"frequencies must be positive, got {nu}")
    return nu


def _lcm(a: int, b: int) -> int:
    return a * b // gcd(a, b)


def primitive_integer_vector(nu: Sequence) -> tuple[int, ...]:
    """Integer vector proportional to ``nu`` with coprime entries."""
    nu = as_fractions(nu)
    den = 1
    for v in nu:
        den = _lcm(den, v.denominator)
    ints = [int(v * den) for v in nu]
    g = 0
    for a in ints:
        g = gcd(g, a)
    return tuple(a // g for a in ints) if g else tuple(ints)


def integer_kernel(rows: Sequence[Sequence[int]], n: int) -> list[tuple[int, ...]]:
    """Z-basis of {v in Z^n : M v = 0} for an integer matrix M.

    Column-style Hermite reduction: unimodular column operations bring M to
    lower echelon form M U = [H | 0]; the columns of U facing zero columns
    span the (saturated) integer kernel.
    """
    M = [list(map(int, r)) for r in rows]
    U = [[int(i == j) for j in range(n)] for i in range(n)]
    pivot_col = 0
    for r in range(len(M)):
        if pivot_col >= n:
            break
        # Euclid on the entries of row r in columns pivot_col..n-1
        while True:
            nz = [c for c in range(pivot_col, n) if M[r][c] != 0]
            if len(nz) <= 1:
                break
            c_min = min(nz, key=lambda c: abs(M[r][c]))
            for c in nz:
                if c == c_min:
                    continue
                q = M[r][c] // M[r][c_min]
                for row in M:
                    row[c] -= q * row[c_min]
                for row in U:
                    row[c] -= q * row[c_min]
        nz = [c for c in range(pivot_col, n) if M[r][c] != 0]
        if not nz:
            continue
        c = nz[0]
        if c != pivot_col:
            for row in M:
                row[c], row[pivot_col] = row[pivot_col], row[c]
            for row in U:
                row[c], row[pivot_col] = row[pivot_col], row[c]
        pivot_col += 1
    basis = []
    for c in range(pivot_col, n):
        v = tuple(U[i][c] for i in range(n))
        if any(v):
            # normalize sign: first nonzero entry positive
            first = next(a for a in v if a)
            if first < 0:
                v = tuple(-a for a in v)
            basis.append(v)
    return basis


def resonance_lattice(nu: Sequence) -> list[tuple[int, ...]]:
    """Basis of the resonance module {alpha in Z^n : <alpha, nu> = 0}."""
    nu = _check_positive(nu)
    v = primitive_integer_vector(nu)
    return integer_kernel([v], len(nu))


def _l1_shell(n: int, norm: int):
    """All integer vectors of dimension n with l1 norm exactly ``norm``."""
    if n == 1:
        if norm == 0:
            yield (0,)
        else:
            yield (norm,)
            yield (-norm,)
        return
    for a in range(-norm, norm + 1):
        for rest in _l1_shell(n - 1, norm - abs(a)):
            yield (a,) + rest


def resonance_order(nu: Sequence, bound: int = 20) -> int | None:
    """Minimal l1 norm of a nonzero resonance, or ``None`` above ``bound``."""
    if bound < 2:
        raise ValueError("bound must be at least 2")
    nu = _check_positive(nu)
    v = primitive_integer_vector(nu)
    n = len(v)
    if n == 1:
        return None
    for norm in range(1, bound + 1):
        for a in _l1_shell(n, norm):
            if sum(x * y for x, y in zip(a, v)) == 0:
                return norm
    return None


def complete_resonance(nu: Sequence) -> tuple[Fraction, tuple[int, ...]]:
    """Write nu = nu_c * p with p a coprime positive integer vector."""
    nu = _check_positive(nu)
    p = primitive_integer_vector(nu)
    nu_c = nu[0] / p[0]
    assert all(nu_c * pi == v for pi, v in zip(p, nu))
    return nu_c, p


def band_exponent(p: Sequence[int]) -> int:
    """3 if p_j = 2 p_i or p_i = p_j + p_k for some indices, else 4."""
    p = [int(a) for a in p]
    n = len(p)
    for i in range(n):
        for j in range(n):
            if i != j and p[j] == 2 * p[i]:
                return 3
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if j != k and p[i] == p[j] + p[k]:
                    return 3
    return 4


def torus_decomposition(nu: Sequence) -> tuple[int, list[tuple[Fraction, tuple[int, ...]]]]:
    """Z-basis u^1..u^k of the orthogonal lattice of the resonance module.

    Returns ``(k, [(lambda_j, u^j), ...])`` with nu = sum_j lambda_j u^j.
    """
    nu = _check_positive(nu)
    n = len(nu)
    lattice = resonance_lattice(nu)
    if lattice:
        perp = integer_kernel(lattice, n)
    else:
        perp = [tuple(int(i == j) for j in range(n)) for i in range(n)]
    lambdas = _solve_rational(perp, nu)
    return len(perp), list(zip(lambdas, perp))


def _solve_rational(vectors, target):
    """Exact least-squares-free solve of sum_j c_j vectors[j] = target."""
    k = len(vectors)
    n = len(target)
    # normal equations are exact here because a solution exists
    G = [[Fraction(sum(vectors[a][i] * vectors[b][i] for i in range(n))) for b in range(k)] for a in range(k)]
    rhs = [Fraction(sum(vectors[a][i] * target[i] for i in range(n))) for a in range(k)]
    for col in range(k):
        piv = next(r for r in range(col, k) if G[r][col] != 0)
        G[col], G[piv] = G[piv], G[col]
        rhs[col], rhs[piv] = rhs[piv], rhs[col]
        for r in range(k):
            if r != col and G[r][col] != 0:
                f = G[r][col] / G[col][col]
                G[r] = [a - f * b for a, b in zip(G[r], G[col])]
                rhs[r] -= f * rhs[col]
    sol = [rhs[i] / G[i][i] for i in range(k)]
    recon = [sum(sol[j] * vectors[j][i] for j in range(k)) for i in range(n)]
    if recon != list(target):
        raise ArithmeticError("target is not in the span of the given vectors")
    return sol


@dataclass(frozen=True)
class ZetaStratum:
    """Root of unity exp(2 pi i q/d) together with its fixed-index data."""

    q: int
    d: int
    index_set: tuple[int, ...]
    n_zeta: int
    m_zeta: int

    @property
    def value(self) -> complex:
        import cmath

        return cmath.exp(2j * cmath.pi * self.q / self.d)

    def power(self, k: int) -> complex:
        """zeta^k evaluated through k mod d (no accumulated rounding)."""
        import cmath

        r = (self.q * k) % self.d
        if r == 0:
            return 1.0 + 0.0j
        if 2 * r == self.d:
            return -1.0 + 0.0j
        return cmath.exp(2j * cmath.pi * r / self.d)

    def conjugate(self) -> tuple[int, int]:
        return ((-self.q) % self.d, self.d)

    def to_dict(self) -> dict:
        return {"q": self.q, "d": self.d, "index_set": list(self.index_set),
                "n_zeta": self.n_zeta, "m_zeta": self.m_zeta}


def zeta_strata(p: Sequence[int]) -> list[ZetaStratum]:
    """Roots of unity zeta with zeta^{p_i} = 1 for at least one i."""
    p = tuple(int(a) for a in p)
    if any(a <= 0 for a in p):
        raise ValueError("p must be positive")
    divisors = set()
    for a in p:
        for d in range(1, a + 1):
            if a % d == 0:
                divisors.add(d)
    out = []
    for d in sorted(divisors):
        idx = tuple(i for i, a in enumerate(p) if a % d == 0)
        m = 0
        for i in idx:
            m = gcd(m, p[i])
        for q in range(d):
            if gcd(q, d) != 1 and not (d == 1 and q == 0):
                continue
            out.append(ZetaStratum(q, d, idx, len(idx) - 1, m))
    return out


@dataclass(frozen=True)
class ResonanceData:
    nu: tuple[Fraction, ...]
    lattice_basis: tuple[tuple[int, ...], ...]
    rank: int
    raw_order: int | None
    r_nu: int | None
    nu_c: Fraction
    p: tuple[int, ...]
    band_r: int | None
    strata: tuple[ZetaStratum, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "nu": [str(v) for v in self.nu],
            "lattice_basis": [list(v) for v in self.lattice_basis],
            "rank": self.rank,
            "raw_order": self.raw_order,
            "r_nu": self.r_nu,
            "nu_c": str(self.nu_c),
            "p": list(self.p),
            "band_r": self.band_r,
            "strata": [s.to_dict() for s in self.strata],
        }


def analyze(nu: Sequence, W: int = 10) -> ResonanceData:
    """Collect all resonance data for ``nu`` with enumeration bound 2W."""
    nu = _check_positive(nu)
    basis = resonance_lattice(nu)
    order = resonance_order(nu, max(2, 2 * W)) if len(nu) > 1 else None
    r_nu = None if order is None else max(3, order)
    nu_c, p = complete_resonance(nu)
    band = band_exponent(p) if len(p) > 1 else None
    return ResonanceData(nu, tuple(basis), len(basis), order, r_nu, nu_c, p, band, tuple(zeta_strata(p)))
