"""Exact graded Weyl algebra on truncated polynomial symbols.

Symbols are polynomials in (x, xi, hbar) or in complex coordinates
(z, zbar, hbar) with Gaussian-rational coefficients.  The weight of a
monomial counts phase-space degree once and the power of hbar twice; a
series stores its truncation weight and never holds terms above it.

Complex charts
--------------
Two complex coordinate conventions are supported:

``birkhoff``
    z = x + i xi.  Used by the normal-form solver.
``bargmann``
    z = (x - i xi)/sqrt(2).  Used for Fock-space work.  To keep every
    coefficient in Q(i), the series stores coefficients with respect to
    the scaled variable w = sqrt(2) z = x - i xi.  A stored coefficient
    c on w^a wbar^b is the coefficient c * 2^((|a|+|b|)/2) on z^a zbar^b;
    :meth:`WeylSeries.bargmann_coefficient` returns the latter exactly.

With u = x + i s xi (s = +1 for birkhoff, -1 for the scaled bargmann
variable) the Weyl product reads

    A * B = A exp(s hbar (d_u (x) d_ubar - d_ubar (x) d_u)) B,

and in the real chart

    A * B = A exp(i hbar/2 (d_x (x) d_xi - d_xi (x) d_x)) B,

which is the convention with [xi_j, x_j] = hbar/i.
"""
from __future__ import annotations

import json
from fractions import Fraction
from functools import lru_cache
from itertools import product as _cartesian
from math import comb, factorial
from typing import Iterable, Iterator, Mapping

import gmpy2
import numpy as np
from gmpy2 import mpq

__all__ = [
    "GaussianRational",
    "Monomial",
    "WeylSeries",
    "weight",
    "moyal_product",
    "moyal_bracket",
    "ihbar_bracket",
    "poisson_bracket",
    "commutative_product",
    "change_chart",
    "heat_transform",
    "harmonic_oscillator",
    "DEFAULT_WEIGHT",
]

DEFAULT_WEIGHT = 10
CHARTS = ("real", "complex")
CONVENTIONS = ("birkhoff", "bargmann")
_ZERO = mpq(0)
_ONE = mpq(1)


def _to_mpq(value) -> mpq:
    if type(value) is type(_ONE):
        return value
    if isinstance(value, (int, np.integer)):
        return mpq(int(value))
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    if isinstance(value, str):
        text = value.strip()
        if "/" in text:
            num, den = text.split("/")
            return mpq(int(num), int(den))
        return mpq(int(text))
    if isinstance(value, float):
        raise TypeError("floats are not accepted as exact coefficients; use Fraction or 'p/q'")
    try:
        return mpq(value)
    except Exception as exc:  # pragma: no cover - defensive
        raise TypeError(f"cannot convert {value!r} to an exact rational") from exc


def _q_str(q: mpq) -> str:
    return f"{int(q.numerator)}/{int(q.denominator)}"


class GaussianRational:
    """Exact complex number with rational real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        if isinstance(re, GaussianRational):
            if im:
                raise TypeError("cannot combine a GaussianRational with an imaginary part")
            object.__setattr__(self, "re", re.re)
            object.__setattr__(self, "im", re.im)
            return
        object.__setattr__(self, "re", _to_mpq(re))
        object.__setattr__(self, "im", _to_mpq(im))

    def __setattr__(self, name, value):
        raise AttributeError("GaussianRational is immutable")

    @classmethod
    def coerce(cls, value) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, complex):
            raise TypeError("complex floats are not exact")
        return cls(value)

    @classmethod
    def _raw(cls, re: mpq, im: mpq) -> "GaussianRational":
        obj = object.__new__(cls)
        object.__setattr__(obj, "re", re)
        object.__setattr__(obj, "im", im)
        return obj

    def conj(self) -> "GaussianRational":
        return GaussianRational._raw(self.re, -self.im)

    def abs2(self) -> mpq:
        return self.re * self.re + self.im * self.im

    def __add__(self, other):
        o = _coerce_or_none(other)
        if o is None:
            return NotImplemented
        return GaussianRational._raw(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = _coerce_or_none(other)
        if o is None:
            return NotImplemented
        return GaussianRational._raw(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = _coerce_or_none(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = _coerce_or_none(other)
        if o is None:
            return NotImplemented
        return GaussianRational._raw(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _coerce_or_none(other)
        if o is None:
            return NotImplemented
        d = o.abs2()
        if d == 0:
            raise ZeroDivisionError("division by zero GaussianRational")
        num = self * o.conj()
        return GaussianRational._raw(num.re / d, num.im / d)

    def __rtruediv__(self, other):
        o = _coerce_or_none(other)
        if o is None:
            return NotImplemented
        return o / self

    def __neg__(self):
        return GaussianRational._raw(-self.re, -self.im)

    def __pos__(self):
        return self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return (GaussianRational(1) / self) ** (-k)
        out = GaussianRational(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        o = _coerce_or_none(other)
        if o is None:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def is_real(self) -> bool:
        return self.im == 0

    def to_strings(self) -> tuple[str, str]:
        return _q_str(self.re), _q_str(self.im)

    def __repr__(self):
        if self.im == 0:
            return f"GaussianRational({_q_str(self.re)})"
        return f"GaussianRational({_q_str(self.re)}, {_q_str(self.im)})"


_I = GaussianRational(0, 1)


def _coerce_or_none(value):
    if isinstance(value, GaussianRational):
        return value
    try:
        return GaussianRational(value)
    except TypeError:
        return None


class Monomial(tuple):
    """Exponent record (first, second, hexp) of a single monomial.

    In the real chart ``first`` holds x-exponents and ``second`` the
    xi-exponents; in a complex chart they are the z and zbar exponents.
    """

    __slots__ = ()

    def __new__(cls, first, second, hexp=0):
        first = tuple(int(a) for a in first)
        second = tuple(int(b) for b in second)
        if len(first) != len(second):
            raise ValueError("exponent vectors differ in length")
        if any(a < 0 for a in first + second) or hexp < 0:
            raise ValueError("exponents must be nonnegative")
        return super().__new__(cls, (first, second, int(hexp)))

    @property
    def first(self):
        return self[0]

    @property
    def second(self):
        return self[1]

    @property
    def hexp(self):
        return self[2]

    def key(self) -> tuple:
        return self[0] + self[1] + (self[2],)

    @classmethod
    def from_key(cls, key: tuple, n: int) -> "Monomial":
        return cls(key[:n], key[n : 2 * n], key[2 * n])


def weight(m) -> int:
    """Weight |first| + |second| + 2 hexp of a monomial or packed key."""
    if isinstance(m, Monomial):
        return sum(m[0]) + sum(m[1]) + 2 * m[2]
    return sum(m[:-1]) + 2 * m[-1]


def _key_weight(key: tuple) -> int:
    return sum(key) + key[-1]


class WeylSeries:
    """Truncated polynomial symbol with exact Gaussian-rational coefficients.

    Terms are keyed by packed exponent tuples
    ``(first_1..first_n, second_1..second_n, hexp)``.  Instances are
    treated as immutable.
    """

    __slots__ = ("n", "chart", "convention", "max_weight", "_terms")

    def __init__(
        self,
        n: int,
        terms: Mapping | None = None,
        *,
        chart: str = "real",
        convention: str | None = None,
        max_weight: int = DEFAULT_WEIGHT,
    ):
        if chart not in CHARTS:
            raise ValueError(f"unknown chart {chart!r}")
        if chart == "complex":
            convention = convention or "birkhoff"
            if convention not in CONVENTIONS:
                raise ValueError(f"unknown convention {convention!r}")
        else:
            convention = None
        self.n = int(n)
        self.chart = chart
        self.convention = convention
        self.max_weight = int(max_weight)
        clean: dict = {}
        if terms:
            for k, c in terms.items():
                key = k.key() if isinstance(k, Monomial) else tuple(int(e) for e in k)
                if len(key) != 2 * self.n + 1:
                    raise ValueError(f"key {key} does not match dimension {self.n}")
                if any(e < 0 for e in key):
                    raise ValueError(f"negative exponent in {key}")
                coef = GaussianRational.coerce(c)
                if not coef or _key_weight(key) > self.max_weight:
                    continue
                if key in clean:
                    coef = clean[key] + coef
                    if not coef:
                        del clean[key]
                        continue
                clean[key] = coef
        self._terms = clean

    # -- construction helpers -------------------------------------------------
    @classmethod
    def _from_clean(cls, n, terms, chart, convention, max_weight) -> "WeylSeries":
        obj = object.__new__(cls)
        obj.n = n
        obj.chart = chart
        obj.convention = convention if chart == "complex" else None
        obj.max_weight = max_weight
        obj._terms = terms
        return obj

    def _like(self, terms, max_weight=None) -> "WeylSeries":
        return WeylSeries._from_clean(
            self.n, terms, self.chart, self.convention,
            self.max_weight if max_weight is None else max_weight,
        )

    @classmethod
    def zero(cls, n, *, chart="real", convention=None, max_weight=DEFAULT_WEIGHT):
        return cls(n, {}, chart=chart, convention=convention, max_weight=max_weight)

    @classmethod
    def constant(cls, n, value=1, *, chart="real", convention=None, max_weight=DEFAULT_WEIGHT):
        return cls(n, {(0,) * (2 * n + 1): value}, chart=chart, convention=convention, max_weight=max_weight)

    @classmethod
    def monomial(cls, n, first, second, hexp=0, coeff=1, **kw):
        return cls(n, {Monomial(first, second, hexp): coeff}, **kw)

    @classmethod
    def generator(cls, n, name: str, j: int = 0, **kw):
        """Coordinate function ``x``, ``xi``, ``z``, ``zbar`` or ``hbar``.

        For complex charts pass ``chart='complex'`` and a convention.
        """
        e = [0] * n
        if name == "hbar":
            return cls.monomial(n, e, e, 1, **kw)
        e[j] = 1
        zero = [0] * n
        if name in ("x", "z"):
            return cls.monomial(n, e, zero, 0, **kw)
        if name in ("xi", "zbar"):
            return cls.monomial(n, zero, e, 0, **kw)
        raise ValueError(f"unknown generator {name!r}")

    # -- basic access ---------------------------------------------------------
    @property
    def terms(self) -> Mapping:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def coefficient(self, first, second=None, hexp=0) -> GaussianRational:
        if second is None:
            key = tuple(first)
        else:
            key = tuple(first) + tuple(second) + (hexp,)
        return self._terms.get(key, GaussianRational(0))

    def bargmann_coefficient(self, first, second, hexp=0) -> tuple[GaussianRational, bool]:
        """Coefficient on z^first zbar^second with z = (x - i xi)/sqrt(2).

        Returns ``(q, root2)`` with the exact value ``q * sqrt(2)`` when
        ``root2`` is true and ``q`` otherwise.
        """
        if self.chart != "complex" or self.convention != "bargmann":
            raise ValueError("series is not in the bargmann chart")
        c = self.coefficient(first, second, hexp)
        d = sum(first) + sum(second)
        return c * (2 ** (d // 2)), bool(d % 2)

    def monomials(self) -> list[Monomial]:
        return [Monomial.from_key(k, self.n) for k in self._terms]

    def weights(self) -> set[int]:
        return {_key_weight(k) for k in self._terms}

    def min_weight(self) -> int | None:
        return min(self.weights()) if self._terms else None

    def in_O(self, N: int) -> bool:
        """True when every term has weight at least ``N``."""
        return all(_key_weight(k) >= N for k in self._terms)

    def is_homogeneous(self) -> bool:
        return len(self.weights()) <= 1

    def homogeneous_part(self, w: int) -> "WeylSeries":
        return self._like({k: c for k, c in self._terms.items() if _key_weight(k) == w})

    def truncate(self, W: int) -> "WeylSeries":
        W = min(W, self.max_weight)
        return self._like({k: c for k, c in self._terms.items() if _key_weight(k) <= W}, W)

    def with_max_weight(self, W: int) -> "WeylSeries":
        """Same terms (dropping any above ``W``) with truncation weight ``W``."""
        return self._like({k: c for k, c in self._terms.items() if _key_weight(k) <= W}, W)

    def drop_hbar(self) -> "WeylSeries":
        """Classical part: terms with hexp = 0."""
        return self._like({k: c for k, c in self._terms.items() if k[-1] == 0})

    def is_real(self) -> bool:
        if self.chart == "real":
            return all(c.im == 0 for c in self._terms.values())
        n = self.n
        for k, c in self._terms.items():
            partner = k[n : 2 * n] + k[:n] + (k[-1],)
            if self._terms.get(partner, GaussianRational(0)) != c.conj():
                return False
        return True

    def conj(self) -> "WeylSeries":
        """Pointwise complex conjugate of the symbol."""
        if self.chart == "real":
            return self._like({k: c.conj() for k, c in self._terms.items()})
        n = self.n
        return self._like({k[n : 2 * n] + k[:n] + (k[-1],): c.conj() for k, c in self._terms.items()})

    def hermitian_part(self) -> "WeylSeries":
        return (self + self.conj()).scale(GaussianRational(mpq(1, 2)))

    # -- linear structure -----------------------------------------------------
    def _check_compatible(self, other: "WeylSeries"):
        if not isinstance(other, WeylSeries):
            raise TypeError("expected a WeylSeries")
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")
        if other.chart != self.chart or other.convention != self.convention:
            raise ValueError(
                f"chart mismatch: {self.chart}/{self.convention} vs {other.chart}/{other.convention}"
            )

    def __add__(self, other):
        if not isinstance(other, WeylSeries):
            if other == 0:
                return self
            other = WeylSeries.constant(self.n, other, chart=self.chart,
                                        convention=self.convention, max_weight=self.max_weight)
        self._check_compatible(other)
        W = min(self.max_weight, other.max_weight)
        out = {k: c for k, c in self._terms.items() if _key_weight(k) <= W}
        for k, c in other._terms.items():
            if _key_weight(k) > W:
                continue
            if k in out:
                s = out[k] + c
                if s:
                    out[k] = s
                else:
                    del out[k]
            else:
                out[k] = c
        return self._like(out, W)

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        return self._like({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        if not isinstance(other, WeylSeries):
            return self + (-GaussianRational.coerce(other))
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "WeylSeries":
        c = GaussianRational.coerce(c)
        if not c:
            return self._like({})
        return self._like({k: v * c for k, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, WeylSeries):
            raise TypeError("use moyal_product or commutative_product for series products")
        return self.scale(other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.scale(GaussianRational(1) / GaussianRational.coerce(other))

    def times_hbar(self, k: int = 1) -> "WeylSeries":
        """Multiply by hbar^k (k may be negative if divisible)."""
        out = {}
        for key, c in self._terms.items():
            h = key[-1] + k
            if h < 0:
                raise ValueError("series is not divisible by that power of hbar")
            new = key[:-1] + (h,)
            if _key_weight(new) <= self.max_weight:
                out[new] = c
        return self._like(out)

    def __eq__(self, other):
        if not isinstance(other, WeylSeries):
            return NotImplemented
        return (
            self.n == other.n
            and self.chart == other.chart
            and self.convention == other.convention
            and self._terms == other._terms
        )

    def __hash__(self):  # pragma: no cover - series are not meant as dict keys
        return hash((self.n, self.chart, self.convention, frozenset(self._terms.items())))

    def __repr__(self):
        head = f"WeylSeries(n={self.n}, chart={self.chart}"
        if self.convention:
            head += f"/{self.convention}"
        head += f", W={self.max_weight}, terms={len(self._terms)})"
        return head

    def pretty(self) -> str:
        """Human-readable polynomial string (for diagnostics)."""
        if not self._terms:
            return "0"
        names = ("x", "xi") if self.chart == "real" else ("z", "zb")
        parts = []
        for key in sorted(self._terms, key=lambda k: (_key_weight(k), k)):
            c = self._terms[key]
            cs = f"({_q_str(c.re)}" + (f"{'+' if c.im >= 0 else '-'}{_q_str(abs(c.im))}i" if c.im else "") + ")"
            fac = []
            for j in range(self.n):
                for name, e in ((names[0], key[j]), (names[1], key[self.n + j])):
                    if e:
                        fac.append(f"{name}{j + 1}" + (f"^{e}" if e > 1 else ""))
            if key[-1]:
                fac.append("h" + (f"^{key[-1]}" if key[-1] > 1 else ""))
            parts.append(cs + ("*" + "*".join(fac) if fac else ""))
        return " + ".join(parts)

    # -- calculus ---------------------------------------------------------------
    def derivative(self, var: int) -> "WeylSeries":
        """Partial derivative in packed variable ``var`` (0..2n-1)."""
        out = {}
        for k, c in self._terms.items():
            e = k[var]
            if e:
                nk = k[:var] + (e - 1,) + k[var + 1 :]
                out[nk] = c * e
        return self._like(out)

    # -- numerics ---------------------------------------------------------------
    def evaluate(self, x, xi, hbar: float = 0.0) -> np.ndarray:
        """Evaluate the symbol at real phase-space points.

        ``x`` and ``xi`` have shape (..., n).  Complex charts are evaluated
        through their own coordinates, so no chart change is needed.
        """
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if self.chart == "real":
            u, v = x, xi
        else:
            s = 1.0 if self.convention == "birkhoff" else -1.0
            u = x + 1j * s * xi
            v = x - 1j * s * xi
        if not self._terms:
            return np.zeros(x.shape[:-1], dtype=complex)
        keys = np.array(list(self._terms.keys()), dtype=int)
        coefs = np.array([complex(c) for c in self._terms.values()])
        n = self.n
        out = np.zeros(x.shape[:-1], dtype=complex)
        for row, c in zip(keys, coefs):
            term = c * hbar ** row[-1]
            val = np.ones(x.shape[:-1], dtype=complex) * term
            for j in range(n):
                if row[j]:
                    val = val * u[..., j] ** row[j]
                if row[n + j]:
                    val = val * v[..., j] ** row[n + j]
            out = out + val
        return out

    # -- serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        a, b = ("x", "xi") if self.chart == "real" else ("z", "zbar")
        n = self.n
        recs = []
        for key in sorted(self._terms, key=lambda k: (_key_weight(k), k)):
            c = self._terms[key]
            re, im = c.to_strings()
            recs.append({a: list(key[:n]), b: list(key[n : 2 * n]), "h": key[-1], "re": re, "im": im})
        return {
            "n": n,
            "chart": self.chart,
            "convention": self.convention,
            "max_weight": self.max_weight,
            "terms": recs,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "WeylSeries":
        n = int(data["n"])
        chart = data.get("chart", "real")
        a, b = ("x", "xi") if chart == "real" else ("z", "zbar")
        terms = {}
        for rec in data.get("terms", []):
            key = Monomial(rec.get(a, [0] * n), rec.get(b, [0] * n), int(rec.get("h", 0))).key()
            coef = GaussianRational(rec.get("re", "0"), rec.get("im", "0"))
            terms[key] = terms.get(key, GaussianRational(0)) + coef
        return cls(n, terms, chart=chart, convention=data.get("convention"),
                   max_weight=int(data.get("max_weight", DEFAULT_WEIGHT)))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "WeylSeries":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# bidifferential expansions
# ---------------------------------------------------------------------------

def _falling(a: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= a - i
    return out


@lru_cache(maxsize=None)
def _pair_table(a: int, b: int, c: int, d: int) -> tuple:
    """One-variable expansion of exp(t(dq (x) dp - dp (x) dq)) on q^a p^b (x) q^c p^d.

    Entries are (order, q exponent, p exponent, rational coefficient); the
    coefficient of t^order is the stored rational.
    """
    out = []
    for k in range(min(a, d) + 1):
        for m in range(min(b, c) + 1):
            num = _falling(a, k) * _falling(d, k) * _falling(b, m) * _falling(c, m)
            if m % 2:
                num = -num
            out.append((k + m, a - k + c - m, b - m + d - k, mpq(num, factorial(k) * factorial(m))))
    return tuple(out)


@lru_cache(maxsize=1 << 18)
def _pair_expansion(ka: tuple, kb: tuple, n: int, smax: int) -> tuple:
    """Multi-variable expansion of the Moyal bidifferential operator.

    ``ka``/``kb`` are packed keys without the hbar slot.  Returns tuples
    (order, first exps, second exps, rational) with order <= smax.
    """
    partial = [(0, (), (), _ONE)]
    for j in range(n):
        tab = _pair_table(ka[j], ka[n + j], kb[j], kb[n + j])
        nxt = []
        for s, q, p, c in partial:
            for s1, q1, p1, c1 in tab:
                s2 = s + s1
                if s2 > smax:
                    continue
                nxt.append((s2, q + (q1,), p + (p1,), c * c1))
        partial = nxt
    return tuple((s, q + p, c) for s, q, p, c in partial)


_ROT = {0: (1, 0), 1: (0, 1), 2: (-1, 0), 3: (0, -1)}


def _mode_factor(mode: str, chart: str, convention: str | None, s: int):
    """Return (real rational factor, power of i, hbar shift) for order s.

    ``None`` means the order does not contribute in this mode.
    """
    sign = -1 if convention == "bargmann" else 1
    if mode == "product":
        if chart == "real":
            return mpq(1, 2 ** s), s, s
        return mpq(sign ** s), 0, s
    if s % 2 == 0:
        return None
    if mode == "bracket":
        if chart == "real":
            return mpq(2, 2 ** s), s, s
        return mpq(2 * sign ** s), 0, s
    if mode == "ihbar":
        if chart == "real":
            return mpq(2, 2 ** s), s + 1, s - 1
        return mpq(2 * sign ** s), 1, s - 1
    if mode == "poisson":
        if s != 1:
            return None
        if chart == "real":
            return mpq(-1), 0, 0
        return mpq(2 * sign), 1, 0
    raise ValueError(mode)


def _group_by_weight(A: WeylSeries) -> dict:
    groups: dict = {}
    for k, c in A._terms.items():
        groups.setdefault(_key_weight(k), []).append((k[:-1], k[-1], c.re, c.im))
    return groups


def _bilinear(A: WeylSeries, B: WeylSeries, W: int, mode: str) -> WeylSeries:
    A._check_compatible(B)
    n = A.n
    chart, conv = A.chart, A.convention
    drop = 2 if mode in ("ihbar", "poisson") else 0
    smax = 1 if mode == "poisson" else 10 ** 9
    factors = {}
    acc: dict = {}
    ga = _group_by_weight(A)
    gb = _group_by_weight(B)
    for wa, ta in ga.items():
        for wb, tb in gb.items():
            if wa + wb - drop > W:
                continue
            for ka, ha, ar, ai in ta:
                for kb, hb, br, bi in tb:
                    pr = ar * br - ai * bi
                    pi = ar * bi + ai * br
                    for s, kk, c in _pair_expansion(ka, kb, n, smax):
                        f = factors.get(s)
                        if f is None:
                            f = _mode_factor(mode, chart, conv, s)
                            factors[s] = f if f is not None else False
                        if not f:
                            continue
                        r, ipow, dh = f
                        h = ha + hb + dh
                        if h < 0:
                            continue
                        cr = c * r
                        rr, ri = pr * cr, pi * cr
                        rot = _ROT[ipow % 4]
                        if rot[0]:
                            vr, vi = rot[0] * rr, rot[0] * ri
                        else:
                            vr, vi = -rot[1] * ri, rot[1] * rr
                        key = kk + (h,)
                        cur = acc.get(key)
                        if cur is None:
                            acc[key] = [vr, vi]
                        else:
                            cur[0] += vr
                            cur[1] += vi
    out = {}
    for key, (vr, vi) in acc.items():
        if vr or vi:
            out[key] = GaussianRational._raw(vr, vi)
    return WeylSeries._from_clean(n, out, chart, conv, W)


def _default_W(A: WeylSeries, B: WeylSeries, W) -> int:
    return min(A.max_weight, B.max_weight) if W is None else int(W)


def moyal_product(A: WeylSeries, B: WeylSeries, W: int | None = None) -> WeylSeries:
    """Weyl star product A * B truncated at weight ``W``."""
    return _bilinear(A, B, _default_W(A, B, W), "product")


def moyal_bracket(A: WeylSeries, B: WeylSeries, W: int | None = None) -> WeylSeries:
    """Commutator A * B - B * A truncated at weight ``W``."""
    return _bilinear(A, B, _default_W(A, B, W), "bracket")


def ihbar_bracket(A: WeylSeries, B: WeylSeries, W: int | None = None) -> WeylSeries:
    """(i/hbar)[A, B] truncated at weight ``W``.

    The commutator is always divisible by hbar, so this is computed
    directly from the odd orders of the expansion.
    """
    return _bilinear(A, B, _default_W(A, B, W), "ihbar")


def poisson_bracket(A: WeylSeries, B: WeylSeries, W: int | None = None) -> WeylSeries:
    """{A, B} = sum_j (d_xi A d_x B - d_x A d_xi B), truncated at ``W``.

    In a complex chart the bracket is expressed in the chart variables.
    """
    return _bilinear(A, B, _default_W(A, B, W), "poisson")


def commutative_product(A: WeylSeries, B: WeylSeries, W: int | None = None) -> WeylSeries:
    """Pointwise (classical) product of two symbols, truncated at ``W``."""
    A._check_compatible(B)
    W = _default_W(A, B, W)
    acc: dict = {}
    for ka, ca in A._terms.items():
        wa = _key_weight(ka)
        for kb, cb in B._terms.items():
            if wa + _key_weight(kb) > W:
                continue
            key = tuple(x + y for x, y in zip(ka, kb))
            acc[key] = acc.get(key, GaussianRational(0)) + ca * cb
    return WeylSeries._from_clean(A.n, {k: c for k, c in acc.items() if c}, A.chart, A.convention, W)


# ---------------------------------------------------------------------------
# coordinate changes
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _real_to_complex_1d(a: int, b: int, sign: int) -> tuple:
    """Expand x^a xi^b with x = (u + ubar)/2, xi = -i s (u - ubar)/2."""
    # xi^b = (-i s / 2)^b (u - ubar)^b
    pre = GaussianRational(mpq(1, 2 ** (a + b))) * (GaussianRational(0, -sign) ** b)
    acc: dict = {}
    for i in range(a + 1):
        for j in range(b + 1):
            coef = comb(a, i) * comb(b, j) * (-1) ** (b - j)
            key = (i + j, (a - i) + (b - j))
            acc[key] = acc.get(key, 0) + coef
    return tuple((k[0], k[1], pre * v) for k, v in acc.items() if v)


@lru_cache(maxsize=None)
def _complex_to_real_1d(a: int, b: int, sign: int) -> tuple:
    """Expand u^a ubar^b with u = x + i s xi, ubar = x - i s xi."""
    acc: dict = {}
    for i in range(a + 1):
        for j in range(b + 1):
            # (i s xi)^(a-i) (-i s xi)^(b-j)
            c = GaussianRational(comb(a, i) * comb(b, j)) * (GaussianRational(0, sign) ** (a - i)) * (
                GaussianRational(0, -sign) ** (b - j)
            )
            key = (i + j, (a - i) + (b - j))
            acc[key] = acc.get(key, GaussianRational(0)) + c
    return tuple((k[0], k[1], v) for k, v in acc.items() if v)


def _substitute(A: WeylSeries, table, chart, convention, sign) -> WeylSeries:
    n = A.n
    acc: dict = {}
    for key, c in A._terms.items():
        parts = [table(key[j], key[n + j], sign) for j in range(n)]
        for combo in _cartesian(*parts):
            coef = c
            first = []
            second = []
            for e1, e2, v in combo:
                first.append(e1)
                second.append(e2)
                coef = coef * v
            nk = tuple(first) + tuple(second) + (key[-1],)
            acc[nk] = acc.get(nk, GaussianRational(0)) + coef
    return WeylSeries._from_clean(n, {k: v for k, v in acc.items() if v}, chart, convention, A.max_weight)


def change_chart(A: WeylSeries, target: str, convention: str = "birkhoff") -> WeylSeries:
    """Exact linear change of coordinates between real and complex charts."""
    if target not in CHARTS:
        raise ValueError(f"unknown chart {target!r}")
    if target == "complex" and convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    if target == A.chart and (target == "real" or convention == A.convention):
        return A
    n = A.n
    if A.chart == "complex" and target == "complex":
        # birkhoff z = x + i xi is the conjugate of the scaled bargmann w = x - i xi
        out = {k[n : 2 * n] + k[:n] + (k[-1],): c for k, c in A._terms.items()}
        return WeylSeries._from_clean(n, out, "complex", convention, A.max_weight)
    if target == "complex":
        sign = 1 if convention == "birkhoff" else -1
        return _substitute(A, _real_to_complex_1d, "complex", convention, sign)
    sign = 1 if A.convention == "birkhoff" else -1
    return _substitute(A, _complex_to_real_1d, "real", None, sign)


# ---------------------------------------------------------------------------
# heat transform
# ---------------------------------------------------------------------------

def _laplacian(A: WeylSeries) -> dict:
    """Delta = (1/2) sum_j (d_xj^2 + d_xij^2), expressed in the chart of A."""
    n = A.n
    acc: dict = {}
    for key, c in A._terms.items():
        for j in range(n):
            a, b = key[j], key[n + j]
            if A.chart == "real":
                if a >= 2:
                    nk = key[:j] + (a - 2,) + key[j + 1 :]
                    acc[nk] = acc.get(nk, GaussianRational(0)) + c * mpq(a * (a - 1), 2)
                if b >= 2:
                    nk = key[: n + j] + (b - 2,) + key[n + j + 1 :]
                    acc[nk] = acc.get(nk, GaussianRational(0)) + c * mpq(b * (b - 1), 2)
            else:
                # with u = x +/- i xi: (1/2)(dx^2 + dxi^2) = 2 du dubar
                if a and b:
                    lst = list(key)
                    lst[j] -= 1
                    lst[n + j] -= 1
                    nk = tuple(lst)
                    acc[nk] = acc.get(nk, GaussianRational(0)) + c * (2 * a * b)
    return {k: v for k, v in acc.items() if v}


def heat_transform(A: WeylSeries, s) -> WeylSeries:
    """sum_j (s hbar)^j Delta^j A / j! for an exact rational ``s``.

    ``Delta`` is (1/2) sum_j (d_xj^2 + d_xij^2), i.e. sum_j d_zj d_zbarj in
    the normalized bargmann variable.  ``s = 1/2`` maps an anti-Wick
    (contravariant) symbol to its Weyl symbol and a Weyl symbol to its
    Wick symbol; ``s = -1/2`` inverts either map.
    """
    s = _to_mpq(s)
    total = dict(A._terms)
    term = A
    j = 0
    while term._terms:
        j += 1
        lap = _laplacian(term)
        shifted = {}
        factor = s / j
        for k, c in lap.items():
            nk = k[:-1] + (k[-1] + 1,)
            shifted[nk] = c * factor
        term = A._like({k: v for k, v in shifted.items() if v})
        for k, c in term._terms.items():
            v = total.get(k, GaussianRational(0)) + c
            if v:
                total[k] = v
            else:
                total.pop(k, None)
    return A._like(total)


def harmonic_oscillator(nu: Iterable, *, max_weight: int = DEFAULT_WEIGHT) -> WeylSeries:
    """H2 = sum_j nu_j (x_j^2 + xi_j^2)/2 in the real chart."""
    nu = [_to_mpq(v) for v in nu]
    n = len(nu)
    terms = {}
    for j, v in enumerate(nu):
        e = [0] * n
        e[j] = 2
        z = [0] * n
        terms[Monomial(e, z, 0).key()] = GaussianRational(v / 2)
        terms[Monomial(z, e, 0).key()] = GaussianRational(v / 2)
    return WeylSeries(n, terms, max_weight=max_weight)


def as_fraction(q) -> Fraction:
    """Convert an exact rational (mpq, int, str) to ``fractions.Fraction``."""
    q = _to_mpq(q)
    return Fraction(int(q.numerator), int(q.denominator))
