"""Command-line front end.

Every command reads the same JSON problem format (see docs/problem_format.md)
and writes CSV or JSON.  Exit codes: 0 success, 2 invalid input, 3 violated
numerical invariant, 4 ill-conditioned fit.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .algebra import WeylSeries, change_chart, harmonic_oscillator, moyal_bracket
from .birkhoff import (
    HomologicalError,
    NormalFormResult,
    action_polynomial,
    birkhoff_normal_form,
    conjugation_residual,
    evaluate_action_polynomial,
    harmonic_frequencies,
)
from .fock import TruncationError, weyl_to_wick
from .polytope import exact_sums, fit_expansion, leading_prediction
from .resonance import band_exponent, complete_resonance
from .spectra import (
    BranchCrossingError,
    ConditioningError,
    EnumerationBoundError,
    cluster_spectrum,
    density_check,
    low_lying,
    weyl_count,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INVARIANT = 3
EXIT_CONDITIONING = 4

FORMAT_TAG = "qbnf-problem/1"


class ProblemError(ValueError):
    """Invalid problem file or arguments; the message names the field."""


class InvariantError(RuntimeError):
    pass


def fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, Fraction):
        return str(value)
    return "%.17g" % float(value)


# -- problem files ---------------------------------------------------------------


@dataclass
class Problem:
    n: int
    nu: tuple[Fraction, ...]
    H2: WeylSeries
    L: WeylSeries
    weight: int
    hbar: list[float]
    N_range: tuple[int, int]
    seed: int
    source: str = "<memory>"


def _rational(value, where: str) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise ProblemError(f"{where}: expected an exact rational (integer or 'p/q' string), got {value!r}")
    try:
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ProblemError(f"{where}: cannot parse {value!r} as a rational") from None


def _int_list(value, n: int, where: str) -> tuple[int, ...]:
    if not isinstance(value, list) or len(value) != n or not all(isinstance(v, int) and v >= 0 for v in value):
        raise ProblemError(f"{where}: expected a list of {n} nonnegative integers")
    return tuple(value)


def parse_problem(data: dict, source: str = "<memory>") -> Problem:
    if not isinstance(data, dict):
        raise ProblemError(f"{source}: top level must be an object")
    tag = data.get("format", FORMAT_TAG)
    if tag != FORMAT_TAG:
        raise ProblemError(f"{source}: field 'format' must be {FORMAT_TAG!r}")
    n = data.get("n")
    if not isinstance(n, int) or n < 1:
        raise ProblemError(f"{source}: field 'n' must be a positive integer")
    weight = data.get("weight", 6)
    if not isinstance(weight, int) or weight < 2:
        raise ProblemError(f"{source}: field 'weight' must be an integer >= 2")
    terms = {}
    for i, rec in enumerate(data.get("hamiltonian", [])):
        where = f"{source}: hamiltonian[{i}]"
        if not isinstance(rec, dict):
            raise ProblemError(f"{where}: expected an object")
        unknown = set(rec) - {"x", "xi", "h", "coef"}
        if unknown:
            raise ProblemError(f"{where}: unknown keys {sorted(unknown)}")
        x = _int_list(rec.get("x", [0] * n), n, where + ".x")
        xi = _int_list(rec.get("xi", [0] * n), n, where + ".xi")
        h = rec.get("h", 0)
        if not isinstance(h, int) or h < 0:
            raise ProblemError(f"{where}.h: expected a nonnegative integer")
        if "coef" not in rec:
            raise ProblemError(f"{where}: missing 'coef'")
        c = _rational(rec["coef"], where + ".coef")
        key = x + xi + (h,)
        terms[key] = terms.get(key, Fraction(0)) + c
    terms = {k: v for k, v in terms.items() if v}
    H = WeylSeries(n, terms, max_weight=max(weight, 2))
    quad = H.homogeneous_part(2)
    low = [w for w in H.weights() if w < 2]
    if low:
        raise ProblemError(f"{source}: hamiltonian has terms of weight {sorted(low)}; the perturbation must start at weight 3")
    if "nu" in data:
        nu_raw = data["nu"]
        if not isinstance(nu_raw, list) or len(nu_raw) != n:
            raise ProblemError(f"{source}: field 'nu' must list {n} rationals")
        nu = tuple(_rational(v, f"{source}: nu[{j}]") for j, v in enumerate(nu_raw))
        if any(v <= 0 for v in nu):
            raise ProblemError(f"{source}: non-elliptic quadratic part, nu = {[str(v) for v in nu]}")
        if quad:
            raise ProblemError(f"{source}: give the quadratic part either through 'nu' or in 'hamiltonian', not both")
        H2 = harmonic_oscillator(nu, max_weight=weight)
    else:
        try:
            nu = harmonic_frequencies(quad)
        except ValueError as exc:
            raise ProblemError(f"{source}: non-elliptic quadratic part ({exc})") from None
        H2 = harmonic_oscillator(nu, max_weight=weight)
    L = (H - quad).with_max_weight(weight)
    if not H.is_real():
        raise ProblemError(f"{source}: hamiltonian must be real")
    hbar = data.get("hbar", [0.01])
    if not isinstance(hbar, list) or not hbar or not all(isinstance(v, (int, float)) and v > 0 for v in hbar):
        raise ProblemError(f"{source}: field 'hbar' must be a nonempty list of positive numbers")
    Nr = data.get("N_range", [0, 5])
    if not (isinstance(Nr, list) and len(Nr) == 2 and all(isinstance(v, int) for v in Nr) and 0 <= Nr[0] <= Nr[1]):
        raise ProblemError(f"{source}: field 'N_range' must be [a, b] with 0 <= a <= b")
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ProblemError(f"{source}: field 'seed' must be an integer")
    return Problem(n, nu, H2, L, weight, [float(v) for v in hbar], (Nr[0], Nr[1]), seed, source)


def load_problem(path: str | Path) -> Problem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_problem(data, str(path))


# -- argument helpers ------------------------------------------------------------


def parse_range(text: str) -> tuple[int, int]:
    try:
        a, b = text.split("..")
        a, b = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a..b, got {text!r}") from None
    if a > b or a < 0:
        raise argparse.ArgumentTypeError(f"empty or negative range {text!r}")
    return a, b


def parse_floats(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


# -- output ----------------------------------------------------------------------


class Output:
    def __init__(self, args, command: str):
        self.out = Path(args.out) if args.out else None
        self.format = args.format
        self.command = command
        self.stdout = sys.stdout
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def table(self, name: str, columns: Sequence[tuple[str, str]], rows, params: dict):
        rows = [list(r) for r in rows]
        if self.format == "json":
            payload = {"columns": [c for c, _ in columns],
                       "rows": [[_jsonable(v) for v in r] for r in rows]}
            text = json.dumps(payload, indent=1, sort_keys=True) + "\n"
            suffix = ".json"
        else:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow([c for c, _ in columns])
            for r in rows:
                w.writerow([fmt(v) for v in r])
            text = buf.getvalue()
            suffix = ".csv"
        self._emit(name + suffix, text)
        manifest = {"command": self.command, "file": name + suffix,
                    "columns": [{"name": c, "description": d} for c, d in columns],
                    "parameters": params}
        if self.out:
            self._emit(name + ".manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")

    def document(self, name: str, payload: dict):
        self._emit(name + ".json", json.dumps(payload, indent=1, sort_keys=True, default=_jsonable) + "\n")

    def _emit(self, filename: str, text: str):
        if self.out:
            (self.out / filename).write_text(text)
        else:
            self.stdout.write(text)


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(fmt(v))
    if isinstance(v, complex):
        return [float(fmt(v.real)), float(fmt(v.imag))]
    return v


# -- commands --------------------------------------------------------------------


def _problem(args) -> Problem:
    prob = load_problem(args.input)
    if args.weight is not None:
        if args.weight < 3:
            raise ProblemError("--weight must be at least 3")
        prob.weight = args.weight
        prob.H2 = prob.H2.with_max_weight(args.weight)
        prob.L = prob.L.with_max_weight(args.weight)
    if getattr(args, "hbar", None):
        prob.hbar = args.hbar
    if getattr(args, "N_range", None):
        prob.N_range = args.N_range
    if getattr(args, "seed", None) is not None:
        prob.seed = args.seed
    return prob


def _normal_form(prob: Problem) -> NormalFormResult:
    if not prob.L:
        W = prob.weight
        zero = WeylSeries.zero(prob.n, chart="complex", convention="birkhoff", max_weight=W)
        return NormalFormResult(prob.H2, prob.nu, W, tuple(zero for _ in range(3, W + 1)),
                                tuple(zero for _ in range(3, W + 1)))
    return birkhoff_normal_form(prob.H2, prob.L, prob.weight)


def _params(prob: Problem, **extra) -> dict:
    d = {"input": prob.source, "n": prob.n, "nu": [str(v) for v in prob.nu], "weight": prob.weight,
         "hbar": prob.hbar, "N_range": list(prob.N_range), "seed": prob.seed}
    d.update(extra)
    return d


def cmd_normal_form(args) -> int:
    prob = _problem(args)
    res = _normal_form(prob)
    resid = conjugation_residual(res, prob.L) if prob.L else None
    K = res.K_total()
    comm = moyal_bracket(K, change_chart(prob.H2, "complex", "birkhoff"), res.W)
    report = {
        "residual_min_weight": None if resid is None else resid.min_weight(),
        "residual_exact_through_weight": res.W,
        "commutes_with_H2": not comm,
        "K_real": change_chart(K, "real").is_real(),
        "A_real": change_chart(res.A_total(), "real").is_real(),
    }
    if resid is not None and resid:
        raise InvariantError(f"conjugation residual has weight {resid.min_weight()} <= W")
    if comm:
        raise InvariantError("K does not commute with H2")
    payload = {"normal_form": res.to_dict(), "report": report,
               "K_real_chart": change_chart(K, "real").pretty(),
               "parameters": _params(prob)}
    Output(args, "normal-form").document("normal_form", payload)
    return EXIT_OK


def cmd_cluster(args) -> int:
    prob = _problem(args)
    res = _normal_form(prob)
    nu_c, p = complete_resonance(prob.nu)
    op = weyl_to_wick(res.K_total())
    rows = []
    for hb in prob.hbar:
        for N in range(prob.N_range[0], prob.N_range[1] + 1):
            cl = cluster_spectrum(op, p, nu_c, hb, N)
            for i, lam in enumerate(cl.lambdas):
                rows.append([hb, N, cl.E, i, lam])
    cols = [("hbar", "semiclassical parameter"), ("N", "level index, <p, alpha> = N"),
            ("E", "level energy hbar nu_c (N + |p|/2)"), ("index", "eigenvalue index within the cluster"),
            ("lambda", "eigenvalue shift from E (energy units)")]
    Output(args, "cluster").table("clusters", cols, rows, _params(prob, p=list(p), nu_c=str(nu_c)))
    return EXIT_OK


G_FUNCTIONS = {
    "one": lambda t: np.ones_like(t),
    "square": lambda t: t * t,
    "gauss": lambda t: np.exp(-t * t),
}


def cmd_density(args) -> int:
    prob = _problem(args)
    res = _normal_form(prob)
    nu_c, p = complete_resonance(prob.nu)
    r = args.r if args.r is not None else (band_exponent(p) if len(p) > 1 else 4)
    if r < 3 or r > res.W:
        raise ProblemError(f"band exponent {r} outside the computed weights 3..{res.W}")
    k0 = res.K_piece(r).drop_hbar()
    op = weyl_to_wick(res.K_piece(r))
    g = G_FUNCTIONS[args.g]
    rows = []
    for hb in prob.hbar:
        for N in range(prob.N_range[0], prob.N_range[1] + 1):
            cl = cluster_spectrum(op, p, nu_c, hb, N)
            d = density_check(cl, k0, g, r=r, samples=args.samples, seed=prob.seed)
            rows.append([hb, N, d.lhs, d.rhs, d.relerr])
    cols = [("hbar", "semiclassical parameter"), ("N", "level index"),
            ("lhs", "sum of g(lambda/E^(r/2)) over the cluster"),
            ("rhs", "(2 pi hbar)^(1-n) times the Liouville integral of g(k0/E^(r/2))"),
            ("relerr", "|lhs - rhs| / |rhs|")]
    Output(args, "density").table("density", cols, rows,
                                  _params(prob, g=args.g, r=r, samples=args.samples, p=list(p)))
    return EXIT_OK


def cmd_weyl(args) -> int:
    prob = _problem(args)
    res = _normal_form(prob)
    try:
        f = action_polynomial(res.normal_form())
    except ValueError as exc:
        raise ProblemError(f"normal form is not a function of the actions: {exc}") from None
    nu = [float(v) for v in prob.nu]
    rows = []
    for hb in prob.hbar:
        for E in args.E:
            wc = weyl_count(lambda u, h: evaluate_action_polynomial(f, u, h), nu, hb, E,
                            f0=lambda u: evaluate_action_polynomial(f, u, 0.0))
            rows.append([hb, E, wc.count, wc.volume, wc.relerr])
    cols = [("hbar", "semiclassical parameter"), ("E", "energy threshold"),
            ("count", "number of eigenvalues f(hbar(alpha+1/2)) <= E"),
            ("volume", "hbar^-n Vol{f0 <= E} in action space"), ("relerr", "|count - volume| / volume")]
    Output(args, "weyl").table("weyl", cols, rows, _params(prob, E=args.E))
    return EXIT_OK


def cmd_lowlying(args) -> int:
    prob = _problem(args)
    res = _normal_form(prob)
    nu_c, p = complete_resonance(prob.nu)
    N = prob.N_range[0]
    eps = args.eps or list(np.linspace(0.0, 0.25, 33)[1:])
    fit = low_lying(res, p, nu_c, N, eps, degree=args.degree)
    rows = []
    for i in range(fit.coefficients.shape[0]):
        for k in range(fit.coefficients.shape[1]):
            rows.append([i, k, fit.coefficients[i, k], fit.residuals[i]])
    cols = [("branch", "eigenvalue branch on the level"), ("k", "power: coefficient of hbar^(1 + k/2)"),
            ("coefficient", "fitted coefficient"), ("residual", "max fit residual of the branch")]
    Output(args, "lowlying").table("lowlying", cols, rows, _params(prob, level=N, degree=args.degree))
    return EXIT_OK


def cmd_polytope(args) -> int:
    p = args.p
    if not p or any(v <= 0 for v in p):
        raise ProblemError("--p must list positive integers")
    alpha = args.alpha if args.alpha else (0,) * len(p)
    if len(alpha) != len(p) or any(v < 0 for v in alpha):
        raise ProblemError("--alpha must list len(p) nonnegative integers")
    a, b = args.N_range or (1, 500)
    start = max(a, 1, args.fit_min if args.fit_min is not None else 10 * max(p))
    sums = exact_sums(alpha, p, b)
    rows = []
    for N in range(max(a, 1), b + 1):
        pred = leading_prediction(alpha, p, N)
        rows.append([N, sums[N], pred, sums[N] / float(N) ** sum(alpha) - pred])
    cols = [("N", "level"), ("exact", "sum over P(alpha, N) of (gamma+alpha)!/gamma!"),
            ("prediction", "leading term sum_zeta zeta^-N N^n(zeta) a0"),
            ("residual", "N^-|alpha| exact - prediction")]
    out = Output(args, "polytope")
    out.table("polytope", cols, rows, {"p": list(p), "alpha": list(alpha), "N_range": [a, b], "fit_from": start})
    report = {"p": list(p), "alpha": list(alpha), "fit": None}
    try:
        exp = fit_expansion(alpha, p, range(start, b + 1))
    except ValueError as exc:
        report["fit_skipped"] = str(exc)
    else:
        report["fit"] = {
            "orders": exp.fit.L, "condition": exp.fit.condition, "N_from": start, "N_to": b,
            "strata": [
                {**z.to_dict(), "a0": _jsonable(complex(exp.a0[(z.q, z.d)])),
                 "fitted": [_jsonable(complex(exp.fitted[(z.q, z.d, l)])) for l in range(exp.fit.L + 1)],
                 "mismatch": exp.leading_mismatch()[(z.q, z.d)]}
                for z in exp.strata
            ],
        }
    if out.out:
        out.document("polytope_report", report)
    return EXIT_OK


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbnf", description="Quantum Birkhoff normal forms and cluster spectra.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, problem=True):
        if problem:
            sp.add_argument("--input", required=True, help="problem file (JSON)")
            sp.add_argument("--weight", type=int, help="normalization weight W (overrides the file)")
            sp.add_argument("--hbar", type=parse_floats, help="comma separated hbar values")
            sp.add_argument("--seed", type=int)
        sp.add_argument("--N-range", dest="N_range", type=parse_range, help="levels a..b")
        sp.add_argument("--out", help="output directory (default: stdout)")
        sp.add_argument("--format", choices=["csv", "json"], default="csv")

    sp = sub.add_parser("normal-form", help="Birkhoff normal form with verification report")
    common(sp)
    sp.set_defaults(func=cmd_normal_form)

    sp = sub.add_parser("cluster", help="cluster eigenvalue shifts per level")
    common(sp)
    sp.set_defaults(func=cmd_cluster)

    sp = sub.add_parser("density", help="cluster density against the Liouville average")
    common(sp)
    sp.add_argument("--g", choices=sorted(G_FUNCTIONS), default="gauss")
    sp.add_argument("--r", type=int, help="band exponent (default from the resonance)")
    sp.add_argument("--samples", type=int, default=200_000)
    sp.set_defaults(func=cmd_density)

    sp = sub.add_parser("weyl", help="eigenvalue counts against phase-space volume")
    common(sp)
    sp.add_argument("--E", type=parse_floats, required=True, help="comma separated energies")
    sp.set_defaults(func=cmd_weyl)

    sp = sub.add_parser("lowlying", help="hbar^(1/2) expansion of a low-lying level")
    common(sp)
    sp.add_argument("--eps", type=parse_floats, help="values of hbar^(1/2) used in the fit")
    sp.add_argument("--degree", type=int, default=8)
    sp.set_defaults(func=cmd_lowlying)

    sp = sub.add_parser("polytope", help="lattice sums and their trace expansion")
    common(sp, problem=False)
    sp.add_argument("--p", type=parse_ints, required=True, help="weights, e.g. 2,3")
    sp.add_argument("--alpha", type=parse_ints, help="exponent vector (default 0)")
    sp.add_argument("--fit-min", type=int, help="smallest N used in the fit (default 10 max p)")
    sp.set_defaults(func=cmd_polytope)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConditioningError as exc:
        print(f"conditioning: {exc}", file=sys.stderr)
        return EXIT_CONDITIONING
    except (InvariantError, TruncationError, HomologicalError, BranchCrossingError,
            EnumerationBoundError, ArithmeticError) as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
