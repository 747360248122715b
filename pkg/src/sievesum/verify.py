"""Numerical convergence checks for the weighted-sum asymptotics.

Each check measures the finite sums at a ladder of x values and compares
them against the predicted main term; the slowly shrinking lower-order
terms mean the residuals should decrease along the ladder rather than
vanish at any fixed x.  A report's verdict is True when the residual
sequence decreases with at most one violation.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import dde, multfun, primes
from .errors import RangeError

DEFAULT_LADDER = (1e4, 1e5, 1e6, 1e7)
DEEP_LADDER = (1e4, 1e5, 1e6, 1e7, 1e8)


@dataclass(frozen=True)
class ConvergenceReport:
    """Measured-versus-predicted values along an x ladder."""

    label: str
    params: dict
    xs: tuple
    predicted: tuple
    measured: tuple
    residuals: tuple  # |measured/predicted - 1|
    verdict: bool


def _verdict(residuals):
    bad = sum(1 for a, b in zip(residuals, residuals[1:]) if b >= a)
    return bad <= 1


def _positive_dimension(spec):
    k = spec.dimension_k
    if not isinstance(k, int) or k < 1:
        raise RangeError(f"{spec.name}: check needs a positive integer dimension, got {k}")
    return k


def _report(label, params, xs, predicted, measured):
    residuals = tuple(
        abs(m / p - 1.0) if p != 0.0 else math.inf for p, m in zip(predicted, measured)
    )
    return ConvergenceReport(
        label, params, tuple(xs), tuple(predicted), tuple(measured), residuals, _verdict(residuals)
    )


def check_theorem1(spec, m=1, q=1, xs=None, series_tol=1e-7):
    """Plain sums against the singular-series main term."""
    k = _positive_dimension(spec)
    m = int(m)
    if m < 0:
        raise RangeError("m must be a nonnegative integer")
    xs = DEFAULT_LADDER if xs is None else tuple(xs)
    ss = multfun.singular_series(spec, q, series_tol)
    fac = float(Fraction(math.factorial(m), math.factorial(k + m)))
    predicted = [ss * fac * math.log(x) ** (k + m) for x in xs]
    measured = [multfun.m_sum(spec, x, m, q).value for x in xs]
    return _report(
        f"{spec.name}: weighted sum vs main term",
        {"m": m, "q": q, "series": ss},
        xs,
        predicted,
        measured,
    )


def check_theorem2(spec, m=1, q=1, u=2.0, xs=None, series_tol=1e-7):
    """Smoothed sums at z = x^(1/u) against the f-weighted main term."""
    k = _positive_dimension(spec)
    m = int(m)
    if m < 0:
        raise RangeError("m must be a nonnegative integer")
    if not (u > 0):
        raise RangeError("u must be positive")
    xs = DEFAULT_LADDER if xs is None else tuple(xs)
    ss = multfun.singular_series(spec, q, series_tol)
    sol = dde.solve_f(k, m, max(1.0, u))
    fu = dde.eval_f(sol, u)
    fac = float(Fraction(math.factorial(m), math.factorial(k + m)))
    predicted = [ss * fu * fac * math.log(x) ** (k + m) for x in xs]
    measured = [multfun.m_sum_smooth(spec, x, m, q, x ** (1.0 / u)).value for x in xs]
    return _report(
        f"{spec.name}: smoothed sum vs f-weighted main term",
        {"m": m, "q": q, "u": u, "f(u)": fu, "series": ss},
        xs,
        predicted,
        measured,
    )


def check_weight_lemma(spec, coeffs, q=1, xs=None, series_tol=1e-7):
    """Polynomial-weight sums against the Beta-factor main term.

    coeffs c_0..c_d define G(t) = sum c_j t^j; the measured side combines
    the power sums, the predicted side uses the exact Beta factors
    j!/(j+k)! under the singular series.
    """
    k = _positive_dimension(spec)
    coeffs = [float(c) for c in coeffs]
    if not coeffs:
        raise RangeError("need at least one polynomial coefficient")
    xs = DEFAULT_LADDER if xs is None else tuple(xs)
    ss = multfun.singular_series(spec, q, series_tol)
    beta = float(
        sum(
            Fraction(c) * Fraction(math.factorial(j), math.factorial(j + k))
            for j, c in enumerate(coeffs)
        )
    )
    predicted = [ss * math.log(x) ** k * beta for x in xs]
    measured = []
    for x in xs:
        lx = math.log(x)
        measured.append(
            sum(c * multfun.m_sum(spec, x, j, q).value / lx ** j for j, c in enumerate(coeffs))
        )
    return _report(
        f"{spec.name}: polynomial-weight sum vs Beta main term",
        {"q": q, "coeffs": tuple(coeffs), "series": ss},
        xs,
        predicted,
        measured,
    )


def buchstab_defect(spec, x, m, q, z):
    """Relative defect of the two-sided sieve recursion at one parameter set.

    Compares S(x, q, z) with S(x, q, x) - sum over z <= p < x, p coprime
    to q, of g(p) S(x/p, q, p); the defect is normalized by the total
    size of all participating terms, so it measures pure floating error.
    """
    x = float(x)
    if not (2.0 <= z <= x):
        raise RangeError("need 2 <= z <= x")
    lhs = multfun.m_sum_smooth(spec, x, m, q, z).value
    top = multfun.m_sum_smooth(spec, x, m, q, x).value
    table = primes.full_table(int(x) + 1)
    ps = table.primes[np.searchsorted(table.primes, int(math.ceil(z))) :]
    ps = ps[ps < x]
    scale = abs(lhs) + abs(top)
    total = top
    gps = spec.values_on(ps)
    for p, gp in zip(ps, gps):
        p = int(p)
        if q % p == 0:
            continue
        term = float(gp) * multfun.m_sum_smooth(spec, x / p, m, q, p).value
        total -= term
        scale += abs(term)
    return abs(lhs - total) / (scale + 1e-300)


@dataclass(frozen=True)
class BuchstabCase:
    spec_name: str
    x: float
    m: int
    q: int
    z: float
    defect: float


def buchstab_suite(seed=20240817, cases=50):
    """Randomized recursion-defect suite over all the builtin functions."""
    rng = np.random.default_rng(seed)
    pool = [
        multfun.builtin_spec("one_over_n"),
        multfun.builtin_spec("one_over_phi"),
        multfun.builtin_spec("two_omega_over_n"),
        multfun.builtin_spec("k_over_p", k=3),
        multfun.builtin_spec("nu_over_p", offsets=[0, 2, 6]),
        multfun.builtin_spec("nu_minus1_over_phi", offsets=[0, 4, 6]),
    ]
    qs = [1, 2, 6, 15, 30, 77]
    out = []
    for i in range(cases):
        spec = pool[i % len(pool)]
        x = float(rng.integers(50, 4000))
        if rng.random() < 0.3:
            x += 0.5
        m = int(rng.integers(0, 4))
        q = int(qs[rng.integers(0, len(qs))])
        mode = rng.random()
        if mode < 0.15:
            z = 2.0
        elif mode < 0.3:
            z = x
        else:
            z = float(rng.uniform(2.0, x))
        defect = buchstab_defect(spec, x, m, q, z)
        out.append(BuchstabCase(spec.name, x, m, q, z, defect))
    return out
