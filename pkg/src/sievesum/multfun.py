"""Multiplicative function specs, weighted sums, and singular series.

A spec describes a multiplicative function supported on squarefree
integers through its values g(p) at primes, together with the dimension k
and a tail bound |g(p) - k/p| <= c * p^(-1-theta) past a cutoff, which is
what makes the Euler products here rigorously truncatable.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _dfs, primes
from .errors import RangeError, ToleranceError

TAIL_CHECK_LIMIT = 100_000
EXACT_X_MAX = 100_000
SERIES_PRIME_CAP = 1 << 27


@dataclass(eq=False)
class MultFuncSpec:
    """A multiplicative function given by its prime values.

    prime_value maps a prime to g(p); prime_values (optional) does the
    same for a whole int64 array; prime_value_exact (optional) returns a
    Fraction and enables the exact summation path.
    """

    name: str
    prime_value: object
    dimension_k: int
    tail_theta: float
    tail_bound: float
    tail_cutoff: int = 1
    prime_values: object = None
    prime_value_exact: object = None
    _cache: dict = field(default_factory=dict, repr=False)

    def values_on(self, ps):
        """g at every prime of the array ps, as float64."""
        if self.prime_values is not None:
            return self.prime_values(ps)
        return np.fromiter((self.prime_value(int(p)) for p in ps), dtype=np.float64, count=len(ps))

    def _table_arrays(self, table):
        """Cached (g(p), log p) arrays aligned with table.primes."""
        hit = self._cache.get(table.limit)
        if hit is None:
            gp = self.values_on(table.primes)
            logp = _log_primes(table)
            hit = (gp, logp)
            self._cache[table.limit] = hit
        return hit


@dataclass(frozen=True)
class SumResult:
    """Value of a weighted sum, with the exact rational when available."""

    value: float
    exact_value: object
    terms: int


_logp_cache = {}


def _log_primes(table):
    hit = _logp_cache.get(table.limit)
    if hit is None:
        hit = np.log(table.primes.astype(np.float64))
        _logp_cache[table.limit] = hit
    return hit


def _residue_count(offsets, p):
    """Number of distinct residues of the offsets modulo p."""
    return len({h % p for h in offsets})


def _make_nu_values(offsets):
    offsets = tuple(offsets)
    kt = len(offsets)
    maxdiff = max(offsets) - min(offsets) if kt > 1 else 1

    def nu_array(ps):
        nu = np.full(len(ps), float(kt))
        cut = int(np.searchsorted(ps, maxdiff, side="right"))
        for i in range(cut):
            nu[i] = _residue_count(offsets, int(ps[i]))
        return nu

    return nu_array, maxdiff


def _signed(base):
    """The mu(n)-twisted spec: g -> -g, dimension k -> -k."""
    neg_vec = None
    if base.prime_values is not None:
        neg_vec = lambda ps, _b=base: -_b.prime_values(ps)
    neg_exact = None
    if base.prime_value_exact is not None:
        neg_exact = lambda p, _b=base: -_b.prime_value_exact(p)
    return MultFuncSpec(
        name=f"signed_mu_times({base.name})",
        prime_value=lambda p, _b=base: -_b.prime_value(p),
        dimension_k=-base.dimension_k,
        tail_theta=base.tail_theta,
        tail_bound=base.tail_bound,
        tail_cutoff=base.tail_cutoff,
        prime_values=neg_vec,
        prime_value_exact=neg_exact,
    )


def builtin_spec(name, k=None, offsets=None, base=None):
    """Construct one of the named built-in specs.

    Names: one_over_n, one_over_phi, two_omega_over_n, k_over_p (takes k),
    nu_over_p and nu_minus1_over_phi (take tuple offsets), signed_mu_times
    (takes base, a spec or a builtin name).
    """
    if name == "one_over_n":
        spec = MultFuncSpec(
            "one_over_n", lambda p: 1.0 / p, 1, 1.0, 0.0, 1,
            prime_values=lambda ps: 1.0 / ps.astype(np.float64),
            prime_value_exact=lambda p: Fraction(1, p),
        )
    elif name == "one_over_phi":
        spec = MultFuncSpec(
            "one_over_phi", lambda p: 1.0 / (p - 1), 1, 1.0, 2.0, 1,
            prime_values=lambda ps: 1.0 / (ps.astype(np.float64) - 1.0),
            prime_value_exact=lambda p: Fraction(1, p - 1),
        )
    elif name == "two_omega_over_n":
        spec = MultFuncSpec(
            "two_omega_over_n", lambda p: 2.0 / p, 2, 1.0, 0.0, 1,
            prime_values=lambda ps: 2.0 / ps.astype(np.float64),
            prime_value_exact=lambda p: Fraction(2, p),
        )
    elif name == "k_over_p":
        if k is None or int(k) != k:
            raise ValueError("k_over_p requires integer k")
        k = int(k)
        spec = MultFuncSpec(
            f"k_over_p({k})", lambda p, _k=k: _k / p, k, 1.0, 0.0, 1,
            prime_values=lambda ps, _k=k: _k / ps.astype(np.float64),
            prime_value_exact=lambda p, _k=k: Fraction(_k, p),
        )
    elif name in ("nu_over_p", "nu_minus1_over_phi"):
        if not offsets:
            raise ValueError(f"{name} requires tuple offsets")
        offsets = tuple(sorted(int(h) for h in offsets))
        nu_array, maxdiff = _make_nu_values(offsets)
        kt = len(offsets)
        label = "{" + ",".join(str(h) for h in offsets) + "}"
        if name == "nu_over_p":
            spec = MultFuncSpec(
                f"nu_over_p{label}",
                lambda p, _h=offsets: _residue_count(_h, p) / p,
                kt, 1.0, 0.0, max(1, maxdiff),
                prime_values=lambda ps, _f=nu_array: _f(ps) / ps.astype(np.float64),
                prime_value_exact=lambda p, _h=offsets: Fraction(_residue_count(_h, p), p),
            )
        else:
            spec = MultFuncSpec(
                f"nu_minus1_over_phi{label}",
                lambda p, _h=offsets: (_residue_count(_h, p) - 1) / (p - 1),
                kt - 1, 1.0, 2.0 * max(kt - 1, 0), max(1, maxdiff),
                prime_values=lambda ps, _f=nu_array: (_f(ps) - 1.0) / (ps.astype(np.float64) - 1.0),
                prime_value_exact=lambda p, _h=offsets: Fraction(_residue_count(_h, p) - 1, p - 1),
            )
    elif name == "signed_mu_times":
        if base is None:
            raise ValueError("signed_mu_times requires base")
        if isinstance(base, str):
            base = builtin_spec(base, k=k, offsets=offsets)
        return builtin_spec_checked(_signed(base))
    else:
        raise ValueError(f"unknown builtin spec {name!r}")
    return builtin_spec_checked(spec)


def builtin_spec_checked(spec):
    """Verify the declared tail bound over all primes up to 10^5."""
    table = primes.shared_table(TAIL_CHECK_LIMIT)
    ps = table.primes
    sel = ps > spec.tail_cutoff
    ps = ps[sel]
    g = spec.values_on(ps)
    pf = ps.astype(np.float64)
    dev = np.abs(g - spec.dimension_k / pf)
    bound = spec.tail_bound * pf ** (-1.0 - spec.tail_theta) + 1e-15 / pf
    if np.any(dev > bound):
        worst = int(ps[np.argmax(dev - bound)])
        raise ValueError(f"spec {spec.name}: tail bound violated at p = {worst}")
    return spec


def _filtered_arrays(spec, x, q, z):
    """Prime, g(p), log p arrays for factors allowed at (x, q, z)."""
    if x > primes.X_MAX:
        raise RangeError(f"x = {x} exceeds the representable bound 2^62")
    nmax = int(math.floor(x))
    cap = nmax
    if math.isfinite(z):
        cap = min(nmax, int(math.ceil(z)) - 1)
    table = primes.full_table(max(cap, 2))
    p_all = table.primes
    gp_all, logp_all = spec._table_arrays(table)
    hi = int(np.searchsorted(p_all, cap, side="right"))
    sel_p, sel_g, sel_l = p_all[:hi], gp_all[:hi], logp_all[:hi]
    if q != 1:
        support = [s for s in primes.factor_support(q) if s <= cap]
        if support:
            keep = ~np.isin(sel_p, np.asarray(support, dtype=np.int64))
            sel_p, sel_g, sel_l = sel_p[keep], sel_g[keep], sel_l[keep]
    return nmax, sel_p, sel_g, sel_l


def _sum_impl(spec, x, m, q, z, exact):
    if x < 1:
        raise RangeError("x must be at least 1")
    if m < 0 or int(m) != m:
        raise RangeError("m must be a nonnegative integer")
    if q < 1 or int(q) != q:
        raise RangeError("q must be a positive integer")
    if math.isfinite(z) and z < 2:
        z = 2.0
    m, q = int(m), int(q)
    nmax, sel_p, sel_g, sel_l = _filtered_arrays(spec, x, q, z)
    logx = math.log(float(x))
    value, terms = _dfs.msum_float(sel_p, sel_g, sel_l, nmax, logx, m)
    if exact:
        if m != 0:
            raise RangeError("exact path is defined for m = 0 only")
        if nmax > EXACT_X_MAX:
            raise RangeError(f"exact path supports x <= {EXACT_X_MAX}")
        if spec.prime_value_exact is None:
            raise RangeError(f"spec {spec.name} has no exact rational values")
    exact_value = None
    run_exact = exact or (
        exact is None and m == 0 and nmax <= EXACT_X_MAX and spec.prime_value_exact is not None
    )
    if run_exact:
        fr = [spec.prime_value_exact(int(p)) for p in sel_p]
        total, denom = _dfs.msum_exact_m0(
            [int(p) for p in sel_p], [f.numerator for f in fr], [f.denominator for f in fr], nmax
        )
        exact_value = Fraction(total, denom)
    return SumResult(float(value), exact_value, int(terms))


def m_sum(spec, x, m, q, exact=None):
    """Sum of g(n) (log x/n)^m over squarefree n <= x coprime to q."""
    return _sum_impl(spec, x, m, q, math.inf, exact)


def m_sum_smooth(spec, x, m, q, z, exact=None):
    """As m_sum, additionally restricted to n with all prime factors < z."""
    if not math.isfinite(z):
        return _sum_impl(spec, x, m, q, math.inf, exact)
    return _sum_impl(spec, x, m, q, float(z), exact)


def _series_tail(spec, P):
    """Rigorous bound on |sum over p > P of log((1+g(p))(1-1/p)^k)|.

    Uses pi(t) <= 1.26 t / ln t.  Valid once P >= max(cutoff, 2(|k|+c), 17):
    beyond that point |g(p)| <= 1/2 and 1/p <= 1/2, so the log expansions
    carry remainder constants bounded by 1.
    """
    k = abs(spec.dimension_k)
    c = spec.tail_bound
    th = spec.tail_theta
    lp = math.log(P)
    return (1.26 * (1.0 + 1.0 / th) * c * P ** (-th) + 2.52 * ((k + c) ** 2 + k) / P) / lp


def singular_series(spec, q, tol, a_variant=False):
    """Compensated Euler product over primes away from q.

    Returns prod_{p not dividing q} (1+g(p))(1-1/p)^k * prod_{p|q} (1-1/p)^k
    with rigorously bounded truncation error below tol.  With a_variant the
    product is prod (1-g(p))(1-1/p)^(-k), computed by running the same
    truncation on the sign-flipped spec.
    """
    if tol <= 0:
        raise RangeError("tol must be positive")
    if spec.tail_bound is None:
        raise ValueError(f"spec {spec.name} has no tail bound; product not certifiable")
    if a_variant:
        return singular_series(_signed(spec), q, tol, a_variant=False)
    k = spec.dimension_k
    support = primes.factor_support(q)
    sup_log = sum(k * math.log1p(-1.0 / p) for p in support)
    p_min = max(spec.tail_cutoff, 2.0 * (abs(k) + spec.tail_bound), 17.0)
    P = 1024
    while P < p_min:
        P *= 2
    prev = None
    while True:
        table = primes.full_table(P)
        hi = int(np.searchsorted(table.primes, P, side="right"))
        ps = table.primes[:hi]
        gs = spec._table_arrays(table)[0][:hi]
        if support:
            small = [s for s in support if s <= P]
            if small:
                keep = ~np.isin(ps, np.asarray(small, dtype=np.int64))
                ps, gs = ps[keep], gs[keep]
        fac = 1.0 + gs
        if np.any(fac == 0.0):
            return 0.0
        sign = -1.0 if (np.count_nonzero(fac < 0.0) % 2) else 1.0
        pf = ps.astype(np.float64)
        logsum = float(np.sum(np.log(np.abs(fac)) + k * np.log1p(-1.0 / pf)))
        value = sign * math.exp(logsum + sup_log)
        tail = _series_tail(spec, P)
        err = math.exp(abs(tail)) - 1.0
        if prev is not None and err * abs(value) < tol / 2 and abs(value - prev) < tol / 2:
            return value
        if 2 * P > SERIES_PRIME_CAP:
            achieved = err * abs(value) + (abs(value - prev) if prev is not None else math.inf)
            raise ToleranceError(
                f"singular series for {spec.name}: tolerance {tol} unreachable "
                f"within the prime budget (achieved about {achieved:.3e})",
                achieved=achieved,
            )
        prev = value
        P *= 2
