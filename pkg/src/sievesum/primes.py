"""Prime tables and depth-first enumeration of squarefree smooth integers."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import RangeError

X_MAX = 1 << 62  # values and intermediate products stay below this bound
SIEVE_MAX = 1 << 30  # largest supported sieve limit


@dataclass(frozen=True)
class PrimeTable:
    """All primes up to limit, as a sorted int64 array."""

    limit: int
    primes: np.ndarray


@dataclass(frozen=True)
class FactoredInt:
    """A squarefree integer with its sorted prime factorization."""

    value: int
    factors: tuple


def generate_primes(limit):
    """Sieve of Eratosthenes up to limit inclusive."""
    limit = int(limit)
    if limit < 0:
        raise RangeError("limit must be nonnegative")
    if limit > SIEVE_MAX:
        raise RangeError(f"sieve limit {limit} exceeds supported bound {SIEVE_MAX}")
    if limit < 2:
        return PrimeTable(limit, np.empty(0, dtype=np.int64))
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if is_prime[p]:
            is_prime[p * p :: p] = False
    return PrimeTable(limit, np.nonzero(is_prime)[0].astype(np.int64))


_cached_table = None


def shared_table(limit):
    """Module-wide prime table covering at least limit; grows geometrically."""
    global _cached_table
    limit = int(limit)
    if _cached_table is None or _cached_table.limit < limit:
        new_limit = max(limit, 1 << 16)
        if _cached_table is not None:
            new_limit = max(new_limit, min(2 * _cached_table.limit, SIEVE_MAX))
        _cached_table = generate_primes(new_limit)
    if _cached_table.limit == limit:
        return _cached_table
    cut = int(np.searchsorted(_cached_table.primes, limit, side="right"))
    return PrimeTable(limit, _cached_table.primes[:cut])


def full_table(min_limit):
    """The whole cached table, grown to cover at least min_limit.

    Callers that slice by their own cap should prefer this over
    shared_table so caches keyed by table identity stay warm.
    """
    shared_table(min_limit)
    return _cached_table


def _is_probable_prime(n):
    """Deterministic Miller-Rabin for n < 3.3e24."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_brent(n):
    """Brent's cycle variant of Pollard rho; n must be odd composite."""
    if n % 2 == 0:
        return 2
    for c in range(1, 100):
        y, r, q = 2, 1, 1
        g, x, ys = 1, 0, 0
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(128, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += 128
            r *= 2
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
        if g != n:
            return g
    raise ArithmeticError(f"rho failed to split {n}")


def factor_support(q):
    """Sorted distinct primes dividing q (trial division, then rho)."""
    q = int(q)
    if q < 1:
        raise RangeError("q must be a positive integer")
    support = []
    if q == 1:
        return support
    table = shared_table(100_000)
    for p in table.primes:
        p = int(p)
        if p * p > q:
            break
        if q % p == 0:
            support.append(p)
            while q % p == 0:
                q //= p
    if q > 1:
        big = [q]
        while big:
            n = big.pop()
            if _is_probable_prime(n):
                support.append(n)
                continue
            d = _pollard_brent(n)
            rest = n // d
            while rest % d == 0:
                rest //= d
            big.append(d)
            if rest > 1:
                big.append(rest)
        support = sorted(set(support))
    return support


def filtered_primes(x, z, q, table=None):
    """Primes usable as factors: p <= x, p < z, p not dividing q.

    Returns an int64 array; builds (or grows) the shared table as needed.
    """
    if x > X_MAX:
        raise RangeError(f"x = {x} exceeds the representable bound 2^62")
    nmax = int(math.floor(x))
    # factor primes satisfy p < z, hence p <= ceil(z) - 1 for any real z
    cap = nmax
    if math.isfinite(z):
        cap = min(nmax, int(math.ceil(z)) - 1)
    if table is None or table.limit < cap:
        table = shared_table(cap)
    primes = table.primes
    hi = int(np.searchsorted(primes, min(nmax, table.limit), side="right"))
    primes = primes[:hi]
    lo_z = int(np.searchsorted(primes, z, side="left"))
    primes = primes[:lo_z]
    if q != 1:
        support = [p for p in factor_support(q) if p <= table.limit]
        if support:
            primes = primes[~np.isin(primes, np.asarray(support, dtype=np.int64))]
    return primes


def enumerate_squarefree_smooth(x, z, q, visit):
    """Visit every squarefree n <= x with all factors < z and gcd(n, q) = 1.

    Depth-first in increasing prime order, so the visit order is the
    lexicographic preorder on factorizations; n = 1 comes first.  Products
    are pruned before multiplication, so no intermediate overflows.
    """
    if x > X_MAX:
        raise RangeError(f"x = {x} exceeds the representable bound 2^62")
    if x < 1:
        return
    nmax = int(math.floor(x))
    primes = [int(p) for p in filtered_primes(x, z, q)]
    visit(FactoredInt(1, ()))
    npr = len(primes)
    path = []

    def walk(start, n):
        cap = nmax // n
        for i in range(start, npr):
            p = primes[i]
            if p > cap:
                return
            path.append(p)
            visit(FactoredInt(n * p, tuple(path)))
            walk(i + 1, n * p)
            path.pop()

    walk(0, 1)
