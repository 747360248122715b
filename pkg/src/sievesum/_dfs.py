"""Depth-first summation kernels over squarefree smooth integers.

The float kernel is written once and compiled with numba when available;
the interpreted fallback runs the same function object, so both paths
perform the identical IEEE operation sequence and return bit-identical
results.  Set SIEVESUM_NO_JIT=1 to force the interpreted path.
"""

import math
import os

import numpy as np

_STACK = 64  # products of distinct primes overflow 2^62 long before depth 64


def _msum_float_core(p, gp, logp, nmax, logx, m):
    # visits squarefree n composed of the given primes, n <= nmax, in
    # preorder (increasing leading prime); Kahan-compensated accumulation
    # of g(n) * (logx - log n)^m with the n = 1 term first
    t = logx
    tm = 1.0
    for _ in range(m):
        tm *= t
    s = tm
    c = 0.0
    terms = 1
    npr = p.shape[0]
    if npr == 0 or nmax < 2:
        return s, terms
    idx = np.empty(_STACK, np.int64)
    nval = np.empty(_STACK, np.int64)
    gval = np.empty(_STACK, np.float64)
    lval = np.empty(_STACK, np.float64)
    cap = np.empty(_STACK, np.int64)
    depth = 0
    idx[0] = 0
    nval[0] = 1
    gval[0] = 1.0
    lval[0] = 0.0
    cap[0] = nmax
    while depth >= 0:
        i = idx[depth]
        if i < npr and p[i] <= cap[depth]:
            idx[depth] = i + 1
            n2 = nval[depth] * p[i]
            g2 = gval[depth] * gp[i]
            l2 = lval[depth] + logp[i]
            t = logx - l2
            tm = 1.0
            for _ in range(m):
                tm *= t
            y = g2 * tm - c
            tt = s + y
            c = (tt - s) - y
            s = tt
            terms += 1
            depth += 1
            idx[depth] = i + 1
            nval[depth] = n2
            gval[depth] = g2
            lval[depth] = l2
            cap[depth] = nmax // n2
        else:
            depth -= 1
    return s, terms


_msum_float_jit = None
if os.environ.get("SIEVESUM_NO_JIT", "") not in ("1", "true", "yes"):
    try:
        import numba

        _msum_float_jit = numba.njit(cache=True, nogil=True)(_msum_float_core)
    except ImportError:
        _msum_float_jit = None


def msum_float(p, gp, logp, nmax, logx, m):
    """Kahan sum of g(n)(logx - log n)^m over squarefree smooth n <= nmax."""
    if _msum_float_jit is not None:
        return _msum_float_jit(p, gp, logp, np.int64(nmax), float(logx), m)
    return _msum_float_core(p, gp, logp, np.int64(nmax), float(logx), m)


def msum_exact_m0(primes, nums, dens, nmax):
    """Exact rational sum of g(n) over squarefree n <= nmax (m = 0 only).

    g(p) = nums[i]/dens[i] for primes[i]; all lists aligned.  Returns the
    pair (total, D) with the sum equal to total/D and D = prod(dens):
    along each DFS path the common denominator is divided down exactly,
    so the accumulator stays an integer.
    """
    D = math.prod(dens)
    npr = len(primes)
    total = 0
    # same preorder as the float kernel
    stack = [(0, 1, 1, D)]
    while stack:
        i0, n, num, r = stack.pop()
        total += num * r
        # push children in reverse so the smallest prime is expanded first
        children = []
        cap = nmax // n
        for i in range(i0, npr):
            pi = primes[i]
            if pi > cap:
                break
            children.append((i + 1, n * pi, num * nums[i], r // dens[i]))
        stack.extend(reversed(children))
    return total, D
