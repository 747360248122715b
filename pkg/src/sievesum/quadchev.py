"""Gauss-Legendre and Chebyshev building blocks used by the solvers.

Everything here works on plain numpy arrays.  Nodes and weights are cached
per size so repeated panel integrations reuse the same arrays.
"""

import numpy as np

_GL_CACHE = {}


def gauss_legendre(n):
    """Nodes and weights on [-1, 1], cached by n."""
    pair = _GL_CACHE.get(n)
    if pair is None:
        x, w = np.polynomial.legendre.leggauss(n)
        pair = (x, w)
        _GL_CACHE[n] = pair
    return pair


def gl_nodes(a, b, n):
    """Gauss-Legendre nodes and weights mapped to [a, b]."""
    x, w = gauss_legendre(n)
    h = 0.5 * (b - a)
    return 0.5 * (a + b) + h * x, h * w


def cheb_lobatto(a, b, n):
    """n Chebyshev-Lobatto points on [a, b], ascending, endpoints included."""
    if n < 2:
        raise ValueError("need at least 2 points")
    k = np.arange(n)
    x = np.cos(np.pi * k / (n - 1))[::-1]
    return 0.5 * (a + b) + 0.5 * (b - a) * x


def lobatto_bary_weights(n):
    """Barycentric weights for n Chebyshev-Lobatto points (ascending order)."""
    w = np.ones(n)
    w[1::2] = -1.0
    w[0] *= 0.5
    w[-1] *= 0.5
    # ascending order flips the sign pattern; an overall constant is irrelevant
    return w


def bary_eval(nodes, weights, values, t):
    """Barycentric interpolation of (nodes, values) at points t.

    values may be 1-D (len(nodes),) or 2-D (len(nodes), m); t is scalar or 1-D.
    Exact at the nodes themselves.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    vals = np.asarray(values, dtype=float)
    diff = t_arr[:, None] - nodes[None, :]
    hit = diff == 0.0
    diff = np.where(hit, 1.0, diff)
    r = weights[None, :] / diff
    denom = r.sum(axis=1)
    if vals.ndim == 1:
        num = r @ vals
        out = num / denom
        rows = np.nonzero(hit.any(axis=1))[0]
        for i in rows:
            out[i] = vals[np.argmax(hit[i])]
    else:
        num = r @ vals
        out = num / denom[:, None]
        rows = np.nonzero(hit.any(axis=1))[0]
        for i in rows:
            out[i] = vals[np.argmax(hit[i])]
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        return out[0]
    return out


def bary_matrix(nodes, weights, q):
    """Row matrix B with B @ values = interpolant of (nodes, values) at q.

    q is 1-D; rows hitting a node exactly become one-hot rows.
    """
    q = np.asarray(q, dtype=float)
    d = q[:, None] - nodes[None, :]
    hit = d == 0.0
    hit_rows = hit.any(axis=1)
    d = np.where(hit, 1.0, d)
    r = weights[None, :] / d
    B = r / r.sum(axis=1, keepdims=True)
    if np.any(hit_rows):
        B[hit_rows] = hit[hit_rows].astype(float)
    return B


def lobatto_to_cheb_coeffs(values):
    """Chebyshev coefficients of the interpolant through Lobatto values.

    values are taken at cheb_lobatto(a, b, n) in ascending order; the
    coefficients refer to the variable mapped to [-1, 1].  Uses the DCT-I
    relation c_j = (2/N) * sum'' v(x_i) T_j(x_i) with halved end terms.
    """
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    N = n - 1
    # ascending nodes correspond to angles pi..0; flip to standard order
    vd = v[::-1]
    j = np.arange(n)
    cosmat = np.cos(np.pi * np.outer(j, j) / N)
    scale = np.ones(n)
    scale[0] = 0.5
    scale[-1] = 0.5
    c = (2.0 / N) * (cosmat @ (vd * scale))
    c[0] *= 0.5
    c[-1] *= 0.5
    return c


def cheb_eval(coeffs, a, b, u):
    """Evaluate a Chebyshev series with coefficients on [a, b] at u."""
    s = np.asarray(u, dtype=float)
    x = (2.0 * s - (a + b)) / (b - a)
    return np.polynomial.chebyshev.chebval(x, coeffs)


def cheb_eval_deriv(coeffs, a, b, u):
    """Derivative of the Chebyshev series at u (chain rule for the map)."""
    s = np.asarray(u, dtype=float)
    x = (2.0 * s - (a + b)) / (b - a)
    dc = np.polynomial.chebyshev.chebder(coeffs)
    return np.polynomial.chebyshev.chebval(x, dc) * (2.0 / (b - a))


def logsumexp(logs, signs=None):
    """Stable log of a sum of exponentials.

    Without signs, returns log(sum exp(logs)).  With signs, returns
    (sign, log|sum signs*exp(logs)|); an empty or fully cancelled sum
    yields (0.0, -inf).
    """
    logs = np.asarray(logs, dtype=float)
    if logs.size == 0:
        return (0.0, -np.inf) if signs is not None else -np.inf
    m = np.max(logs)
    if not np.isfinite(m):
        if signs is not None:
            return 0.0, -np.inf
        return -np.inf
    if signs is None:
        return m + np.log(np.sum(np.exp(logs - m)))
    total = float(np.sum(np.asarray(signs, dtype=float) * np.exp(logs - m)))
    if total == 0.0:
        return 0.0, -np.inf
    return float(np.sign(total)), m + np.log(abs(total))
