"""Iterated sieve integrals I_s(t, v) built over the delay-equation solution.

Base regime (v <= 1):

    I_s(t, v) = integral_0^1 (1-x)^(s-1)/(s-1)! * [f(u t x; -s, m) P_s(t x)]^2 dx,

with P_s(y) = m!/(m-s)! * y^(m-s).  For v > 1 the values satisfy

    I_s(t, v) = I_s(t, 1) - s * integral_1^v I_s((1-1/x) t, x-1) (1-1/x)^s dx/x,

which is marched one unit v-panel at a time: each panel (r, r+1] stores a
17 x T grid of Chebyshev-Lobatto values, and the inner evaluations read
the previously built panel through barycentric interpolation.

The t direction uses a piecewise grid split at t = j/u: f(u t x) has only
finitely many continuous derivatives at integer arguments, and those kinks
surface in I at the t breakpoints, so a single global polynomial in t
converges too slowly.  Within each t panel the values are analytic and the
per-panel Lobatto resolution is doubled until a nested-grid comparison
meets tol.  When m - s is large the kinks are negligible (order m-s+1) and
a single t panel is used.

Two reductions keep the numbers representable:
  * the constant A = (m!/(m-s)!)^2/(s-1)! is pulled out (its log is the
    kernel's L) and only phi = I * t^(-2(m-s)) / A is stored, which is
    smooth and positive down to t = 0;
  * an optional log-scale mode stores log phi and integrates with
    logsumexp, for parameter sizes where phi itself overflows a float.
Both reductions leave the recursion form-invariant (the power of (1-1/x)
becomes s + 2(m-s) for phi).

All tolerances here are relative: build error estimates are normalized by
the largest entry of the panel under comparison.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import dde, quadchev
from .errors import RangeError, ToleranceError

N_PER_START = 17
N_PER_MAX = 129
N_V = 17
GL_NODES = 64
MAX_PANELS = 2048
T_PANEL_CAP = 512
KINK_SPLIT_ORDER = 8  # skip t splits once m - s exceeds this
DEGREE_BUDGET = 100  # GL_NODES integrates polynomials up to degree 2*GL_NODES-1
LOG_GRID_RATIO = 2.0 ** -0.25
LOG_GRID_FLOOR = 1e-16


@dataclass(frozen=True)
class SieveKernel:
    """Fixed (s, m, u) data shared by all integral evaluations."""

    s: int
    m: int
    u: float
    log_scale: bool
    L: float  # log of the pulled-out constant (m!/(m-s)!)^2/(s-1)!
    f_sol: object


def make_kernel(s, m, u, log_scale=False, f_tol=1e-10):
    """Prepare the f solution and scaling constants for (s, m, u)."""
    s = int(s)
    m = int(m)
    if s < 1 or m <= s:
        raise RangeError("need integers 1 <= s < m")
    if not (u > 0):
        raise RangeError("u must be positive")
    L = 2.0 * (math.lgamma(m + 1) - math.lgamma(m - s + 1)) - math.lgamma(s)
    U = max(1.0, float(u))
    if log_scale:
        f_sol = dde.solve_f_log(s, m, U)
    else:
        f_sol = dde.solve_f(-s, m, U, tol=f_tol)
    return SieveKernel(s, m, float(u), bool(log_scale), L, f_sol)


@dataclass(frozen=True)
class TGrid:
    """Piecewise Chebyshev-Lobatto grid on [0, 1] split at the f kinks."""

    breaks: np.ndarray
    n_per: int
    nodes: np.ndarray  # concatenated per-panel nodes, length n_panels * n_per
    bw: np.ndarray

    @property
    def total(self):
        return self.nodes.shape[0]

    def panel_nodes(self, p):
        return self.nodes[p * self.n_per : (p + 1) * self.n_per]

    def owner(self, q):
        """Panel index for each query point (boundary points go left)."""
        idx = np.searchsorted(self.breaks, q, side="left") - 1
        return np.clip(idx, 0, len(self.breaks) - 2)


def _t_breaks(kernel):
    if kernel.m - kernel.s > KINK_SPLIT_ORDER:
        return np.array([0.0, 1.0])
    pts = {0.0, 1.0}
    j = 1
    while j < kernel.u:
        pts.add(j / kernel.u)
        j += 1
    if len(pts) - 1 > T_PANEL_CAP:
        raise RangeError(
            f"u={kernel.u} with m-s={kernel.m - kernel.s} needs more than "
            f"{T_PANEL_CAP} t panels; use a larger m - s or log-scale scan"
        )
    return np.asarray(sorted(pts))


def _make_tgrid(kernel, n_per):
    breaks = _t_breaks(kernel)
    nodes = np.concatenate(
        [quadchev.cheb_lobatto(a, b, n_per) for a, b in zip(breaks[:-1], breaks[1:])]
    )
    return TGrid(breaks, n_per, nodes, quadchev.lobatto_bary_weights(n_per))


def _gather_interp(grid, D, g_idx, q):
    """sum_j B[q, j] * D[g_idx, j] with B the piecewise barycentric rows.

    D has shape (G, grid.total); q and g_idx are flat and aligned.
    """
    out = np.empty(q.shape[0])
    owner = grid.owner(q)
    for p in np.unique(owner):
        rows = owner == p
        B = quadchev.bary_matrix(grid.panel_nodes(p), grid.bw, q[rows])
        block = D[g_idx[rows], p * grid.n_per : (p + 1) * grid.n_per]
        out[rows] = np.sum(B * block, axis=1)
    return out


def _piecewise_matrix(grid, q):
    """Dense (len(q), grid.total) interpolation matrix (block nonzeros)."""
    out = np.zeros((q.shape[0], grid.total))
    owner = grid.owner(q)
    for p in np.unique(owner):
        rows = owner == p
        B = quadchev.bary_matrix(grid.panel_nodes(p), grid.bw, q[rows])
        out[np.nonzero(rows)[0][:, None], np.arange(p * grid.n_per, (p + 1) * grid.n_per)[None, :]] = B
    return out


def _merge_close(pts, eps=1e-13):
    """Drop points that would create segments narrower than eps."""
    out = [pts[0]]
    for p in pts[1:-1]:
        if p - out[-1] > eps and pts[-1] - p > eps:
            out.append(p)
    out.append(pts[-1])
    return out


def _base_grid(kernel, t):
    """Quadrature segments on [0, 1] split at the kinks of f(u t x)."""
    ut = kernel.u * t
    pts = {0.0, 1.0}
    j = 1
    while j < ut:
        pts.add(j / ut)
        j += 1
    pts = _merge_close(sorted(pts))
    degree = kernel.s - 1 + 2 * (kernel.m - kernel.s)
    if degree + 1 > DEGREE_BUDGET:
        splits = min(int(math.ceil(math.log2((degree + 1) / DEGREE_BUDGET))), 4)
        for _ in range(splits):
            mids = [0.5 * (a + b) for a, b in zip(pts[:-1], pts[1:])]
            pts = sorted(set(pts) | set(mids))
    return np.asarray(pts)


def _phi_base_float(kernel, t):
    """phi(t, v<=1) by composite Gauss-Legendre quadrature."""
    s, w, u = kernel.s, kernel.m - kernel.s, kernel.u
    pts = _base_grid(kernel, t)
    glx, glw = quadchev.gauss_legendre(GL_NODES)
    mid = 0.5 * (pts[:-1] + pts[1:])
    half = 0.5 * (pts[1:] - pts[:-1])
    x = (mid[:, None] + half[:, None] * glx[None, :]).ravel()
    wts = (half[:, None] * glw[None, :]).ravel()
    fv = dde.eval_f_many(kernel.f_sol, np.minimum(u * t * x, kernel.f_sol.U))
    g = (1.0 - x) ** (s - 1) * (fv * x ** w) ** 2
    return float(wts @ g)


def _phi_base_log(kernel, t):
    """log phi(t, v<=1); geometric grid resolves the spike of x^2w (1-x)^(s-1)."""
    s, w, u = kernel.s, kernel.m - kernel.s, kernel.u
    pts = {1.0}
    x = 1.0
    while x > LOG_GRID_FLOOR:
        x *= LOG_GRID_RATIO
        pts.add(x)
    ut = u * t
    j = 1
    while j < ut:
        pts.add(j / ut)
        j += 1
    pts = np.asarray(_merge_close(sorted(pts)))
    glx, glw = quadchev.gauss_legendre(GL_NODES)
    mid = 0.5 * (pts[:-1] + pts[1:])
    half = 0.5 * (pts[1:] - pts[:-1])
    x = (mid[:, None] + half[:, None] * glx[None, :]).ravel()
    logw = (np.log(half[:, None] * glw[None, :])).ravel()
    lf = dde.eval_log_f_many(kernel.f_sol, np.minimum(u * t * x, kernel.f_sol.U))
    terms = logw + 2.0 * (lf + w * np.log(x))
    if s > 1:
        terms = terms + (s - 1) * np.log1p(-x)
    return float(quadchev.logsumexp(terms))


def _slog_sub(la, lb):
    """Signed log of exp(la) - exp(lb), elementwise on arrays."""
    la = np.asarray(la, dtype=float)
    lb = np.asarray(lb, dtype=float)
    mx = np.maximum(la, lb)
    ok = np.isfinite(mx)
    diff = np.zeros_like(mx)
    with np.errstate(invalid="ignore"):
        diff[ok] = np.exp(la[ok] - mx[ok]) - np.exp(lb[ok] - mx[ok])
    sign = np.sign(diff)
    with np.errstate(divide="ignore"):
        out = np.where(diff != 0.0, mx + np.log(np.abs(np.where(diff != 0.0, diff, 1.0))), -np.inf)
    out = np.where(ok, out, -np.inf)
    return sign, out


@dataclass(frozen=True)
class ITable:
    """Marched table of phi over [0,1] x (1, v_max].

    base holds the v <= 1 row on the t grid; panels[r-1] holds the
    17 x grid.total values on the v-panel (r, r+1].  In log mode the
    stored values are log phi together with sign matrices (phi is
    positive in exact arithmetic; zero-crossing entries are flagged by
    floor_hits).  The t resolution is chosen adaptively; the v resolution
    per panel is fixed at 17, so the reported est_error tracks the t
    direction and the quadrature, and the acceptance tests compare
    against a direct recursive evaluation to cover the rest.
    """

    kernel: SieveKernel
    v_max: float
    grid: TGrid
    base: np.ndarray
    panels: tuple
    est_error: float
    floor_hits: int = 0

    @property
    def n_t(self):
        return self.grid.total


def _march_float(kernel, v_max, grid):
    s, w = kernel.s, kernel.m - kernel.s
    sexp = s + 2 * w
    t_nodes = grid.nodes
    T = grid.total
    bw_v = quadchev.lobatto_bary_weights(N_V)
    base = np.array([_phi_base_float(kernel, t) for t in t_nodes])
    glx, glw = quadchev.gauss_legendre(GL_NODES)
    g_idx = np.repeat(np.arange(GL_NODES), T)
    n_panels = max(int(math.ceil(v_max)) - 1, 0)
    panels = []
    prev_v_nodes = None
    Q = np.zeros(T)
    for r in range(1, n_panels + 1):
        a = float(r)
        v_nodes = quadchev.cheb_lobatto(a, a + 1.0, N_V)
        M = np.empty((N_V, T))
        M[0] = base - s * Q
        seg_full = None
        for j in range(1, N_V):
            mid = 0.5 * (a + v_nodes[j])
            half = 0.5 * (v_nodes[j] - a)
            x = mid + half * glx
            tp = 1.0 - 1.0 / x
            tq = (tp[:, None] * t_nodes[None, :]).ravel()
            if r == 1:
                D = np.broadcast_to(base, (GL_NODES, T))
            else:
                Bv = quadchev.bary_matrix(prev_v_nodes, bw_v, x - 1.0)
                D = Bv @ panels[r - 2]
            inner = _gather_interp(grid, D, g_idx, tq).reshape(GL_NODES, T)
            integrand = inner * (tp ** sexp / x)[:, None]
            seg = half * (glw @ integrand)
            M[j] = base - s * (Q + seg)
            seg_full = seg
        Q = Q + seg_full
        panels.append(M)
        prev_v_nodes = v_nodes
    return base, panels, 0


def _march_log(kernel, v_max, grid):
    s, w = kernel.s, kernel.m - kernel.s
    sexp = s + 2 * w
    logs = math.log(s)
    t_nodes = grid.nodes
    T = grid.total
    bw_v = quadchev.lobatto_bary_weights(N_V)
    base = np.array([_phi_base_log(kernel, t) for t in t_nodes])
    glx, glw = quadchev.gauss_legendre(GL_NODES)
    g_idx = np.repeat(np.arange(GL_NODES), T)
    n_panels = max(int(math.ceil(v_max)) - 1, 0)
    panels = []
    prev_L = None
    prev_v_nodes = None
    floor_hits = 0
    Q = np.full(T, -np.inf)
    for r in range(1, n_panels + 1):
        a = float(r)
        v_nodes = quadchev.cheb_lobatto(a, a + 1.0, N_V)
        Lm = np.empty((N_V, T))
        Sm = np.empty((N_V, T))
        Sm[0], Lm[0] = _slog_sub(base, logs + Q)
        seg_full = None
        for j in range(1, N_V):
            mid = 0.5 * (a + v_nodes[j])
            half = 0.5 * (v_nodes[j] - a)
            x = mid + half * glx
            tp = 1.0 - 1.0 / x
            tq = (tp[:, None] * t_nodes[None, :]).ravel()
            # interpolate log phi itself; phi > 0 in exact arithmetic
            if r == 1:
                D = np.broadcast_to(base, (GL_NODES, T))
            else:
                Bv = quadchev.bary_matrix(prev_v_nodes, bw_v, x - 1.0)
                D = Bv @ prev_L
            inner = _gather_interp(grid, D, g_idx, tq).reshape(GL_NODES, T)
            lt = inner + (sexp * np.log(tp) - np.log(x) + np.log(half * glw))[:, None]
            mg = np.max(lt, axis=0)
            safe = np.where(np.isfinite(mg), mg, 0.0)
            seg = np.where(
                np.isfinite(mg),
                safe + np.log(np.sum(np.exp(lt - safe[None, :]), axis=0)),
                -np.inf,
            )
            tot = np.logaddexp(Q, seg)
            Sm[j], Lm[j] = _slog_sub(base, logs + tot)
            seg_full = seg
        Q = np.logaddexp(Q, seg_full)
        bad = Sm <= 0.0
        if np.any(bad):
            floor_hits += int(np.count_nonzero(bad))
            top = np.max(Lm[np.isfinite(Lm)], initial=0.0)
            Lm = np.where(bad, top - 700.0, Lm)
        panels.append((Lm, Sm))
        prev_L = Lm
        prev_v_nodes = v_nodes
    return base, panels, floor_hits


def _compare_levels(kernel, coarse_grid, coarse, fine_grid, fine):
    """Relative disagreement between two t resolutions at the fine nodes."""
    cbase, cpanels, _ = coarse
    fbase, fpanels, _ = fine
    B = _piecewise_matrix(coarse_grid, fine_grid.nodes)
    if kernel.log_scale:
        est = float(np.max(np.abs(B @ cbase - fbase)))
        for (cl, _), (fl, _) in zip(cpanels, fpanels):
            top = np.max(fl[np.isfinite(fl)], initial=0.0)
            mask = fl > top - 40.0
            if np.any(mask):
                d = np.abs(cl @ B.T - fl)
                est = max(est, float(np.max(d[mask])))
        return est
    est = float(np.max(np.abs(B @ cbase - fbase))) / (float(np.max(np.abs(fbase))) + 1e-300)
    for cm, fm in zip(cpanels, fpanels):
        scale = float(np.max(np.abs(fm))) + 1e-300
        d = float(np.max(np.abs(cm @ B.T - fm)))
        est = max(est, d / scale)
    return est


def build_table(kernel, v_max, tol=1e-9, n_per=N_PER_START):
    """March the table out to v_max, doubling the t resolution until tol.

    tol is a relative target; the achieved estimate comes from comparing
    each resolution with the nested half-size grid.  Raises ToleranceError
    with the achieved estimate if the resolution ladder tops out.
    """
    v_max = float(v_max)
    if not (v_max > 0):
        raise RangeError("v_max must be positive")
    if math.ceil(v_max) - 1 > MAX_PANELS:
        raise RangeError(f"v_max {v_max} needs more than {MAX_PANELS} panels")
    march = _march_log if kernel.log_scale else _march_float
    n = int(n_per)
    if n < 5:
        raise RangeError("n_per too small")
    prev_grid = _make_tgrid(kernel, (n + 1) // 2)
    prev = march(kernel, v_max, prev_grid)
    while True:
        grid = _make_tgrid(kernel, n)
        cur = march(kernel, v_max, grid)
        est = _compare_levels(kernel, prev_grid, prev, grid, cur)
        if est <= tol:
            base, panels, hits = cur
            return ITable(kernel, v_max, grid, base, tuple(panels), est, hits)
        if n >= N_PER_MAX:
            raise ToleranceError(
                f"I table: estimate {est:.3e} above tol {tol:.1e} at n_per={n}",
                achieved=est,
            )
        prev_grid, prev = grid, cur
        n = 2 * n - 1


def _check_t(t):
    if not (0.0 <= t <= 1.0):
        raise RangeError("t must lie in [0, 1]")


def i_base_signed_log(kernel, t):
    """(sign, log|I_s(t, v<=1)|), valid in both modes."""
    _check_t(t)
    w = kernel.m - kernel.s
    if t == 0.0:
        return 0.0, -np.inf
    if kernel.log_scale:
        lphi = _phi_base_log(kernel, t)
        return 1.0, kernel.L + 2 * w * math.log(t) + lphi
    phi = _phi_base_float(kernel, t)
    if phi == 0.0:
        return 0.0, -np.inf
    return math.copysign(1.0, phi), kernel.L + 2 * w * math.log(t) + math.log(abs(phi))


def i_base(kernel, t):
    """I_s(t, v <= 1) as a real float; RangeError if it overflows."""
    sign, lv = i_base_signed_log(kernel, t)
    if lv > 709.0:
        raise RangeError("value overflows a float; use i_base_signed_log")
    return float(sign * np.exp(lv))


def i_eval_signed_log(table, t, v):
    """(sign, log|I_s(t, v)|) from the table; recomputes the base for v <= 1."""
    _check_t(t)
    kernel = table.kernel
    if not (0.0 < v <= table.v_max * (1.0 + 1e-12)):
        raise RangeError(f"v must lie in (0, {table.v_max}]")
    if v <= 1.0:
        return i_base_signed_log(kernel, t)
    w = kernel.m - kernel.s
    idx = min(int(math.ceil(v)) - 2, len(table.panels) - 1)
    a = float(idx + 1)
    v_nodes = quadchev.cheb_lobatto(a, a + 1.0, N_V)
    bv = quadchev.bary_matrix(v_nodes, quadchev.lobatto_bary_weights(N_V), np.array([v]))[0]
    bt = _piecewise_matrix(table.grid, np.array([t]))[0]
    if kernel.log_scale:
        lm, _ = table.panels[idx]
        lphi = float(bv @ lm @ bt)
        if t == 0.0:
            return 0.0, -np.inf
        return 1.0, kernel.L + 2 * w * math.log(t) + lphi
    phi = float(bv @ table.panels[idx] @ bt)
    if t == 0.0 or phi == 0.0:
        return 0.0, -np.inf
    return math.copysign(1.0, phi), kernel.L + 2 * w * math.log(t) + math.log(abs(phi))


def i_eval(table, t, v):
    """I_s(t, v) as a real float; RangeError if it overflows."""
    sign, lv = i_eval_signed_log(table, t, v)
    if lv > 709.0:
        raise RangeError("value overflows a float; use i_eval_signed_log")
    return float(sign * np.exp(lv))


def closed_form_unit(s, m):
    """I_s(1, 1) for u <= 1, where f is identically 1."""
    return math.exp(
        2 * math.lgamma(m + 1)
        - 2 * math.lgamma(m - s + 1)
        + math.lgamma(2 * (m - s) + 1)
        - math.lgamma(2 * m - s + 1)
    )
