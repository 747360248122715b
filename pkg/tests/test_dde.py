"""Tests for the delay-equation solver."""

import math

import numpy as np
import pytest

from sievesum import dde
from sievesum.errors import RangeError, ToleranceError

import oracles

ACCEPTANCE_PAIRS = [(1, 1), (1, 2), (-1, 2), (2, 3), (-2, 4)]


def scaled_residual(sol, u):
    """Defect of the differential form, normalized by both sides."""
    k, km = sol.k, sol.k + sol.m
    fp = dde.eval_f_deriv(sol, u)
    fprev = dde.eval_f(sol, u - 1.0)
    lhs = u ** (km + 1) * fp
    rhs = -k * (u - 1.0) ** km * fprev
    scale = abs(u ** (km + 1)) * (1 + abs(fp)) + abs(k) * (u - 1.0) ** km * (1 + abs(fprev))
    return abs(lhs - rhs) / scale


class TestClosedForms:
    def test_k1_m1_at_2(self):
        sol = dde.solve_f(1, 1, 2.0)
        assert abs(dde.eval_f(sol, 2.0) - (1.625 - math.log(2))) < 1e-12

    def test_km1_m2_at_2(self):
        sol = dde.solve_f(-1, 2, 2.0)
        assert abs(dde.eval_f(sol, 2.0) - (math.log(2) + 0.5)) < 1e-12

    def test_k1_m1_at_1_5(self):
        sol = dde.solve_f(1, 1, 2.0)
        assert abs(dde.eval_f(sol, 1.5) - 0.9834237807807245) < 1e-12

    @pytest.mark.parametrize("k,m", ACCEPTANCE_PAIRS)
    def test_whole_second_panel(self, k, m):
        sol = dde.solve_f(k, m, 3.0)
        for u in np.linspace(1.0, 2.0, 23):
            assert abs(dde.eval_f(sol, u) - oracles.f_closed_panel2(k, m, u)) < 1e-10

    def test_unit_interval_is_one(self):
        sol = dde.solve_f(3, 5, 4.0)
        for u in [0.0, 0.3, 0.7, 1.0]:
            assert dde.eval_f(sol, u) == 1.0


class TestResidual:
    @pytest.mark.parametrize("k,m", ACCEPTANCE_PAIRS)
    def test_random_points_every_panel(self, k, m):
        sol = dde.solve_f(k, m, 5.0, tol=1e-8)
        rng = np.random.default_rng(2024 + 10 * k + m)
        for r in range(1, 5):
            u = r + rng.random(100)
            worst = max(scaled_residual(sol, float(x)) for x in u)
            assert worst < 1e-8

    def test_reported_residual_is_small(self):
        sol = dde.solve_f(2, 3, 5.0, tol=1e-8)
        assert sol.residual < 1e-10


class TestShape:
    def test_continuity_at_knots(self):
        sol = dde.solve_f(1, 2, 5.0)
        for knot in [2.0, 3.0, 4.0]:
            lo = dde.eval_f(sol, knot - 1e-13)
            hi = dde.eval_f(sol, knot + 1e-13)
            assert abs(lo - hi) < 1e-10

    def test_positive_k_decreases(self):
        sol = dde.solve_f(2, 3, 5.0)
        u = np.linspace(1.0, 5.0, 200)
        v = dde.eval_f_many(sol, u)
        assert np.all(np.diff(v) <= 1e-14)
        assert np.all(v > 0)

    def test_negative_k_increases(self):
        sol = dde.solve_f(-2, 4, 5.0)
        u = np.linspace(1.0, 5.0, 200)
        v = dde.eval_f_many(sol, u)
        assert np.all(np.diff(v) >= -1e-14)
        assert v[0] == 1.0

    def test_vector_matches_scalar(self):
        sol = dde.solve_f(-1, 3, 4.0)
        u = np.array([0.0, 0.5, 1.0, 1.7, 2.4, 3.9])
        v = dde.eval_f_many(sol, u)
        for ui, vi in zip(u, v):
            assert dde.eval_f(sol, ui) == vi

    def test_derivative_satisfies_equation(self):
        sol = dde.solve_f(1, 2, 4.0)
        for u in [1.25, 2.5, 3.75]:
            lhs = u ** 4 * dde.eval_f_deriv(sol, u)
            rhs = -1 * (u - 1) ** 3 * dde.eval_f(sol, u - 1)
            assert abs(lhs - rhs) < 1e-9 * (1 + abs(rhs))


class TestValidation:
    def test_rejects_bad_m(self):
        with pytest.raises(RangeError):
            dde.solve_f(1, -1, 3.0)
        with pytest.raises(RangeError):
            dde.solve_f(-2, 2, 3.0)
        # m = 0 is inside the contract as long as k + m >= 1
        assert dde.eval_f(dde.solve_f(1, 0, 3.0), 1.0) == 1.0

    def test_rejects_small_U(self):
        with pytest.raises(RangeError):
            dde.solve_f(1, 1, 0.5)

    def test_eval_out_of_range(self):
        sol = dde.solve_f(1, 1, 3.0)
        with pytest.raises(RangeError):
            dde.eval_f(sol, 3.5)
        with pytest.raises(RangeError):
            dde.eval_f(sol, -0.1)

    def test_unreachable_tol_reports_achieved(self):
        with pytest.raises(ToleranceError) as exc:
            dde.solve_f(1, 1, 5.0, tol=1e-15, degree=6)
        assert exc.value.achieved is not None
        assert exc.value.achieved > 1e-15


class TestLogSolver:
    @pytest.mark.parametrize("s,m", [(1, 2), (2, 4), (3, 5)])
    def test_matches_float_solver(self, s, m):
        lsol = dde.solve_f_log(s, m, 5.0)
        fsol = dde.solve_f(-s, m, 5.0)
        u = np.linspace(0.5, 5.0, 40)
        got = np.exp(dde.eval_log_f_many(lsol, u))
        want = dde.eval_f_many(fsol, u)
        assert np.max(np.abs(got - want) / want) < 1e-10

    def test_huge_s_stays_finite(self):
        lsol = dde.solve_f_log(500, 700, 3.0)
        lf = dde.eval_log_f_many(lsol, [2.5])[0]
        assert np.isfinite(lf)
        assert lf > 0

    def test_rejects_bad_orders(self):
        with pytest.raises(RangeError):
            dde.solve_f_log(0, 3, 2.0)
        with pytest.raises(RangeError):
            dde.solve_f_log(3, 3, 2.0)
