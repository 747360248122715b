"""Exact weighted sums over multiplicative functions and the smoothed sieve toolkit."""

from .dde import eval_f, eval_f_deriv, eval_f_many, solve_f, solve_f_log
from .errors import RangeError, ToleranceError
from .iterints import (
    build_table,
    closed_form_unit,
    i_base,
    i_base_signed_log,
    i_eval,
    i_eval_signed_log,
    make_kernel,
)
from .multfun import builtin_spec, m_sum, m_sum_smooth, singular_series
from .primes import factor_support, generate_primes, shared_table
from .verify import (
    buchstab_defect,
    buchstab_suite,
    check_theorem1,
    check_theorem2,
    check_weight_lemma,
)
from .zhang import (
    first_k_tuple,
    gpy_coefficient_unsmoothed,
    gpy_threshold,
    is_admissible,
    scan,
    tuple_singular_series,
    zhang_coefficient,
)

__version__ = "0.1.0"

__all__ = [
    "RangeError",
    "ToleranceError",
    "build_table",
    "builtin_spec",
    "buchstab_defect",
    "buchstab_suite",
    "check_theorem1",
    "check_theorem2",
    "check_weight_lemma",
    "closed_form_unit",
    "eval_f",
    "eval_f_deriv",
    "eval_f_many",
    "factor_support",
    "first_k_tuple",
    "gpy_coefficient_unsmoothed",
    "gpy_threshold",
    "i_base",
    "i_base_signed_log",
    "i_eval",
    "i_eval_signed_log",
    "is_admissible",
    "m_sum",
    "m_sum_smooth",
    "make_kernel",
    "generate_primes",
    "scan",
    "shared_table",
    "singular_series",
    "solve_f",
    "solve_f_log",
    "tuple_singular_series",
    "zhang_coefficient",
]
