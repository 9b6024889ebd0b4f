import math

import numpy as np
import pytest

from gaplab.chebyshev import (
    StepPolyParams,
    chebyshev_value,
    step_bound,
    step_polynomial,
    verify_step_claim,
)
from gaplab.errors import PreconditionError


def test_chebyshev_values():
    for m in range(0, 12):
        assert chebyshev_value(m, 1.0) == pytest.approx(1.0, abs=1e-14)
    assert chebyshev_value(3, 0.5) == pytest.approx(-1.0, abs=1e-14)
    assert chebyshev_value(2, 3.0) == pytest.approx(17.0, abs=1e-12)


def test_recurrence_matches_trig_and_hyperbolic_forms():
    xs = np.concatenate([np.linspace(-0.999, 0.999, 41), np.linspace(1.0, 10.0, 19), -np.linspace(1.0, 10.0, 19)])
    for m in (1, 2, 3, 5, 8, 13, 21, 34, 64):
        for x in xs:
            if abs(x) < 1:
                ref = math.cos(m * math.acos(x))
            else:
                ref = math.cosh(m * math.acosh(abs(x))) * (1 if x > 0 or m % 2 == 0 else -1)
            val = chebyshev_value(m, float(x))
            assert val == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_step_params_validation():
    with pytest.raises(PreconditionError):
        StepPolyParams(0.0, 0.1)
    with pytest.raises(PreconditionError):
        StepPolyParams(2.0, 0.26)
    with pytest.raises(PreconditionError):
        StepPolyParams(2.0, 0.0)
    assert StepPolyParams(0.5, 0.25).degree == 1
    assert StepPolyParams(2.0, 0.25).degree == 2


def test_step_value_frozen_example():
    params = StepPolyParams(2.0, 0.1)
    # interior midpoint maps to the Chebyshev zero argument: -1/T_2(11/9)
    assert step_polynomial(params, 0.45) == pytest.approx(-81.0 / 161.0, abs=1e-12)


def test_step_at_one_is_exactly_one():
    for m in (0.5, 1, 2, 4, 8, 16, 32):
        for nu in (0.01, 0.1, 0.25):
            assert step_polynomial(StepPolyParams(m, nu), 1.0) == 1.0


def test_step_at_zero_is_plus_minus_inverse_denominator():
    params = StepPolyParams(3.0, 0.2)
    denom = chebyshev_value(3, -1.0 + 2.0 / 0.8)
    assert abs(step_polynomial(params, 0.0)) == pytest.approx(1.0 / denom, rel=1e-12)


def test_denominator_matches_closed_form_argument():
    for m in (1, 2, 5, 9):
        for nu in (0.05, 0.2, 0.25):
            a = chebyshev_value(m, -1.0 + 2.0 / (1.0 - nu))
            b = chebyshev_value(m, (1.0 + nu) / (1.0 - nu))
            assert a == pytest.approx(b, rel=1e-12)


def test_bound_values():
    assert step_bound(StepPolyParams(8, 0.1)) == pytest.approx(1.0 / (1.0 + 6.4 / 1.8), rel=1e-12)
    assert step_bound(StepPolyParams(1e-9, 0.1)) == pytest.approx(1.0, abs=1e-9)


def test_bound_monotone_in_m_and_nu():
    for nu in (0.01, 0.1, 0.25):
        values = [step_bound(StepPolyParams(m, nu)) for m in (0.5, 1, 2, 4, 8, 16)]
        assert all(a > b for a, b in zip(values, values[1:]))
    for m in (0.5, 2, 8):
        values = [step_bound(StepPolyParams(m, nu)) for nu in (0.01, 0.05, 0.1, 0.2, 0.25)]
        assert all(a > b for a, b in zip(values, values[1:]))


def test_step_is_polynomial_of_ceiling_degree():
    # order-(d+1) finite differences of a degree-d polynomial vanish
    for m in (0.5, 1.0, 2.5, 4.0, 8.0):
        params = StepPolyParams(m, 0.2)
        d = params.degree
        xs = np.linspace(0.0, 0.8, d + 8)
        values = step_polynomial(params, xs)
        diff = np.diff(values, n=d + 1)
        assert np.abs(diff).max() <= 1e-8
        # one order lower does not vanish (degree is exactly d)
        low = np.diff(values, n=d)
        assert np.abs(low).max() > 1e-8


def test_grid_scan_passes_and_reports_rows():
    rep = verify_step_claim((0.5, 2.0, 8.0), (0.05, 0.25), x_samples=2000)
    assert rep.passed
    assert len(rep.rows) == 6
    for row in rep.rows:
        assert row["max_abs_step"] <= row["bound"] + 1e-12


def test_outside_interval_bound_not_claimed():
    # just below x=1 the polynomial rises toward 1, well past the bound
    params = StepPolyParams(8.0, 0.1)
    assert abs(step_polynomial(params, 0.97)) > step_bound(params)
