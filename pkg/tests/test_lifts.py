import math

import pytest
from hypothesis import given, settings, strategies as st

from circlelab.cfrac import cf_from_real, from_entries, real_from_cf
from circlelab.errors import DomainError, ParameterError, SolveError
from circlelab.lifts import (
    arnold_lift,
    custom_lift,
    first_quotient,
    records_cf,
    rotation_lift,
    rotation_number_cf,
    rotation_number_real,
    solve_parameter,
    tongue_boundary,
    two_harmonic_lift,
    validate_lift,
)

TWO_PI = 2.0 * math.pi
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@pytest.fixture(scope="module")
def golden_arnold_theta():
    return solve_parameter(arnold_lift, from_entries([1] * 40), 1e-9)


# --- pointwise values and derivatives ---


def test_arnold_values():
    F = arnold_lift(0.25)
    assert F(0.0) == 0.25
    # sin(2 pi / 4) = 1
    assert F(0.25) == pytest.approx(0.5 - 1.0 / TWO_PI, abs=1e-15)
    assert F(1.0) == pytest.approx(1.25, abs=1e-15)


def test_degree_one_families():
    for lift in (arnold_lift(0.37), two_harmonic_lift(0.37, 0.2), rotation_lift(0.37)):
        for x in (-0.7, 0.0, 0.31, 2.9):
            assert float(lift(x + 1.0)) == pytest.approx(float(lift(x)) + 1.0, abs=1e-12)


def test_derivatives_match_sympy():
    # oracle: symbolic differentiation of the closed forms
    import sympy as sp

    x, th, c = sp.symbols("x th c")
    forms = {
        "arnold": x + th - sp.sin(2 * sp.pi * x) / (2 * sp.pi),
        "two_harmonic": x
        + th
        - (1 + c) * sp.sin(2 * sp.pi * x) / (2 * sp.pi)
        + c * sp.sin(4 * sp.pi * x) / (4 * sp.pi),
    }
    lifts = {"arnold": arnold_lift(0.3), "two_harmonic": two_harmonic_lift(0.3, 0.17)}
    subs = {th: sp.Rational(3, 10), c: sp.Rational(17, 100)}
    for name, expr in forms.items():
        lift = lifts[name]
        for order in range(1, 7):
            d = sp.diff(expr, x, order)
            for pt in (0.0, 0.123, -0.45, 0.77):
                want = float(d.subs(subs).subs(x, sp.Rational(pt)).evalf(30))
                assert lift.deriv(pt, order) == pytest.approx(want, rel=1e-12, abs=1e-10), (
                    name,
                    order,
                    pt,
                )


def test_cubic_point_third_derivative():
    # third derivative at the critical point is 4 pi^2 (1 - 3c)
    for c in (0.0, 0.1, 0.25):
        lift = two_harmonic_lift(0.3, c)
        assert lift.deriv(0.0) == pytest.approx(0.0, abs=1e-14)
        assert lift.deriv(0.0, 2) == pytest.approx(0.0, abs=1e-12)
        assert lift.deriv(0.0, 3) == pytest.approx(4 * math.pi**2 * (1 - 3 * c), rel=1e-12)


def test_two_harmonic_parameter_range():
    with pytest.raises(ParameterError):
        two_harmonic_lift(0.3, -0.01)
    with pytest.raises(ParameterError):
        two_harmonic_lift(0.3, 0.26)


def test_extended_precision_matches_double():
    for lift in (arnold_lift(0.3), two_harmonic_lift(0.3, 0.2)):
        hi = lift.with_prec(120)
        for x in (0.0, 0.21, 0.89):
            assert float(hi(x)) == pytest.approx(lift(x), abs=1e-15)
            assert float(hi.deriv(x, 3)) == pytest.approx(lift.deriv(x, 3), abs=1e-10)


def test_complex_eval_agrees_on_axis():
    lift = two_harmonic_lift(0.41, 0.15)
    for x in (0.0, 0.3, -0.6):
        z = lift.complex_eval(complex(x, 0.0))
        assert z.imag == pytest.approx(0.0, abs=1e-15)
        assert z.real == pytest.approx(lift(x), abs=1e-14)
        w = lift.complex_deriv(complex(x, 0.0))
        assert w.real == pytest.approx(lift.deriv(x), abs=1e-14)


def test_custom_lift_fd_fallback():
    f = lambda x: x + 0.3 - math.sin(TWO_PI * x) / TWO_PI
    df = lambda x: 1.0 - math.cos(TWO_PI * x)
    with_df = custom_lift(f, df)
    without = custom_lift(f)
    for x in (0.1, 0.42):
        assert without.deriv(x) == pytest.approx(with_df.deriv(x), abs=1e-8)


def test_iterate_composition():
    lift = arnold_lift(0.6)
    a = lift.iterate(0.2, 7)
    b = lift.iterate(float(lift.iterate(0.2, 3)), 4)
    assert a == pytest.approx(b, abs=1e-12)


# --- validation ---


def test_validate_families():
    assert validate_lift(arnold_lift(0.3)).passed
    assert validate_lift(two_harmonic_lift(0.3, 0.2)).passed
    # rigid rotation has no critical point
    assert not validate_lift(rotation_lift(0.3)).passed


def test_validate_rejects_nonmonotone():
    f = lambda x: x + 0.5 - 0.3 * math.sin(TWO_PI * x)
    diag = validate_lift(custom_lift(f))
    assert diag.min_slope < 0
    assert not diag.passed


# --- rotation number estimates ---


def test_rotation_estimate_rigid_exact():
    est = rotation_number_real(rotation_lift(GOLDEN), 4096)
    assert est.bound == pytest.approx(1.0 / 4096)
    assert est.value == pytest.approx(GOLDEN, abs=1e-11)


def test_rotation_estimate_inside_tongue():
    # theta = 0.1 < 1/(2 pi): the orbit is trapped by a fixed point
    est = rotation_number_real(arnold_lift(0.1), 4096)
    assert est.value == pytest.approx(0.0, abs=est.bound)


def test_rotation_estimate_mp_path():
    lo = rotation_number_real(arnold_lift(0.3), 2000)
    hi = rotation_number_real(arnold_lift(0.3).with_prec(120), 2000)
    assert hi.value == pytest.approx(lo.value, abs=1e-9)


@settings(max_examples=12, deadline=None)
@given(
    st.floats(0.05, 0.9),
    st.floats(1e-4, 0.05),
)
def test_rotation_monotone_in_theta(theta, gap):
    n = 2048
    a = rotation_number_real(arnold_lift(theta), n, check_precision=False)
    b = rotation_number_real(arnold_lift(theta + gap), n, check_precision=False)
    assert a.value <= b.value + a.bound + b.bound


@settings(max_examples=12, deadline=None)
@given(st.floats(0.05, 0.95))
def test_rotation_symmetry(theta):
    # x -> -x conjugates theta to 1 - theta for odd coupling terms
    n = 2048
    a = rotation_number_real(arnold_lift(theta), n, check_precision=False)
    b = rotation_number_real(arnold_lift(1.0 - theta), n, check_precision=False)
    assert a.value + b.value == pytest.approx(1.0, abs=a.bound + b.bound)


def test_first_quotient_rigid():
    assert first_quotient(rotation_lift(GOLDEN)) == 1
    assert first_quotient(rotation_lift(5.0 / 16.0)) == 3
    assert first_quotient(rotation_lift(0.09)) == 11


# --- record extraction ---


def test_records_rigid_golden():
    cf = records_cf(rotation_lift(GOLDEN), budget=100_000)
    assert cf.quotients[:10] == (1,) * 10
    assert not cf.inf_terminated


def test_records_rigid_dyadic():
    # 5/16 is exact in binary: [3, 5] with exact landing
    cf = records_cf(rotation_lift(5.0 / 16.0), budget=1000)
    assert cf.quotients == (3, 5)
    assert cf.inf_terminated and cf.exhausted


def test_records_arnold_half():
    # theta = 1/2 locks: the orbit of 0 is exactly periodic with period 2
    cf = records_cf(arnold_lift(0.5), budget=1000)
    assert cf.quotients == (2,)
    assert cf.inf_terminated
    assert real_from_cf(cf) == 0.5


def test_records_inside_tongue_lock():
    # interior of the 1/2 tongue: attracting cycle, rational lock
    cf = records_cf(arnold_lift(0.52), budget=200_000)
    assert cf.inf_terminated
    assert real_from_cf(cf) == pytest.approx(0.5, abs=1e-12)


# --- quotients of the rotation number ---


def test_cf_fixed_point_tongue():
    cf = rotation_number_cf(arnold_lift(0.1), 5)
    assert cf.quotients == ()
    assert cf.inf_terminated


def test_cf_rigid_golden():
    cf = rotation_number_cf(rotation_lift(GOLDEN), 10)
    assert cf.quotients == (1,) * 10
    assert not cf.exhausted


def test_cf_rigid_dyadic():
    cf = rotation_number_cf(rotation_lift(5.0 / 16.0), 10)
    assert cf.entries == (3, 5, math.inf)


def test_cf_arnold_exact_landing():
    # the degenerate base pair falls back to record extraction
    cf = rotation_number_cf(arnold_lift(0.5), 6)
    assert cf.entries == (2, math.inf)


def test_cf_depth_guard():
    with pytest.raises(DomainError):
        rotation_number_cf(arnold_lift(0.3), 0)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.06, 0.94))
def test_cf_value_consistent(theta):
    lift = arnold_lift(theta)
    cf = rotation_number_cf(lift, 5)
    est = rotation_number_real(lift, 50_000, check_precision=False)
    v = real_from_cf(cf)
    if cf.exhausted:
        tol = est.bound
    else:
        q2, q1 = 1, 0
        for r in cf.quotients:
            q2, q1 = r * q2 + q1, q2
        tol = est.bound + 1.0 / (q2 * q2)
    assert v == pytest.approx(est.value, abs=tol + 1e-12)


# --- parameter solving ---


def test_solve_rigid_golden_deep():
    theta = solve_parameter(rotation_lift, from_entries([1] * 40), 1e-12)
    assert theta == pytest.approx(GOLDEN, abs=2e-12)


def test_solve_rational_lock_center():
    # first bisection probe is 1/2, which locks exactly
    theta = solve_parameter(arnold_lift, from_entries([2, math.inf]), 1e-9)
    assert theta == 0.5


def test_solve_rational_third():
    theta = solve_parameter(arnold_lift, from_entries([3, math.inf]), 1e-9)
    cf = records_cf(arnold_lift(theta), budget=200_000)
    assert cf.inf_terminated
    assert real_from_cf(cf) == pytest.approx(1.0 / 3.0, abs=1e-9)


def test_solve_golden_arnold(golden_arnold_theta):
    theta = golden_arnold_theta
    assert 0.60 < theta < 0.615
    cf = rotation_number_cf(arnold_lift(theta), 12)
    assert cf.quotients == (1,) * 12


def test_solve_target_value_range():
    with pytest.raises(DomainError):
        solve_parameter(arnold_lift, from_entries([]), 1e-6)


def test_solve_truncation_too_short():
    with pytest.raises(DomainError):
        solve_parameter(arnold_lift, from_entries([1, 1, 1]), 1e-12)


# --- tongue boundaries ---


def test_tongue_zero_right_closed_form():
    # F(x) = x forces theta = sin(2 pi x)/(2 pi), with maximum 1/(2 pi)
    res = tongue_boundary(arnold_lift, 0, 1, "right", 1e-10)
    assert res.theta == pytest.approx(1.0 / TWO_PI, abs=1e-10)
    assert res.x == pytest.approx(0.25, abs=1e-6)
    assert res.multiplier == pytest.approx(1.0, abs=1e-9)
    assert res.residual < 1e-11


def test_tongue_zero_left_closed_form():
    res = tongue_boundary(arnold_lift, 0, 1, "left", 1e-10)
    assert res.theta == pytest.approx(1.0 - 1.0 / TWO_PI, abs=1e-10)
    assert res.theta_raw == pytest.approx(-1.0 / TWO_PI, abs=1e-10)


def test_tongue_half_symmetric():
    left = tongue_boundary(arnold_lift, 1, 2, "left", 1e-9)
    right = tongue_boundary(arnold_lift, 1, 2, "right", 1e-9)
    assert left.theta < 0.5 < right.theta
    # theta -> 1 - theta symmetry maps the tongue to itself
    assert left.theta + right.theta == pytest.approx(1.0, abs=1e-8)
    cf = records_cf(arnold_lift(0.5 * (left.theta + right.theta)), budget=100_000)
    assert real_from_cf(cf) == pytest.approx(0.5, abs=1e-12)


def test_tongue_rejects_bad_label():
    with pytest.raises(DomainError):
        tongue_boundary(arnold_lift, 2, 4, "left", 1e-8)
    with pytest.raises(DomainError):
        tongue_boundary(arnold_lift, 0, 1, "up", 1e-8)


def test_tongue_two_harmonic_right():
    factory = lambda th: two_harmonic_lift(th, 0.2)
    res = tongue_boundary(factory, 0, 1, "right", 1e-9)
    # boundary parameter is max over x of the coupling term
    lift = two_harmonic_lift(0.0, 0.2)
    xs = [i / 4096 for i in range(4096)]
    want = max(-(float(lift(x)) - x) for x in xs)
    assert res.theta == pytest.approx(want, abs=1e-6)
    assert res.multiplier == pytest.approx(1.0, abs=1e-8)
