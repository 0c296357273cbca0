import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from oracles import operator_by_scipy, sharp_composition_ratio, step_operator_by_pieces
from orthofield.tail_calculus import (
    NEG_INF,
    POS_INF,
    AnalyticTail,
    DivergenceError,
    EqualUpperExponents,
    OperatorParams,
    StepTail,
    YoungExponents,
    apply_T,
    check_predictable_case,
    composition_constant,
    convex_order_tail_rhs,
    doob_tail_rhs,
    ecdf_tail,
    exponential_tail,
    I_closed_form,
    I_value,
    indicator_tail,
    kappa_constant,
    kappa_trace,
    orlicz_norm,
    power_substitution_bounds,
    power_substitution_check,
    verify_composition,
    verify_conditional_tail,
    verify_doob,
)

P = OperatorParams

COMPOSITION_CASES = [
    ((0, 2, 0), (1, 3, 0)),
    ((1, POS_INF, 0), (2, 3, 0)),
    ((2, 3, 1), (2, 4, 0)),
    ((1, 1.5, 1), (1, POS_INF, 0)),
    ((0.5, 4, 0), (1.5, 2, 0)),
]


def test_ecdf_examples():
    tail = ecdf_tail([1, 2, 3])
    assert tail(1.5) == pytest.approx(2 / 3)
    assert tail(3) == 0.0
    assert tail(-1) == 1.0
    with pytest.raises(ValueError):
        ecdf_tail([])


def test_operator_params_validation():
    with pytest.raises(ValueError):
        P(3, 2, 0)
    with pytest.raises(ValueError):
        P(POS_INF, 3, 0)
    with pytest.raises(ValueError):
        P(1, 2, -1)
    assert P("-inf", "inf", 0).p is NEG_INF


@pytest.mark.parametrize("params", [P(1, 2, 0), P(2, 3, 1), P(0.5, 4, 3), P(NEG_INF, 2, 0)])
def test_indicator_at_one_gives_inverse_q(params):
    for g in (indicator_tail(1.0), StepTail([1.0])):
        assert apply_T(params, g, 1.0) == pytest.approx(1 / params.q, rel=1e-12)


@pytest.mark.parametrize("p,q", [(1, 2), (2, 3), (0.5, 4), (-1, 1)])
def test_indicator_at_half_closed_form(p, q):
    expected = 1 / q + (2 ** p - 1) / p
    for g in (indicator_tail(1.0), StepTail([1.0])):
        assert apply_T(P(p, q, 0), g, 0.5) == pytest.approx(expected, rel=1e-10)


def test_exponential_against_reference_quadrature():
    ref = operator_by_scipy(1, 2, 0, lambda v: math.exp(-v), 1.0)
    assert apply_T(P(1, 2, 0), exponential_tail(), 1.0) == pytest.approx(ref, rel=1e-10)
    ref = operator_by_scipy(1.5, 3, 2, lambda v: math.exp(-v), 0.3)
    assert apply_T(P(1.5, 3, 2), exponential_tail(), 0.3) == pytest.approx(ref, rel=1e-9)


def test_infinite_parameters_drop_pieces():
    g = exponential_tail()
    full = apply_T(P(1, 2, 1), g, 0.7)
    low = apply_T(P(NEG_INF, 2, 1), g, 0.7)
    high = apply_T(P(1, POS_INF, 1), g, 0.7)
    assert full == pytest.approx(low + high, rel=1e-11)
    assert low == pytest.approx(operator_by_scipy(None, 2, 1, lambda v: math.exp(-v), 0.7), rel=1e-10)


def test_divergence_is_reported():
    heavy = AnalyticTail(lambda v: np.minimum(1.0, v ** -1.5))
    with pytest.raises(DivergenceError):
        apply_T(P(2, 3, 0), heavy, 1.0)
    with pytest.raises(DivergenceError):
        apply_T(P(NEG_INF, -0.5, 0), StepTail([1.0]), 1.0)


def test_vectorized_evaluation_matches_scalar():
    g = exponential_tail(2.0)
    xs = np.array([0.05, 0.3, 1.0, 4.0])
    many = apply_T(P(1, 3, 2), g, xs)
    single = [apply_T(P(1, 3, 2), g, float(x)) for x in xs]
    assert np.allclose(many, single, rtol=1e-10, atol=0)


samples_strategy = st.lists(st.floats(0.01, 20.0), min_size=1, max_size=30)
param_strategy = st.tuples(st.floats(-1.0, 2.5), st.floats(0.1, 3.0), st.integers(0, 3))


@settings(max_examples=60, deadline=None)
@given(samples_strategy, param_strategy, st.floats(0.05, 10.0))
def test_step_tail_matches_piecewise_oracle(samples, pqd, x):
    p, gap, d = pqd
    q = p + gap if p + gap > 0 else gap
    if not p < q:
        return
    tail = ecdf_tail(samples)
    got = apply_T(P(p, q, d), tail, x)
    ref = step_operator_by_pieces(p, q, d, samples, np.full(len(samples), 1 / len(samples)), x)
    assert got == pytest.approx(ref, rel=1e-8, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(samples_strategy, st.floats(0.0, 5.0), st.floats(0.05, 5.0), st.floats(1.0, 3.0))
def test_operator_is_monotone_in_g_and_nonincreasing_in_x(samples, shift, x, factor):
    params = P(1, 2.5, 1)
    small = ecdf_tail(samples)
    large = ecdf_tail(np.asarray(samples) + shift)
    assert apply_T(params, small, x) <= apply_T(params, large, x) * (1 + 1e-12)
    assert apply_T(params, small, x * factor) <= apply_T(params, small, x) * (1 + 1e-12)


def test_power_substitution_examples():
    rng = np.random.default_rng(3)
    y = rng.exponential(size=300)
    lhs, rhs = power_substitution_check(P(1, 3, 1), y, 1.0, 0.8)
    assert lhs == rhs
    lhs, rhs = power_substitution_check(P(1, 3, 2), StepTail([2.5]), 3.0, 0.9)
    lower, mid, upper = power_substitution_bounds(P(1, 3, 0), StepTail([2.5]), 3.0, 0.9)
    assert lower == pytest.approx(mid, rel=1e-12) and upper == pytest.approx(mid, rel=1e-12)
    lhs, rhs = power_substitution_check(P(1, 3, 0), y, 2.0, 0.7)
    assert lhs == pytest.approx(rhs, rel=1e-8)
    lhs, rhs = power_substitution_check(P(1, 3, 0), exponential_tail(), 2.0, 0.7)
    assert lhs == pytest.approx(rhs, rel=1e-8)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("s", [0.5, 2.0, 3.0])
def test_power_substitution_sandwich_for_log_powers(d, s):
    y = np.random.default_rng(d).exponential(size=200)
    lower, lhs, upper = power_substitution_bounds(P(1, 3, d), y, s, 0.7)
    assert lower <= lhs * (1 + 1e-10) and lhs <= upper * (1 + 1e-10)


def test_power_substitution_literal_identity_fails_with_log_power():
    # with d = 1 the literal identity misses the (1 + s log v) factor
    y = np.random.default_rng(0).exponential(size=200)
    lhs, rhs = power_substitution_check(P(1, 3, 1), y, 2.0, 0.7)
    assert abs(lhs / rhs - 1) > 0.1


def test_I_values():
    assert I_value(2, 0) == pytest.approx(0.5, abs=1e-12)
    assert I_value(1, 1) == pytest.approx(2.0, abs=1e-9)
    for q in (0.3, 1.0, 2.5):
        for d in range(5):
            assert I_value(q, d) == pytest.approx(I_closed_form(q, d), rel=1e-10)
    with pytest.raises(DivergenceError):
        I_value(0.0, 1)


def test_composition_constant_example_and_errors():
    res = composition_constant(0, 2, 0, 1, 3, 0)
    assert res.constant == pytest.approx(2.0, rel=1e-12)
    assert (res.merged.p, res.merged.q, res.merged.d) == (1, 2, 0)
    assert composition_constant(2, 3, 1, 2, 4, 0).merged.d == 2
    with pytest.raises(EqualUpperExponents):
        composition_constant(0, 2, 0, 1, 2, 0)
    with pytest.raises(ValueError):
        composition_constant(0, 2, 0, 3, 5, 0)


def _kernels(a, b):
    c = composition_constant(*a, *b)
    k = lambda prm: (lambda u: float(P(*prm).kernel(np.array([u]))[0]))
    merged = c.merged
    return c, k(a), k(b), (lambda u: float(merged.kernel(np.array([u]))[0]))


@pytest.mark.parametrize("a,b", COMPOSITION_CASES + [((NEG_INF, 3, 0), (2, 4, 0)), ((1, POS_INF, 2), (1.5, 3, 2))])
def test_certified_constant_dominates_sharp_ratio(a, b):
    c, k1, k2, km = _kernels(a, b)
    sharp = sharp_composition_ratio(k1, k2, km, np.geomspace(1e-4, 1e4, 41))
    assert sharp <= c.certified * (1 + 1e-8)


def test_closed_form_constant_fails_on_one_sided_first_operator():
    a, b = (NEG_INF, 3, 0), (2, 4, 0)
    c, k1, k2, km = _kernels(a, b)
    assert c.constant == pytest.approx(1.0)
    assert sharp_composition_ratio(k1, k2, km, [1e-6]) > 1.9


@pytest.mark.parametrize("a,b", COMPOSITION_CASES)
def test_verify_composition_exponential(a, b):
    report = verify_composition(P(*a), P(*b), exponential_tail(), np.geomspace(0.02, 20, 10))
    assert report.holds


def test_verify_composition_zero_and_step():
    zero = AnalyticTail(lambda v: np.zeros_like(v), support_bound=1e-300)
    report = verify_composition(P(0, 2, 0), P(1, 3, 0), zero, [0.5, 1.0])
    assert np.all(report.lhs == 0) and np.all(report.rhs_certified == 0)
    samples = np.random.default_rng(11).exponential(size=100)
    report = verify_composition(P(2, 3, 1), P(2, 4, 0), ecdf_tail(samples), np.geomspace(0.02, 5, 10))
    assert report.holds


def test_orlicz_norm_examples():
    assert orlicz_norm([2.5] * 3, YoungExponents(2.0)) == pytest.approx(2.5, rel=1e-9)
    assert orlicz_norm([0.0, 0.0], YoungExponents(2.0, 1.0)) == 0.0
    lam = orlicz_norm([1.0, -1.0], YoungExponents(2.0, 1.0))
    root = optimize.brentq(lambda x: x ** -2 * (1 + abs(math.log(x))) - 1, 1.0, 10.0, xtol=1e-14)
    assert lam == pytest.approx(root, rel=1e-8)


def test_orlicz_plain_norm_and_errors():
    y = np.random.default_rng(5).standard_normal(500)
    assert orlicz_norm(y, YoungExponents(3.0)) == pytest.approx(np.mean(np.abs(y) ** 3) ** (1 / 3), rel=1e-8)
    with pytest.raises(ValueError):
        orlicz_norm([1.0, np.inf], YoungExponents(2.0))
    with pytest.raises(ValueError):
        YoungExponents(2.0, 4.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20), st.floats(0.01, 100))
def test_orlicz_norm_is_homogeneous(values, c):
    exps = YoungExponents(1.5, 1.0)
    a = orlicz_norm(np.asarray(values) * c, exps)
    b = c * orlicz_norm(values, exps)
    assert a == pytest.approx(b, rel=1e-7, abs=1e-300)


def test_orlicz_norm_subnormal_input_terminates():
    exps = YoungExponents(1.5, 1.0)
    assert orlicz_norm([5e-324], exps) == 5e-324
    assert orlicz_norm([5e-324, 3.0], exps) == pytest.approx(orlicz_norm([0.0, 3.0], exps), rel=1e-9)


def test_doob_examples():
    report = verify_doob("deterministic", 16, 200, seed=1)
    assert report.all_pass
    assert doob_tail_rhs(StepTail([1.0]), 4.5) == 0.0
    report = verify_doob("abs_walk", 32, 10_000, seed=2)
    assert report.all_pass and len(report.t) == 20
    assert verify_doob("squared_walk", 16, 5_000, seed=3).all_pass


def test_kappa_constant_and_trace():
    assert kappa_constant(2) == pytest.approx(256.0)
    steps = dict(kappa_trace(1.0))
    assert steps["kappa(q)"] == pytest.approx(2 * 2 * 4)


def test_conditional_tail_cases():
    t = np.geomspace(0.1, 30, 20)
    assert check_predictable_case(exponential_tail(), t).all_pass
    for model in ("exponential", "uniform", "modulated"):
        assert verify_conditional_tail(model, 16, 10_000, q=2.0, seed=4).all_pass


def test_convex_order_examples():
    assert convex_order_tail_rhs(StepTail([2.0]), 8.5) == 0.0
    assert convex_order_tail_rhs(StepTail([2.0]), 1.0) == pytest.approx(7.0)
