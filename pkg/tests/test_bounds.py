import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orthofield.bounds import (
    BoundParams,
    ConstantLedger,
    build_ledger,
    corollary_constant,
    deviation_rhs,
    deviation_rhs_dominated,
    f_constant,
    max_moment_bound,
    moment_constant,
    phi_moment_is_finite,
    pareto_tail,
    rhs_is_finite,
    verify_deviation,
    verify_rosenthal,
)
from orthofield.field_lab import GeneratorSpec
from orthofield.tail_calculus import OperatorParams, StepTail, apply_T


GRID = [BoundParams(p, q, 1, c) for p in (1.2, 1.5, 2.0) for q in (p + 0.5, p + 2) for c in (1.0, 2 ** (2 - p))]


def test_params_domain():
    for bad in [(1.0, 3, 1), (2.5, 3, 1), (2, 2, 1), (2, 3, 0), (2, 3, 1.5)]:
        with pytest.raises(ValueError):
            BoundParams(*bad)
    with pytest.raises(ValueError):
        BoundParams(2, 3, 1, 0.0)


@pytest.mark.parametrize("base", GRID, ids=lambda b: b.key())
def test_f_is_monotone_in_dimension(base):
    values = [f_constant(base.with_(d=d)) for d in (1, 2, 3)]
    assert all(math.isfinite(v) and v > 0 for v in values)
    assert values[0] <= values[1] <= values[2]


def test_ledger_rebuild_is_bitwise_deterministic():
    params = [BoundParams(2, 3, d) for d in (1, 2, 3)] + [BoundParams(1.5, 2.5, 2, 2 ** 0.5)]
    moments = [(1.5, 3.0, 2, 1.0)]
    a = build_ledger(params, moments).to_json()
    b = build_ledger(params, moments).to_json()
    assert a == b
    entries = json.loads(a)
    assert all(set(e) == {"name", "value", "formula", "inputs"} for e in entries)
    assert all(e["value"] > 0 and math.isfinite(e["value"]) for e in entries)
    names = {e["name"] for e in entries}
    assert "f[p=2,q=3,d=1,C=1]" in names and "kappa[2]" in names
    assert any(n.startswith("K[") for n in names) and any(n.startswith("C_pB") for n in names)


def test_ledger_rejects_bad_values():
    ledger = ConstantLedger()
    with pytest.raises(ValueError):
        ledger.record("x", math.inf, "oops")
    with pytest.raises(ValueError):
        ledger.record("x", 0.0, "oops")


def test_corollary_and_moment_constants_dominate():
    for d in (1, 2):
        params = BoundParams(2, 3, d)
        assert corollary_constant(params) >= f_constant(params)
    assert moment_constant(1.5, 3.0, 1) >= 1


def test_rhs_zero_tail_and_constant_tail():
    params = BoundParams(2, 3, 2)
    zero = StepTail([0.0])
    assert deviation_rhs(params, zero, 1.0) == 0.0
    assert deviation_rhs_dominated(params, zero, 1.0) == 0.0
    f = f_constant(params)
    const = StepTail([2.0])
    # Y == 2 at t = 1: the lower piece gives 1/q and the upper piece is int_1^2 u (1 + log u) du
    expected = f * (1 / 3 + 0.75 + 2 * math.log(2))
    assert deviation_rhs(params, const, 1.0) == pytest.approx(expected, rel=1e-10)
    # beyond the atom only the lower kernel contributes: (c/t)^q / q
    assert deviation_rhs(params, const, 50.0) == pytest.approx(f * (2 / 50) ** 3 / 3, rel=1e-10)


def test_dominated_integrand_is_larger():
    params = BoundParams(1.5, 2.5, 1)
    tail = StepTail([0.3, 1.0, 4.0])
    for t in (0.2, 1.0, 3.0):
        higher = apply_T(OperatorParams(1.5, 2.5, 1), tail, t)
        lower = apply_T(OperatorParams(1.5, 2.5, 0), tail, t)
        assert higher >= lower
    assert deviation_rhs_dominated(params, tail, 1.0) >= deviation_rhs(params, tail, 1.0)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.floats(0.01, 20), min_size=1, max_size=8),
    st.floats(1.0, 3.0),
    st.floats(0.05, 10),
)
def test_rhs_monotone_in_t_and_tail(values, stretch, t):
    params = BoundParams(1.5, 2.5, 2)
    small = StepTail(values)
    large = StepTail(np.asarray(values) * stretch)
    assert deviation_rhs(params, small, t) <= deviation_rhs(params, large, t) * (1 + 1e-12)
    assert deviation_rhs(params, small, t * 1.5) <= deviation_rhs(params, small, t) * (1 + 1e-12)


@pytest.mark.parametrize("spec", [
    GeneratorSpec("iid"),
    GeneratorSpec("modulated", modulation="sign"),
    GeneratorSpec("tensor"),
], ids=lambda s: s.kind)
@pytest.mark.parametrize("dominated", [False, True])
def test_exact_deviation_holds_with_zero_tolerance(spec, dominated):
    report = verify_deviation(spec, (2, 2), BoundParams(2, 3, 2), mode="exact", dominated=dominated)
    assert len(report.t) == 20
    assert np.all(report.band == 0)
    assert np.all(report.lhs <= report.rhs)


def test_monte_carlo_deviation_one_dimension():
    report = verify_deviation(GeneratorSpec("iid", seed=3), (32,), BoundParams(2, 3, 1), trials=2000)
    assert report.all_pass


def test_max_moment_bound_cases():
    lhs, rhs, k = max_moment_bound(1.5, 3.0, [2.0, 1.0], [2.0, 1.0], 1)
    assert lhs == rhs and k >= 1
    lhs, rhs, _ = max_moment_bound(1.5, 3.0, np.zeros(4), np.zeros(4), 2)
    assert lhs == 0 == rhs
    rng = np.random.default_rng(0)
    steps = rng.choice([-1.0, 1.0], size=(4000, 64))
    maxima = np.max(np.abs(np.cumsum(steps, axis=1)), axis=1)
    y = np.sum(np.abs(steps) ** 1.5, axis=1) ** (1 / 1.5)
    lhs, rhs, k = max_moment_bound(1.5, 3.0, maxima, y, 1)
    assert lhs <= k * rhs


def test_rosenthal_exact_orthogonality():
    report = verify_rosenthal(GeneratorSpec("iid"), (4, 4), r=2.0)
    assert report.lhs == pytest.approx(16.0, abs=1e-12)
    assert report.rhs == pytest.approx(16.0, abs=1e-12)
    assert report.constant == 1.0 and report.holds


def test_rosenthal_lp_display_monte_carlo():
    report = verify_rosenthal(GeneratorSpec("iid", "gaussian", seed=5), (8, 8), r=2.0, trials=10_000, lp=3.0)
    assert report.holds
    assert report.lp_lhs <= report.lp_rhs


@pytest.mark.parametrize("shift", [-0.5, 0.0, 0.5])
def test_rhs_finiteness_matches_phi_moment(shift):
    p, d = 1.5, 2
    beta = p + shift
    params = BoundParams(p, p + 1, d)
    assert rhs_is_finite(params, pareto_tail(beta)) == phi_moment_is_finite(beta, p, d - 1)
    assert rhs_is_finite(params, pareto_tail(beta)) == (shift > 0)
