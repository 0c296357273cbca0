import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orthofield.field_lab import (
    REAL,
    FieldSample,
    GeneratorSpec,
    NormedValueSpace,
    UnsupportedCombination,
    WindowTooLarge,
    batch_max_partial_sums,
    check_convex_order,
    check_orthomartingale,
    exact_field,
    generate,
    generate_batch,
    max_partial_sum,
    orthomartingale_violation,
    power_sum,
    truncate_decompose,
)
from orthofield.lattice import Rectangle

SPECS = [
    GeneratorSpec("iid"),
    GeneratorSpec("modulated", modulation="sign"),
    GeneratorSpec("modulated", modulation="scale"),
    GeneratorSpec("tensor"),
    GeneratorSpec("tensor", modulation="scale"),
]


def brute_force_max(values):
    shape = values.shape[:-1]
    best = 0.0
    for n in itertools.product(*[range(1, k + 1) for k in shape]):
        block = values[tuple(slice(0, c) for c in n)]
        best = max(best, float(np.linalg.norm(block.reshape(-1, values.shape[-1]).sum(axis=0))))
    return best


def test_iid_rademacher_generation_is_reproducible():
    a = generate(GeneratorSpec("iid", seed=9), Rectangle((2, 2)))
    b = generate(GeneratorSpec("iid", seed=9), Rectangle((2, 2)))
    assert a.values.shape == (2, 2, 1)
    assert set(np.unique(a.values)) <= {-1.0, 1.0}
    assert np.array_equal(a.values, b.values)


def test_tensor_product_structure():
    sample = generate(GeneratorSpec("tensor", seed=4), Rectangle((2, 2)))
    x = sample.values[..., 0]
    # a rank-one +-1 matrix
    assert abs(x[0, 0] * x[1, 1] - x[0, 1] * x[1, 0]) == 0.0


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.kind}-{s.modulation}")
@pytest.mark.parametrize("shape", [(2, 2), (3, 3), (2, 2, 2)])
def test_generators_are_orthomartingales_exactly(spec, shape):
    assert check_orthomartingale(spec, shape).max_violation <= 1e-12


def test_non_centered_field_is_flagged():
    report = check_orthomartingale(GeneratorSpec("iid", "shifted"), (2, 2))
    assert report.max_violation == pytest.approx(0.3, abs=1e-12)


@pytest.mark.parametrize("kind", ["iid", "modulated", "tensor"])
def test_monte_carlo_mode_gaussian(kind):
    report = check_orthomartingale(GeneratorSpec(kind, "gaussian", seed=1), (2, 2), mode="mc", trials=100_000)
    assert report.max_violation <= 4.0


def test_exact_mode_refuses_large_windows_and_infinite_laws():
    with pytest.raises(WindowTooLarge):
        check_orthomartingale(GeneratorSpec("iid"), (5, 5))
    with pytest.raises(UnsupportedCombination):
        check_orthomartingale(GeneratorSpec("iid", "gaussian"), (2, 2))


def test_tensor_orthogonality_of_increments():
    ex = exact_field(GeneratorSpec("tensor"), (3, 3))
    total = ex.values.reshape(ex.space.n_atoms, -1).sum(axis=1)
    assert abs(ex.space.expectation(total)) <= 1e-15
    assert ex.space.expectation(total ** 2) == pytest.approx(9.0, abs=1e-12)


def test_max_partial_sum_examples():
    s = FieldSample(Rectangle((3,)), np.array([1.0, -2.0, 3.0]))
    res = max_partial_sum(s)
    assert np.allclose(res.table[..., 0], [1, -1, 2]) and res.maximum == 2
    s = FieldSample(Rectangle((2, 2)), np.ones((2, 2)))
    res = max_partial_sum(s)
    assert np.array_equal(res.table[..., 0], [[1, 2], [2, 4]]) and res.maximum == 4


@pytest.mark.parametrize("d", [1, 2, 3])
def test_prefix_sum_max_matches_brute_force(d):
    rng = np.random.default_rng(d)
    for _ in range(200):
        shape = tuple(rng.integers(1, 5 if d < 3 else 4, size=d))
        values = rng.choice([-1.0, 1.0], size=shape + (1,))
        sample = FieldSample(Rectangle(shape), values)
        assert max_partial_sum(sample).maximum == brute_force_max(values)


def test_batch_partial_sums_match_single_samples():
    spec = GeneratorSpec("modulated", "gaussian", "scale", seed=2)
    batch = generate_batch(spec, (4, 3), 5)
    single = [max_partial_sum(generate(spec, Rectangle((4, 3)), trial=k)).maximum for k in range(5)]
    assert np.allclose(batch_max_partial_sums(batch), single, rtol=0, atol=1e-12)


def test_power_sum_examples():
    s = FieldSample(Rectangle((2, 3)), np.ones((2, 3)))
    assert power_sum(s, 2) == pytest.approx(math.sqrt(6))
    v = np.zeros((3, 3))
    v[1, 2] = -2.5
    for p in (1, 1.5, 4):
        assert power_sum(FieldSample(Rectangle((3, 3)), v), p) == pytest.approx(2.5)
    rng = np.random.default_rng(0)
    v = rng.standard_normal((5, 5))
    acc = 0.0
    comp = 0.0
    for x in np.abs(v).ravel() ** 3:
        y = x - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
    assert power_sum(FieldSample(Rectangle((5, 5)), v), 3) == pytest.approx(acc ** (1 / 3), rel=1e-12)


def test_value_space_norm_axioms():
    rng = np.random.default_rng(5)
    for space in (REAL, NormedValueSpace.euclidean(3), NormedValueSpace.grid_lp(8, 1.5), NormedValueSpace.grid_lp((4, 4), 3.0)):
        w = space.width
        assert space.norm(np.zeros(w)) == 0
        for _ in range(50):
            a, b = rng.standard_normal(w), rng.standard_normal(w)
            lam = rng.standard_normal()
            assert space.norm(lam * a) == pytest.approx(abs(lam) * space.norm(a))
            assert space.norm(a + b) <= space.norm(a) + space.norm(b) + 1e-12
    assert REAL.smoothness_constant(2) == 1.0
    assert NormedValueSpace.euclidean(2).smoothness_constant(2) == 1.0


def test_serialization_roundtrip():
    space = NormedValueSpace.euclidean(2)
    sample = generate(GeneratorSpec("modulated", "gaussian", seed=7), Rectangle((3, 2, 2)), space)
    blob = sample.to_bytes()
    assert len(blob) == 16 + 3 * 2 * 2 * 2 * 8
    back = FieldSample.from_bytes(blob, space)
    assert np.array_equal(back.values, sample.values)
    with pytest.raises(ValueError):
        FieldSample.from_bytes(b"XXXX" + blob[4:], space)


def test_tensor_in_euclidean_space_is_unsupported():
    with pytest.raises(UnsupportedCombination):
        generate(GeneratorSpec("tensor"), Rectangle((2, 2)), NormedValueSpace.euclidean(2))


def test_truncation_extremes():
    for spec in SPECS[:3]:
        full = truncate_decompose(spec, (2, 2), math.inf)
        assert np.array_equal(full.small, full.exact.values) and not np.any(full.large)
        none = truncate_decompose(spec, (2, 2), 0.0)
        assert not np.any(none.small) and np.array_equal(none.large, none.exact.values)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.kind}-{s.modulation}")
def test_truncation_pieces_are_orthomartingales(spec):
    tr = truncate_decompose(spec, (2, 2), 0.5 if spec.modulation != "scale" else 1.5)
    ex = tr.exact
    assert np.max(np.abs(tr.small + tr.large - ex.values)) <= 1e-12
    for piece in (tr.small, tr.large):
        assert orthomartingale_violation(piece, ex.space, ex.filtration, (2, 2))[0] <= 1e-12
    assert np.max(np.abs(tr.small)) <= 2 ** 2 * tr.threshold + 1e-12


def test_convex_order_examples():
    rng = np.random.default_rng(2)
    y = rng.standard_normal(2000)
    assert check_convex_order(y - np.abs(rng.standard_normal(2000)), y).passed()
    bad = check_convex_order(np.abs(y) + 1, y, grid=[np.median(y)])
    assert bad.max_violation >= 1


def test_convex_order_weighted_sum_exact_two_atoms():
    # |X_i|^p with X_i i.i.d. on two atoms, weights alpha
    atoms, probs = np.array([0.5, 2.0]), np.array([0.7, 0.3])
    alpha = np.array([0.2, 0.5, 0.3])
    p = 1.5
    lhs_vals, lhs_w = [], []
    for combo in itertools.product(range(2), repeat=3):
        lhs_vals.append(float(np.dot(alpha, atoms[list(combo)] ** p)))
        lhs_w.append(float(np.prod(probs[list(combo)])))
    report = check_convex_order(lhs_vals, alpha.sum() * atoms ** p, x_weights=lhs_w, y_weights=probs)
    assert report.passed()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_generation_is_seed_deterministic(seed):
    spec = GeneratorSpec("modulated", "three_point", "sign", seed=seed)
    a = generate_batch(spec, (3, 2), 4, threads=1)
    b = generate_batch(spec, (3, 2), 4, threads=3)
    assert np.array_equal(a, b)
