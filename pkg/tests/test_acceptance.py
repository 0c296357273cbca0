"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``ACCEPTANCE nn ... PASS|FAIL`` line, and the
session summary repeats all of them (see conftest.py).
"""

import itertools
import json
import time

import numpy as np

from orthofield.bounds import BoundParams, verify_deviation, verify_rosenthal
from orthofield.cli import main
from orthofield.experiments import composition_checks, filtration_entries, power_substitution_rows
from orthofield.field_lab import GeneratorSpec, generate_batch
from orthofield.finite_prob import check_commuting, corrupted_filtration, filtration_indices, window_space
from orthofield.kernel_regression import RegressionConfig, bias_profile, regression_deviation_check
from orthofield.lln_suite import (
    OperatorWeights,
    SeriesBudget,
    baum_katz_r,
    baum_katz_s,
    block_spec,
    dyadic_series,
    indicator_sum_bounds,
    sup_decay_trace,
    tail_share,
    weak_lp_estimate,
    weighted_series,
)
from orthofield.tail_calculus import SUBMARTINGALES, CONDITIONAL_MODELS, verify_conditional_tail, verify_doob


def _run(verdict_line, number, title, body):
    """Evaluate ``body() -> (ok, detail)``; an exception counts as FAIL and is re-raised."""
    try:
        ok, detail = body()
    except Exception as exc:
        verdict_line(number, title, False, f"{type(exc).__name__}: {exc}")
        raise
    verdict_line(number, title, ok, detail)
    assert ok, detail


def test_01_exact_filtration_axioms(verdict_line):
    def body():
        start = time.perf_counter()
        shapes = list(itertools.product(range(1, 4), repeat=2)) + list(itertools.product(range(1, 3), repeat=3))
        worst = 0.0
        for shape in shapes:
            worst = max(worst, max(e[1] for e in filtration_entries(shape, seed=0)))
        space = window_space((2, 2))
        broken = check_commuting(corrupted_filtration(space), filtration_indices((2, 2)), space).max_violation
        elapsed = time.perf_counter() - start
        ok = worst <= 1e-12 and broken > 0.05 and elapsed < 60
        return ok, f"{len(shapes)} windows, worst {worst:.2e}, corrupted {broken:.3f}, {elapsed:.1f} s"

    _run(verdict_line, 1, "exact filtration axioms", body)


def test_02_deviation_exact_mode(verdict_line):
    def body():
        params = BoundParams(2.0, 3.0, 2)
        points, ok = 0, True
        for kind in ("iid", "modulated", "tensor"):
            report = verify_deviation(GeneratorSpec(kind), (2, 2), params, mode="exact")
            ok &= len(report.t) == 20 and bool(np.all(report.band == 0)) and bool(np.all(report.lhs <= report.rhs))
            points += len(report.t)
        return ok, f"{points} t points over 3 generator kinds, zero tolerance"

    _run(verdict_line, 2, "deviation bound, exact mode", body)


def _mc_protocol(dominated):
    start = time.perf_counter()
    results = []
    for law in ("rademacher", "gaussian"):
        for d in (1, 2):
            report = verify_deviation(GeneratorSpec("iid", law, seed=20 + d), (32,) * d, BoundParams(2.0, 3.0, d),
                                      trials=10_000, dominated=dominated)
            results.append(report.all_pass and len(report.t) == 20)
    elapsed = time.perf_counter() - start
    return all(results) and elapsed < 300, f"{sum(results)}/4 configurations, {elapsed:.1f} s"


def test_03_deviation_monte_carlo(verdict_line):
    _run(verdict_line, 3, "deviation bound, Monte Carlo", lambda: _mc_protocol(False))


def test_04_dominated_deviation(verdict_line):
    _run(verdict_line, 4, "dominated deviation bound", lambda: _mc_protocol(True))


def test_05_operator_calculus(verdict_line):
    def body():
        comp = composition_checks(1e-6)
        power = power_substitution_rows()
        rows = comp.rows + power.rows
        bad = [r.name for r in rows if r.verdict != "PASS"]
        return not bad and len(comp.rows) == 150, f"{len(comp.rows)} composition points, {len(power.rows)} identity rows" + (f", failing {bad[:3]}" if bad else "")

    _run(verdict_line, 5, "operator calculus", body)


def test_06_rosenthal_orthogonality(verdict_line):
    def body():
        exact = verify_rosenthal(GeneratorSpec("iid"), (4, 4), r=2.0)
        exact_ok = abs(exact.lhs - 16) <= 1e-12 and exact.constant == 1.0 and exact.holds
        mc = verify_rosenthal(GeneratorSpec("iid", seed=6), (8, 8), r=2.0, trials=10_000, lp=3.0)
        return exact_ok and mc.holds, f"E|S|^2 = {exact.lhs!r}; L^3 display {mc.lp_lhs:.3f} <= {mc.lp_rhs:.3f}"

    _run(verdict_line, 6, "Rosenthal and orthogonality", body)


def test_07_regression_bias_rate(verdict_line):
    def body():
        ratios = []
        for n in (64, 128, 256):
            config = RegressionConfig(n, 1, n ** -0.5, g=lambda x: np.abs(x[..., 0] - 0.5))
            ratios.append(bias_profile(config) / config.bandwidth)
        spread = max(ratios) / min(ratios)
        return spread <= 2, f"sup-bias/h ratios {[round(r, 4) for r in ratios]}, spread {spread:.3f}"

    _run(verdict_line, 7, "regression bias rate", body)


def test_08_regression_deviation(verdict_line):
    def body():
        start = time.perf_counter()
        low = regression_deviation_check(RegressionConfig(64, 1, 64 ** -0.5, p=2.0, noise=GeneratorSpec("iid", seed=8)), trials=2000)
        high = regression_deviation_check(RegressionConfig.power_law(64, 1, 0.6, p=3.0, noise=GeneratorSpec("iid", seed=9)), trials=2000)
        elapsed = time.perf_counter() - start
        ok = low.all_pass and high.all_pass and elapsed < 300
        return ok, f"p=2 {int(low.passed.sum())}/20, p=3 {int(high.passed.sum())}/20, {elapsed:.1f} s"

    _run(verdict_line, 8, "regression deviation bound", body)


def test_09_strong_law_suite(verdict_line):
    def body():
        spec = GeneratorSpec("iid", seed=9)
        series = dyadic_series(spec, 1.5, 2, budget=SeriesBudget(cap=6, trials=1000))
        trace = sup_decay_trace(spec, 1.5, 2, cap=6, trials=200)
        weak = weak_lp_estimate(spec, 1.5, 2, SeriesBudget(cap=6, trials=1000))
        ok = series.holds and trace.median_ratio <= 0.1 and weak.holds
        return ok, (f"series {series.total_upper:.3g} <= {series.rhs:.3g}: {series.holds}; "
                    f"decay median ratio {trace.median_ratio:.3f} (target 0.1); weak-L^p {weak.holds}")

    _run(verdict_line, 9, "strong law suite", body)


def test_10_baum_katz(verdict_line):
    def body():
        budget = SeriesBudget(cap=6, trials=1000)
        reports = []
        for d, alpha in itertools.product((1, 2), (0.75, 0.9)):
            spec = GeneratorSpec("iid", seed=10 + d)
            reports.append(baum_katz_r(spec, 2.0, alpha, d, budget=budget))
            reports.append(baum_katz_s(spec, 2.0, 3.0, alpha, d, budget=budget))
        held = sum(r.holds for r in reports)
        return held == len(reports), f"{held}/{len(reports)} series within their bounds"

    _run(verdict_line, 10, "Baum-Katz series", body)


def test_11_weighted_sums(verdict_line):
    def body():
        spec = GeneratorSpec("iid", seed=11)
        weights = OperatorWeights("squares")
        full = weighted_series(spec, weights, 1.5, 3.0, 2, gamma=0.25, n_max=32, trials=1000)
        share = tail_share(full, 0.25)
        small = weighted_series(spec, weights, 1.5, 3.0, 2, gamma=0.25, n_max=4, trials=1000)
        total, prev = 0.0, 0.0
        for n in range(1, 5):
            R = (n * n) ** 0.25
            C = (n * n) ** (1 / 1.5)
            vals = generate_batch(block_spec(spec, n), (n, n), 1000)[..., 0]
            total += (R ** 3 - prev ** 3) * np.mean(np.abs(vals.sum(axis=(1, 2))) > C * R)
            prev = R
        ok = share < 0.05 and small.total == total and full.holds
        return ok, f"final-quarter share {share:.4f}; brute force {float(total)!r} vs {small.total!r}"

    _run(verdict_line, 11, "weighted sums", body)


def test_12_appendix_inequalities(verdict_line):
    def body():
        checks = [verify_doob(m, 32, 10_000, seed=12) for m in SUBMARTINGALES]
        checks += [verify_conditional_tail(m, 16, 10_000, q=2.0, seed=12) for m in CONDITIONAL_MODELS]
        tails_ok = all(c.all_pass for c in checks)
        indicators = [indicator_sum_bounds(1.5, 1.0, d) for d in (1, 2, 3)]
        ind_ok = all(r.holds and len(r.grid) == 40 for r in indicators)
        return tails_ok and ind_ok, f"{sum(c.all_pass for c in checks)}/{len(checks)} tail checks, indicator sums {ind_ok}"

    _run(verdict_line, 12, "tail lemmas and indicator sums", body)


DETERMINISM_CONFIGS = {
    "deviation": "[experiment]\nkind = deviation\nseed = 13\n[generator]\nlaws = rademacher,gaussian\n[field]\ndims = 1,2\n",
    "slln": "[experiment]\nkind = slln\nseed = 13\n",
    "weighted": "[experiment]\nkind = weighted\nseed = 13\n",
}


def test_13_determinism_across_threads(verdict_line, tmp_path):
    def body():
        same = []
        for name, text in DETERMINISM_CONFIGS.items():
            path = tmp_path / f"{name}.ini"
            path.write_text(text)
            outputs = []
            for run, threads in enumerate((1, 8, 1, 8)):
                out = tmp_path / f"{name}-{run}"
                main(["run", str(path), "--threads", str(threads), "--out", str(out)])
                assert json.loads((out / "report.json").read_text())["threads"] == threads
                outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
            same.append(bool(outputs[0]) and all(o == outputs[0] for o in outputs))
        return all(same), f"{sum(same)}/{len(same)} experiment kinds byte-identical over 4 runs at 1 and 8 threads"

    _run(verdict_line, 13, "determinism across threads", body)
