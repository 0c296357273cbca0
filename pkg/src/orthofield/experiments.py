"""Experiment kinds: each turns a resolved configuration into checks.

A check carries its verdict rows, the CSV text written for it and an
optional SVG chart.  Nothing here touches the file system, and every random
stream is keyed by the configured seed, so the CSV text does not depend on
the worker count.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import re
from dataclasses import asdict, dataclass

import numpy as np

from .bounds import BoundParams, ConstantLedger, corollary_constant, f_constant, verify_deviation, verify_rosenthal
from .config import ExperimentConfig
from .field_lab import GeneratorSpec, check_orthomartingale
from .finite_prob import (
    SigmaFieldSpec,
    check_commuting,
    check_product_lemma,
    corrupted_filtration,
    filtration_indices,
    lower_cone_filtration,
    product_filtration,
    product_space,
    window_space,
)
from .kernel_regression import KernelSpec, RegressionConfig, regression_deviation_check
from .lln_suite import (
    OperatorWeights,
    SeriesBudget,
    SeriesReport,
    baum_katz_r,
    baum_katz_s,
    dyadic_series,
    indicator_sum_bounds,
    sup_decay_trace,
    tail_share,
    weak_lp_estimate,
    weighted_series,
)
from .svg import Series, line_chart, wants_log
from .tail_calculus import (
    CONDITIONAL_MODELS,
    NEG_INF,
    POS_INF,
    SUBMARTINGALES,
    I_value,
    OperatorParams,
    StepTail,
    TailCheck,
    exponential_tail,
    power_substitution_bounds,
    power_substitution_check,
    verify_composition,
    verify_conditional_tail,
    verify_doob,
)

VERDICTS = ("PASS", "FAIL", "CENSORED")

COMPOSITION_CASES = [
    ((0, 2, 0), (1, 3, 0)),
    ((1, POS_INF, 0), (2, 3, 0)),
    ((2, 3, 1), (2, 4, 0)),
    ((1, 1.5, 1), (1, POS_INF, 0)),
    ((NEG_INF, 3, 0), (2, 4, 0)),
]
COMPOSITION_TAILS = {
    "exp": exponential_tail(),
    "step1": StepTail([1.0]),
    "step3": StepTail([0.5, 1.0, 2.0], [0.5, 0.3, 0.2]),
}
COMPOSITION_POINTS = np.geomspace(0.1, 10.0, 10)
INDICATOR_CASES = [(1.5, 1.0)]


@dataclass
class Row:
    name: str
    lhs: float
    rhs: float
    band: float
    verdict: str


@dataclass
class Check:
    name: str
    rows: list[Row]
    csv_text: str
    svg_text: str | None = None

    @property
    def verdicts(self) -> set[str]:
        return {r.verdict for r in self.rows}


def slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", name).strip("_")


def verdict(lhs: float, rhs: float, band: float = 0.0) -> str:
    return "PASS" if lhs <= rhs + band else "FAIL"


def _csv(header, body) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in body:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return out.getvalue()


def rows_csv(rows: list[Row]) -> str:
    return _csv(["name", "lhs", "rhs", "band", "verdict"], [[r.name, r.lhs, r.rhs, r.band, r.verdict] for r in rows])


def scalar_check(name: str, entries: list[tuple[str, float, float, float]]) -> Check:
    rows = [Row(n, float(a), float(b), float(c), verdict(a, b, c)) for n, a, b, c in entries]
    return Check(name, rows, rows_csv(rows))


def tail_check(report: TailCheck, x_label: str = "t") -> Check:
    rows = []
    body = []
    for t, a, b, c in zip(report.t, report.lhs, report.rhs, report.band):
        v = verdict(a, b, c)
        rows.append(Row(f"{report.name}@t={float(t):.6g}", float(a), float(b), float(c), v))
        body.append([float(t), float(a), float(b), float(c), v])
    text = _csv(["t", "lhs", "rhs", "band", "verdict"], body)
    upper = np.minimum(1.0, np.asarray(report.lhs) + np.asarray(report.band))
    svg = line_chart(
        report.name,
        [Series("empirical tail", report.t, report.lhs), Series("tail + band", report.t, upper, dashed=True),
         Series("bound", report.t, report.rhs)],
        x_label, "probability", log_y=wants_log(np.concatenate([report.lhs, report.rhs])),
    )
    return Check(report.name, rows, text, svg)


def series_check(report: SeriesReport) -> Check:
    rows = []
    for r in report.rows:
        if r.cumulative_upper > report.rhs:
            v = "FAIL"
        else:
            v = "CENSORED" if r.censored else "PASS"
        rows.append(Row(f"{report.name}#{r.block}", r.cumulative, report.rhs, r.cumulative_upper - r.cumulative, v))
    idx = np.arange(1, len(report.rows) + 1)
    upper = np.array([r.cumulative_upper for r in report.rows])
    svg = line_chart(
        report.name,
        [Series("partial sum", idx, report.partial_sums), Series("upper partial sum", idx, upper, dashed=True),
         Series("bound", idx, np.full(idx.shape, report.rhs))],
        "block", "series", log_y=wants_log(np.concatenate([upper, [report.rhs]])),
    ) if report.rows else None
    return Check(report.name, rows, report.csv_text(), svg)


def generator_specs(config: ExperimentConfig):
    for kind in config["generator.kinds"]:
        for law in config["generator.laws"]:
            modulation = config["generator.modulation"] if kind != "iid" else None
            yield GeneratorSpec(kind, law, modulation, config["experiment.seed"])


def _budget(config: ExperimentConfig, threads) -> SeriesBudget:
    return SeriesBudget(cap=config["budget.cap"], trials=config["budget.trials"], threads=threads)


# ---------------------------------------------------------------------------
# kinds


def run_deviation(config, ledger, threads) -> list[Check]:
    checks = []
    mode = config["checks.mode"]
    for d in config["field.dims"]:
        params = BoundParams(config["exponents.p"], config["exponents.q"], d)
        f_constant(params, ledger)
        shape = (config["field.side"],) * d
        for spec in generator_specs(config):
            for dominated in (False, True) if config["checks.dominated"] else (False,):
                if dominated:
                    corollary_constant(params, ledger)
                report = verify_deviation(spec, shape, params, trials=config["budget.trials"], mode=mode,
                                          dominated=dominated, threads=threads)
                report.name = f"{report.name}:d={d}:{mode}"
                checks.append(tail_check(report))
    return checks


REGRESSION_FUNCTIONS = {
    "zero": lambda x: np.zeros(x.shape[:-1]),
    "linear": lambda x: 0.3 + 2.0 * x[..., 0],
    "kinked": lambda x: np.abs(x[..., 0] - 0.5),
}


def regression_config(config: ExperimentConfig, d: int, spec: GeneratorSpec) -> RegressionConfig:
    kernel = KernelSpec.box() if config["regression.kernel"] == "box" else KernelSpec.plateau(config["regression.slope"])
    return RegressionConfig.power_law(
        config["regression.n"], d, config["regression.bandwidth_exponent"], p=config["exponents.p"],
        noise=spec, kernel=kernel, g=REGRESSION_FUNCTIONS[config["regression.function"]],
    )


def run_regression(config, ledger, threads) -> list[Check]:
    checks = []
    for d in config["field.dims"]:
        for spec in generator_specs(config):
            report = regression_deviation_check(regression_config(config, d, spec), trials=config["budget.trials"],
                                                threads=threads, ledger=ledger)
            report.name = f"{report.name}:{spec.law}"
            checks.append(tail_check(report))
    return checks


def run_slln(config, ledger, threads) -> list[Check]:
    checks = []
    p = config["exponents.p"]
    r = config["exponents.r"]
    budget = _budget(config, threads)
    for d in config["field.dims"]:
        for spec in generator_specs(config):
            checks.append(series_check(dyadic_series(spec, p, d, 1.0, budget, r=r, ledger=ledger)))
            weak = weak_lp_estimate(spec, p, d, budget, r=r, ledger=ledger)
            name = f"weak_lp:{spec.kind}:{spec.law}:d={d}"
            rows = [Row(f"{name}@t={float(t):.6g}", float(e), weak.bound, float(u - e), verdict(u, weak.bound))
                    for t, e, u in zip(weak.t, weak.estimate, weak.upper)]
            svg = line_chart(name, [Series("t^p P(sup > t)", weak.t, weak.estimate),
                                    Series("with band", weak.t, weak.upper, dashed=True),
                                    Series("bound", weak.t, np.full(weak.t.shape, weak.bound))], "t", "",
                             log_y=wants_log(np.append(weak.upper, weak.bound)))
            checks.append(Check(name, rows, rows_csv(rows), svg))
            trace = sup_decay_trace(spec, p, d, config["budget.cap"], config["budget.trials"], threads=threads)
            name = f"sup_decay:{spec.kind}:{spec.law}:d={d}"
            body = [[int(level), float(m)] for level, m in zip(trace.levels, trace.median)]
            row = Row(f"{name}:median_ratio", trace.median_ratio, config["budget.decay_target"], 0.0,
                      verdict(trace.median_ratio, config["budget.decay_target"]))
            svg = line_chart(name, [Series("median sup over max n >= N", trace.levels, trace.median)], "N", "ratio")
            checks.append(Check(name, [row], _csv(["N", "median_sup"], body) + rows_csv([row]), svg))
    return checks


def run_baum_katz(config, ledger, threads) -> list[Check]:
    checks = []
    r, s, eps = config["exponents.r"], config["exponents.s"], config["budget.eps"]
    budget = _budget(config, threads)
    for d in config["field.dims"]:
        for spec in generator_specs(config):
            for alpha in config["exponents.alphas"]:
                checks.append(series_check(baum_katz_r(spec, r, alpha, d, eps, budget, ledger=ledger)))
                checks.append(series_check(baum_katz_s(spec, r, s, alpha, d, eps, budget, ledger=ledger)))
    return checks


def run_weighted(config, ledger, threads) -> list[Check]:
    checks = []
    for d in config["field.dims"]:
        for spec in generator_specs(config):
            report = weighted_series(
                spec, OperatorWeights("squares"), config["exponents.p"], config["exponents.s"], d,
                gamma=config["exponents.gamma"], eps=config["budget.eps"], n_max=config["budget.n_max"],
                trials=config["budget.trials"], threads=threads, ledger=ledger,
            )
            report.name = f"{report.name}:{spec.law}"
            checks.append(series_check(report))
            checks.append(scalar_check(f"{report.name}:stability",
                                       [(f"{report.name}:final_quarter_share", tail_share(report), config["budget.stability"], 0.0)]))
    return checks


def composition_checks(tolerance: float) -> Check:
    entries = []
    for (a, b), (tail_name, tail) in itertools.product(COMPOSITION_CASES, COMPOSITION_TAILS.items()):
        first, second = OperatorParams(*a), OperatorParams(*b)
        report = verify_composition(first, second, tail, COMPOSITION_POINTS, tolerance)
        for x, lhs, rhs in zip(report.x, report.lhs, report.rhs_certified):
            entries.append((f"compose[{a}o{b}]:{tail_name}@x={float(x):.4g}", lhs, rhs, tolerance * rhs))
    return scalar_check("operators:composition", entries)


def power_substitution_rows() -> Check:
    entries = []
    tail = StepTail([0.4, 1.3, 2.5], [0.2, 0.5, 0.3])
    for d, s, t in itertools.product((0, 1, 2), (0.5, 2.0, 3.0), (0.7, 1.5)):
        name = f"power[d={d},s={s:g}]@t={t:g}"
        if d == 0:
            lhs, rhs = power_substitution_check(OperatorParams(1, 3, 0), tail, s, t)
            entries.append((f"{name}:identity", abs(lhs - rhs), 1e-8 * max(1.0, abs(rhs)), 0.0))
        else:
            lower, mid, upper = power_substitution_bounds(OperatorParams(1, 3, d), tail, s, t)
            entries.append((f"{name}:lower", lower, mid, 1e-8 * mid))
            entries.append((f"{name}:upper", mid, upper, 1e-8 * upper))
    for q in (0.5, 1.0, 2.0, 3.0):
        entries.append((f"I[{q:g},0]", abs(I_value(q, 0) - 1 / q), 1e-9, 0.0))
    entries.append(("I[1,1]", abs(I_value(1, 1) - 2.0), 1e-9, 0.0))
    return scalar_check("operators:power_and_I", entries)


def run_operators(config, ledger, threads) -> list[Check]:
    checks = [composition_checks(config["checks.tolerance"]), power_substitution_rows()]
    seed, trials = config["experiment.seed"], config["budget.trials"]
    for model in SUBMARTINGALES:
        checks.append(tail_check(verify_doob(model, 32, trials, seed=seed, threads=threads)))
    for model in CONDITIONAL_MODELS:
        checks.append(tail_check(verify_conditional_tail(model, 16, trials, q=2.0, seed=seed, threads=threads)))
    for p, s in INDICATOR_CASES:
        for d in (1, 2, 3):
            rep = indicator_sum_bounds(p, s, d)
            entries = []
            for y, a, b, c, e in zip(rep.grid, rep.leq_lhs, rep.leq_rhs, rep.gt_lhs, rep.gt_rhs):
                entries.append((f"indicator_leq[d={d}]@Y={float(y):.4g}", a, b, 1e-12 * b))
                entries.append((f"indicator_gt[d={d}]@Y={float(y):.4g}", c, e, 1e-12 * e))
            checks.append(scalar_check(f"indicator_sums:p={p:g}:s={s:g}:d={d}", entries))
    return checks


def _random_events(space, group_labels, rng):
    events, subs = [], []
    for labels in group_labels:
        cols = np.stack([space.column(lab) for lab in labels], axis=1)
        patterns = {tuple(row) for row in cols}
        chosen = {pat for pat in sorted(patterns) if rng.random() < 0.5}
        events.append(np.array([tuple(row) in chosen for row in cols]))
        subs.append(SigmaFieldSpec(lab for lab in labels if rng.random() < 0.5))
    return events, subs


def filtration_entries(shape, seed: int, instances: int = 5) -> list[tuple[str, float, float, float]]:
    tag = "x".join(map(str, shape))
    rng = np.random.default_rng([seed, *shape])
    entries = []
    indices = filtration_indices(shape)
    window = window_space(shape)
    product = product_space(shape)
    constructions = [
        ("lower_cone", window, lower_cone_filtration(window), [window.labels[: len(window.labels) // 2], window.labels[len(window.labels) // 2:]]),
        ("product", product, product_filtration(product), [[lab for lab in product.labels if lab[0] == a] for a in range(len(shape))]),
    ]
    for name, space, filt, groups in constructions:
        entries.append((f"commuting:{name}:{tag}", check_commuting(filt, indices, space).max_violation, 1e-12, 0.0))
        groups = [g for g in groups if g]
        if len(groups) < 2:
            continue
        worst = 0.0
        for _ in range(instances):
            events, subs = _random_events(space, groups, rng)
            worst = max(worst, check_product_lemma([SigmaFieldSpec(g) for g in groups], events, subs, space).max_violation)
        entries.append((f"product_lemma:{name}:{tag}", worst, 1e-12, 0.0))
    return entries


def oracle_shapes(dims) -> list[tuple[int, ...]]:
    """Every window with sides up to 3 in dimension 2 and up to 2 otherwise."""
    shapes = []
    for d in dims:
        top = 3 if d <= 2 else 2
        shapes += [s for s in itertools.product(range(1, top + 1), repeat=d) if list(s) == sorted(s)]
    return shapes


def run_oracle(config, ledger, threads) -> list[Check]:
    seed = config["experiment.seed"]
    entries = []
    for shape in oracle_shapes(config["field.dims"]):
        entries += filtration_entries(shape, seed)
    # a broken filtration must be caught: require its violation to exceed 0.05
    space = window_space((2, 2))
    broken = check_commuting(corrupted_filtration(space), filtration_indices((2, 2)), space).max_violation
    entries.append(("corrupted:2x2:must_exceed_0.05", 0.05, broken, 0.0))
    checks = [scalar_check("oracle:filtrations", entries)]

    ortho = []
    for kind in ("iid", "modulated", "tensor"):
        spec = GeneratorSpec(kind, seed=seed)
        ortho.append((f"orthomartingale:{kind}:2x2", check_orthomartingale(spec, (2, 2)).max_violation, 1e-12, 0.0))
    checks.append(scalar_check("oracle:orthomartingale", ortho))

    params = BoundParams(2.0, 3.0, 2)
    f_constant(params, ledger)
    corollary_constant(params, ledger)
    for kind in ("iid", "modulated", "tensor"):
        for dominated in (False, True):
            report = verify_deviation(GeneratorSpec(kind, seed=seed), (2, 2), params, mode="exact", dominated=dominated)
            report.name = f"{report.name}:d=2:exact"
            checks.append(tail_check(report))

    rosenthal = verify_rosenthal(GeneratorSpec("iid", seed=seed), (4, 4), r=2.0)
    checks.append(scalar_check("oracle:rosenthal", [
        ("rosenthal:E|S_N|^2=16", abs(rosenthal.lhs - 16.0), 1e-12, 0.0),
        ("rosenthal:sum E|X_i|^2=16", abs(rosenthal.rhs - 16.0), 1e-12, 0.0),
        ("rosenthal:C(B)=1", abs(rosenthal.constant - 1.0), 0.0, 0.0),
    ]))
    return checks


RUNNERS = {
    "deviation": run_deviation,
    "regression": run_regression,
    "slln": run_slln,
    "baum-katz": run_baum_katz,
    "weighted": run_weighted,
    "operators": run_operators,
    "oracle": run_oracle,
}


def run_experiment(config: ExperimentConfig, threads=None, ledger: ConstantLedger | None = None) -> tuple[list[Check], ConstantLedger]:
    ledger = ledger if ledger is not None else ConstantLedger()
    return RUNNERS[config.kind](config, ledger, threads), ledger


def row_dicts(checks: list[Check]) -> list[dict]:
    return [asdict(r) for c in checks for r in c.rows]


def finite_or_none(x: float):
    return x if math.isfinite(x) else None
