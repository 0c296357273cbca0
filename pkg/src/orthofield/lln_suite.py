"""Strong laws, Baum-Katz series and weighted sums checked on dyadic blocks."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bounds import BoundParams, ConstantLedger, corollary_constant
from .field_lab import (
    REAL,
    GeneratorSpec,
    NormedValueSpace,
    UnsupportedCombination,
    batch_max_partial_sums,
    generate_batch,
    get_law,
    prefix_sums,
)
from .parallel import dkw_epsilon, trial_rng
from .tail_calculus import I_value, YoungExponents, orlicz_norm

CENSOR_COUNT = 10


# ---------------------------------------------------------------------------
# budgets and reports


@dataclass(frozen=True)
class SeriesBudget:
    cap: int = 6
    trials: int = 1000
    alpha_level: float = 0.01
    threads: int | None = None

    def __post_init__(self):
        if self.cap < 0 or self.trials < 1:
            raise ValueError("cap must be >= 0 and trials >= 1")

    def band(self) -> float:
        return dkw_epsilon(self.trials, self.alpha_level)


@dataclass
class BlockRow:
    block: str
    weight: float
    p_hat: float
    band: float
    censored: bool
    cumulative: float
    cumulative_upper: float


@dataclass
class SeriesReport:
    name: str
    rows: list[BlockRow]
    rhs: float
    cap: int
    trials: int
    extra: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.rows[-1].cumulative if self.rows else 0.0

    @property
    def total_upper(self) -> float:
        return self.rows[-1].cumulative_upper if self.rows else 0.0

    @property
    def holds(self) -> bool:
        return self.total_upper <= self.rhs

    @property
    def partial_sums(self) -> np.ndarray:
        return np.array([r.cumulative for r in self.rows])

    def csv_text(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["block", "weight", "p_hat", "band", "censored", "cumulative", "cumulative_upper"])
        for r in self.rows:
            writer.writerow([r.block, repr(r.weight), repr(r.p_hat), repr(r.band), int(r.censored), repr(r.cumulative), repr(r.cumulative_upper)])
        return out.getvalue()


def _accumulate(blocks, weights, probs, band, trials) -> list[BlockRow]:
    rows, total, upper = [], 0.0, 0.0
    floor = CENSOR_COUNT / trials
    for block, w, p in zip(blocks, weights, probs):
        censored = p < floor
        hi = min(1.0, max(p, floor) + band) if censored else min(1.0, p + band)
        total += w * p
        upper += w * hi
        rows.append(BlockRow(block, float(w), float(p), float(band), bool(censored), total, upper))
    return rows


def block_spec(spec: GeneratorSpec, block: int) -> GeneratorSpec:
    """Generator whose trial streams are keyed by (master seed, block index)."""
    state = np.random.SeedSequence(entropy=int(spec.seed) & (2 ** 64 - 1), spawn_key=(1_000_003, int(block))).generate_state(1, np.uint64)[0]
    return replace(spec, seed=int(state))


def dyadic_blocks(d: int, cap: int):
    return list(itertools.product(range(cap + 1), repeat=d))


def _block_maxima(spec, block_index, exps, budget, space, scale):
    shape = tuple(2 ** e for e in exps)
    values = generate_batch(block_spec(spec, block_index), shape, budget.trials, space, budget.threads)
    if scale != 1:
        values = values * scale
    return batch_max_partial_sums(values, space)


# ---------------------------------------------------------------------------
# noise laws


def abs_law(spec: GeneratorSpec, draws: int = 200_000) -> tuple[np.ndarray, np.ndarray]:
    """Atoms and weights of ||X_1|| (exact for finite laws, a fixed-seed sample otherwise)."""
    law = get_law(spec.law)
    if spec.kind == "tensor" and not (spec.law == "rademacher" and spec.modulation in (None, "sign")):
        raise UnsupportedCombination("||X_1|| has no closed form for this tensor field")
    if spec.kind != "tensor" and spec.modulation == "scale":
        raise UnsupportedCombination("scale-modulated noise is not identically distributed")
    if spec.kind == "tensor":
        return np.array([1.0]), np.array([1.0])
    if law.finite:
        support, probs = law.as_pair()
        return np.abs(np.asarray(support, dtype=float)), np.asarray(probs, dtype=float)
    sample = np.abs(law.sample(trial_rng(spec.seed, 2 ** 40), (draws,)))
    return sample, np.full(draws, 1.0 / draws)


def phi_moment(values, weights, p: float, q: float, log_plus: bool = False) -> float:
    y = np.abs(np.asarray(values, dtype=float))
    with np.errstate(divide="ignore"):
        logs = np.where(y > 0, np.log(np.where(y > 0, y, 1.0)), 0.0)
    logs = np.maximum(logs, 0.0) if log_plus else np.abs(logs)
    return float(np.asarray(weights) @ np.where(y > 0, y ** p * (1 + logs) ** q, 0.0))


# ---------------------------------------------------------------------------
# indicator sums


def c_leq(p: float, r: float, d: int) -> float:
    """Constant for sum_k 2^{k(1-r/p)} (k+1)^{d-1} 1{Y <= 2^{k/p}} <= c L_+(Y)^{d-1} Y^{p-r}."""
    a = r / p - 1
    if a <= 0:
        raise ValueError("need p < r")
    series = _poly_geometric_tail(2 ** (-a), d - 1)
    return max(p / math.log(2), 2.0) ** (d - 1) * series


def c_gt(p: float, s: float, d: int) -> float:
    """Constant for sum_k 2^{sk} (k+1)^{d-1} 1{Y > 2^{k/p}} <= c Y^{ps} L(Y)^{d-1} 1{Y > 1}."""
    if s <= 0:
        raise ValueError("need s > 0")
    return max(p / math.log(2), 1.0) ** (d - 1) / (1 - 2 ** (-s))


def _poly_geometric_tail(x: float, power: int, rtol: float = 1e-15) -> float:
    """sum_{k >= 0} x^k (k + 1)^power plus a certified bound on the neglected remainder."""
    total, k = 0.0, 0
    while True:
        term = x ** k * (k + 1) ** power
        total += term
        k += 1
        ratio = x * ((k + 2) / (k + 1)) ** power
        if ratio < 1:
            remainder = x ** k * (k + 1) ** power / (1 - ratio)
            if remainder <= rtol * total:
                return total + remainder


def indicator_sum_leq(Y: float, p: float, r: float, d: int) -> tuple[float, float]:
    """Left side of the first indicator bound as (value, certified upper value)."""
    a = r / p - 1
    k0 = 0 if Y <= 1 else max(0, math.ceil(p * math.log2(Y) - 1e-12))
    while 2 ** (k0 / p) < Y:
        k0 += 1
    while k0 > 0 and 2 ** ((k0 - 1) / p) >= Y:
        k0 -= 1
    total, k = 0.0, k0
    while True:
        total += 2 ** (-a * k) * (k + 1) ** (d - 1)
        k += 1
        ratio = 2 ** (-a) * ((k + 2) / (k + 1)) ** (d - 1)
        if ratio < 1:
            remainder = 2 ** (-a * k) * (k + 1) ** (d - 1) / (1 - ratio)
            if remainder <= 1e-15 * total:
                return total, total + remainder


def indicator_sum_gt(Y: float, p: float, s: float, d: int) -> float:
    """Left side of the second indicator bound (a finite sum)."""
    total, k = 0.0, 0
    while Y > 2 ** (k / p):
        total += 2 ** (s * k) * (k + 1) ** (d - 1)
        k += 1
    return total


def indicator_sum_closed_form(m: int, s: float, d: int) -> float:
    """sum_{k<m} 2^{sk} (k+1)^{d-1}, the second left side at Y = 2^{m/p}, for d <= 3."""
    x = 2.0 ** s
    if m <= 0:
        return 0.0
    if d == 1:
        return (x ** m - 1) / (x - 1)
    if d == 2:
        return (1 - (m + 1) * x ** m + m * x ** (m + 1)) / (1 - x) ** 2
    if d == 3:
        num = 1 + x - (m + 1) ** 2 * x ** m + (2 * m * m + 2 * m - 1) * x ** (m + 1) - m * m * x ** (m + 2)
        return num / (1 - x) ** 3
    raise ValueError("closed form implemented for d <= 3")


def _L(y):
    return 1 + abs(math.log(y)) if y > 0 else math.inf


@dataclass
class IndicatorReport:
    grid: np.ndarray
    leq_lhs: np.ndarray
    leq_rhs: np.ndarray
    gt_lhs: np.ndarray
    gt_rhs: np.ndarray
    c_leq: float
    c_gt: float
    fitted_leq: float
    fitted_gt: float

    @property
    def holds(self) -> bool:
        # equality is attained on the lattice Y = 2^{m/p}, hence the rounding allowance
        return bool(np.all(self.leq_lhs <= self.leq_rhs * (1 + 1e-12)) and np.all(self.gt_lhs <= self.gt_rhs * (1 + 1e-12)))

    @property
    def fitted_holds(self) -> bool:
        """Whether constants fitted at Y = 2 would have sufficed on the whole grid."""
        leq_shape = self.leq_rhs / self.c_leq
        gt_shape = np.where(self.gt_rhs > 0, self.gt_rhs / self.c_gt, 0.0)
        return bool(np.all(self.leq_lhs <= self.fitted_leq * leq_shape * (1 + 1e-12)) and np.all(self.gt_lhs <= self.fitted_gt * gt_shape * (1 + 1e-12)))


def indicator_sum_bounds(p: float, s: float, d: int, grid=None, r: float = 2.0) -> IndicatorReport:
    """Both indicator-sum inequalities on a Y grid with certified constants.

    The first is checked in its stated form c (1 + L(Y))^{d-1} Y^{p-r}; the
    second as c Y^{ps} L(Y)^{d-1} 1{Y > 1}.  Constants fitted at Y = 2 are
    reported alongside for comparison.
    """
    grid = np.logspace(-1, 20 / p * math.log10(2), 40) if grid is None else np.asarray(grid, dtype=float)
    cl, cg = c_leq(p, r, d), c_gt(p, s, d)
    leq_lhs = np.array([indicator_sum_leq(y, p, r, d)[1] for y in grid])
    leq_shape = np.array([(1 + _L(y)) ** (d - 1) * y ** (p - r) for y in grid])
    gt_lhs = np.array([indicator_sum_gt(y, p, s, d) for y in grid])
    gt_shape = np.array([y ** (p * s) * _L(y) ** (d - 1) if y > 1 else 0.0 for y in grid])
    fit_leq = indicator_sum_leq(2.0, p, r, d)[1] / ((1 + _L(2.0)) ** (d - 1) * 2.0 ** (p - r))
    fit_gt = indicator_sum_gt(2.0, p, s, d) / (2.0 ** (p * s) * _L(2.0) ** (d - 1))
    return IndicatorReport(grid, leq_lhs, cl * leq_shape, gt_lhs, cg * gt_shape, cl, cg, fit_leq, fit_gt)


# ---------------------------------------------------------------------------
# strong law


def slln_constant(p: float, d: int, r: float = 2.0, C_rB: float = 1.0, ledger: ConstantLedger | None = None) -> float:
    """K with sum_n P(|2^n|^{-1/p} max ||S_j|| > 2x) <= K E phi_{p,d-1}(||X_1||/x).

    Truncation at |2^n|^{1/p}: the bounded part costs Cairoli's (r/(r-1))^{rd},
    C_rB^d and 2^{dr} from the 2^d conditional expectations; the large part
    costs 2^d through Markov.
    """
    if not 1 < p < r:
        raise ValueError("need 1 < p < r")
    ledger = ledger if ledger is not None else ConstantLedger()
    small = (r / (r - 1)) ** (r * d) * C_rB ** d * 2 ** (d * r) * c_leq(p, r, d)
    large = 2 ** d * c_gt(p, 1 - 1 / p, d)
    return ledger.record(
        f"slln.K[p={p:g},d={d},r={r:g}]", small + large,
        "(r/(r-1))^{rd} C^d 2^{dr} c_leq(p,r,d) + 2^d c_gt(p,1-1/p,d)", small=small, large=large,
    )


def dyadic_series(spec: GeneratorSpec, p: float, d: int, t: float = 1.0, budget: SeriesBudget = SeriesBudget(),
                  space: NormedValueSpace = REAL, scale: float = 1.0, r: float = 2.0, ledger=None) -> SeriesReport:
    """sum over dyadic n of P(|2^n|^{-1/p} max_{j <= 2^n} ||S_j|| > t) against K E phi_{p,d-1}(2 ||X_1|| / t)."""
    blocks = dyadic_blocks(d, budget.cap)
    probs, weights, names = [], [], []
    for b, exps in enumerate(blocks):
        maxima = _block_maxima(spec, b, exps, budget, space, scale)
        level = t * 2 ** (sum(exps) / p)
        probs.append(float(np.mean(maxima > level)))
        weights.append(1.0)
        names.append("x".join(map(str, exps)))
    rows = _accumulate(names, weights, probs, budget.band(), budget.trials)
    K = slln_constant(p, d, r, space.smoothness_constant(r), ledger)
    vals, w = abs_law(spec)
    moment = phi_moment(scale * vals * 2 / t, w, p, d - 1)
    return SeriesReport(f"slln:{spec.kind}:{spec.law}:d={d}", rows, K * moment, budget.cap, budget.trials, {"K": K, "moment": moment})


def _ratio_fields(spec, d, cap, trials, space, threads, scale=1.0):
    shape = (2 ** cap,) * d
    values = generate_batch(spec, shape, trials, space, threads) * scale
    sums = prefix_sums(values, list(range(1, d + 1)))
    norms = space.norm(sums)
    idx = np.meshgrid(*([np.arange(1, 2 ** cap + 1)] * d), indexing="ij")
    volume = np.prod(np.stack(idx), axis=0).astype(float)
    return norms, volume, idx


@dataclass
class WeakLpReport:
    t: np.ndarray
    estimate: np.ndarray
    upper: np.ndarray
    bound: float
    constant: float
    orlicz: float

    @property
    def sup_estimate(self) -> float:
        return float(np.max(self.estimate)) if self.estimate.size else 0.0

    @property
    def holds(self) -> bool:
        return bool(np.max(self.upper, initial=0.0) <= self.bound)


def weak_lp_constant(p: float, d: int, r: float = 2.0, C_rB: float = 1.0, ledger=None) -> float:
    """C with sup_t t^p P(sup_n ||S_n|| / |n|^{1/p} > t) <= C ||X_1||^p (log_+ Orlicz norm)."""
    ledger = ledger if ledger is not None else ConstantLedger()
    K = slln_constant(p, d, r, C_rB, ledger)
    lam = 2 ** (1 + d / p)
    return ledger.record(f"slln.weak[p={p:g},d={d},r={r:g}]", K * lam ** p * (1 + math.log(lam)) ** (d - 1),
                         "K lam^p (1 + log lam)^{d-1}, lam = 2^{1+d/p}", K=K, lam=lam)


def weak_lp_estimate(spec: GeneratorSpec, p: float, d: int, budget: SeriesBudget = SeriesBudget(),
                     t_grid=None, space: NormedValueSpace = REAL, scale: float = 1.0, r: float = 2.0, ledger=None) -> WeakLpReport:
    norms, volume, _ = _ratio_fields(spec, d, budget.cap, budget.trials, space, budget.threads, scale)
    ratios = norms / volume ** (1 / p)
    sup = ratios.reshape(budget.trials, -1).max(axis=1)
    top = float(sup.max())
    t = np.linspace(top / 40, top, 40) if t_grid is None else np.asarray(t_grid, dtype=float)
    if top == 0 and t_grid is None:
        t = np.array([1.0])
    p_hat = np.array([np.mean(sup > x) for x in t])
    estimate = t ** p * p_hat
    upper = t ** p * np.minimum(1.0, p_hat + budget.band())
    vals, w = abs_law(spec)
    norm = orlicz_norm(scale * vals, YoungExponents(p, d - 1, log_plus=True), weights=w) if np.any(vals > 0) else 0.0
    C = weak_lp_constant(p, d, r, space.smoothness_constant(r), ledger)
    return WeakLpReport(t, estimate, upper, C * norm ** p, C, norm)


@dataclass
class DecayTrace:
    levels: np.ndarray
    traces: np.ndarray

    @property
    def median(self) -> np.ndarray:
        return np.median(self.traces, axis=0)

    @property
    def median_ratio(self) -> float:
        ratio = np.where(self.traces[:, 0] > 0, self.traces[:, -1] / np.where(self.traces[:, 0] > 0, self.traces[:, 0], 1), 0.0)
        return float(np.median(ratio))


def sup_decay_trace(spec: GeneratorSpec, p: float, d: int, cap: int = 6, trials: int = 200,
                    space: NormedValueSpace = REAL, threads=None) -> DecayTrace:
    """Per trial, N -> sup{||S_n|| / |n|^{1/p} : max n >= N} for N = 2^0..2^cap inside [1, 2^cap]^d."""
    norms, volume, idx = _ratio_fields(spec, d, cap, trials, space, threads)
    ratios = norms / volume ** (1 / p)
    biggest = np.max(np.stack(idx), axis=0)
    levels = 2 ** np.arange(cap + 1)
    flat = ratios.reshape(trials, -1)
    mask = biggest.reshape(-1)
    traces = np.stack([flat[:, mask >= N].max(axis=1) for N in levels], axis=1)
    return DecayTrace(levels, traces)


# ---------------------------------------------------------------------------
# Baum-Katz


def _check_alpha(r: float, alpha: float):
    if not 1 / r < alpha <= 1:
        raise ValueError("alpha must lie in (1/r, 1]")


def baum_katz_r_constant(r: float, alpha: float, d: int, C_rB: float = 1.0, ledger=None) -> float:
    _check_alpha(r, alpha)
    ledger = ledger if ledger is not None else ConstantLedger()
    beta = alpha - 1 / r
    F = corollary_constant(BoundParams(r, r + 1, d, C_rB), ledger)
    value = F * c_gt(1 / beta, r * beta, d) * (1 + I_value(1, d - 1))
    return ledger.record(f"bk_r[r={r:g},alpha={alpha:g},d={d}]", value,
                         "f_cor(r, r+1, d) c_gt(1/beta, r beta, d) (1 + I_{1,d-1})", F=F, beta=beta)


def baum_katz_s_constant(r: float, s: float, alpha: float, d: int, C_rB: float = 1.0, ledger=None) -> float:
    _check_alpha(r, alpha)
    if not s > r:
        raise ValueError("need s > r")
    ledger = ledger if ledger is not None else ConstantLedger()
    beta = alpha - 1 / r
    F = corollary_constant(BoundParams(r, s + 1, d, C_rB), ledger)
    value = F * c_gt(1 / beta, s * beta, d) * (I_value(1, d - 1) + I_value(s - r, d))
    return ledger.record(f"bk_s[r={r:g},s={s:g},alpha={alpha:g},d={d}]", value,
                         "f_cor(r, s+1, d) c_gt(1/beta, s beta, d) (I_{1,d-1} + I_{s-r,d})", F=F, beta=beta)


def _baum_katz_blocks(spec, r, alpha, d, eps, budget, space, scale):
    probs, names, sizes = [], [], []
    for b, exps in enumerate(dyadic_blocks(d, budget.cap)):
        maxima = _block_maxima(spec, b, exps, budget, space, scale)
        size = 2.0 ** sum(exps)
        probs.append(float(np.mean(maxima > eps * size ** alpha)))
        names.append("x".join(map(str, exps)))
        sizes.append(size)
    return names, np.array(sizes), probs


def baum_katz_r(spec: GeneratorSpec, r: float, alpha: float, d: int, eps: float = 1.0, budget: SeriesBudget = SeriesBudget(),
                space: NormedValueSpace = REAL, scale: float = 1.0, ledger=None) -> SeriesReport:
    """Dyadic series sum_N |2^N|^{r alpha - 1} P(max ||S_i|| > eps |2^N|^alpha) against C E phi_{r,2d}(||X_1|| / eps)."""
    C = baum_katz_r_constant(r, alpha, d, space.smoothness_constant(r), ledger)
    names, sizes, probs = _baum_katz_blocks(spec, r, alpha, d, eps, budget, space, scale)
    rows = _accumulate(names, sizes ** (r * alpha - 1), probs, budget.band(), budget.trials)
    vals, w = abs_law(spec)
    moment = phi_moment(scale * vals / eps, w, r, 2 * d)
    return SeriesReport(f"baum_katz_r:{spec.law}:d={d}:alpha={alpha:g}", rows, C * moment, budget.cap, budget.trials,
                        {"constant": C, "moment": moment})


def baum_katz_s(spec: GeneratorSpec, r: float, s: float, alpha: float, d: int, eps: float = 1.0,
                budget: SeriesBudget = SeriesBudget(), space: NormedValueSpace = REAL, scale: float = 1.0, ledger=None) -> SeriesReport:
    """Dyadic series with weight |2^N|^{s(alpha - 1/r)} against C E phi_{s,d}(||X_1|| / eps).

    The block weight counts the |2^N| indices of the block; the series with
    the smaller weight |2^N|^{s(alpha-1/r)-1} is reported under ``extra``.
    """
    C = baum_katz_s_constant(r, s, alpha, d, space.smoothness_constant(r), ledger)
    names, sizes, probs = _baum_katz_blocks(spec, r, alpha, d, eps, budget, space, scale)
    beta = alpha - 1 / r
    rows = _accumulate(names, sizes ** (s * beta), probs, budget.band(), budget.trials)
    alt = float(np.sum(sizes ** (s * beta - 1) * np.array(probs)))
    vals, w = abs_law(spec)
    moment = phi_moment(scale * vals / eps, w, s, d)
    return SeriesReport(f"baum_katz_s:{spec.law}:d={d}:alpha={alpha:g}", rows, C * moment, budget.cap, budget.trials,
                        {"constant": C, "moment": moment, "unit_weight_total": alt})


# ---------------------------------------------------------------------------
# weighted sums


@dataclass(frozen=True)
class OperatorWeights:
    """For each n, scalar multiples of the identity on a finite rectangle anchored at 1.

    ``coefficients(n)`` returns an array over the rectangle; zero entries are
    zero operators.
    """

    kind: str = "squares"
    decay: float = 0.0

    def coefficients(self, n: int, d: int) -> np.ndarray:
        if self.kind == "squares":
            return np.ones((n,) * d)
        if self.kind == "zero":
            return np.zeros((1,) * d)
        if self.kind == "decaying":
            idx = np.meshgrid(*([np.arange(1, n + 1)] * d), indexing="ij")
            return np.prod(np.stack(idx).astype(float), axis=0) ** (-self.decay)
        raise ValueError(f"unknown weights {self.kind!r}")

    def C(self, n: int, d: int, p: float) -> float:
        return float(np.sum(np.abs(self.coefficients(n, d)) ** p) ** (1 / p))

    def cardinality(self, n: int, d: int) -> int:
        return int(np.count_nonzero(self.coefficients(n, d)))


def default_radius(weights: OperatorWeights, gamma: float, d: int):
    """R_n = Card(Lambda_n)^gamma."""
    return lambda n: float(max(1, weights.cardinality(n, d))) ** gamma


def weighted_series_constant(p: float, s: float, d: int, C_pB: float = 1.0, ledger=None) -> float:
    if not s > p:
        raise ValueError("need s > p")
    ledger = ledger if ledger is not None else ConstantLedger()
    F = corollary_constant(BoundParams(p, s + 1, d, C_pB), ledger)
    return ledger.record(f"weighted[p={p:g},s={s:g},d={d}]", F * (1 + I_value(s - p, d)),
                         "f_cor(p, s+1, d) (1 + I_{s-p,d})", F=F)


def weighted_series(spec: GeneratorSpec, weights: OperatorWeights, p: float, s: float, d: int, gamma: float = 0.25,
                    eps: float = 1.0, n_max: int = 32, trials: int = 1000, radius=None, space: NormedValueSpace = REAL,
                    threads=None, scale: float = 1.0, ledger=None) -> SeriesReport:
    """sum_n (R_n^s - R_{n-1}^s) P(||sum_i a_{n,i} X_i|| > eps C_{n,p} R_n) with R_0 = 0.

    The right side is f_cor(p, s+1, d) (1 + I_{s-p,d}) E (||X_1|| / eps)^s.
    """
    radius = radius or default_radius(weights, gamma, d)
    band = dkw_epsilon(trials)
    names, ws, probs = [], [], []
    previous = 0.0
    for n in range(1, n_max + 1):
        a = weights.coefficients(n, d)
        R = radius(n)
        C = weights.C(n, d, p)
        if C == 0:
            prob = 0.0
        else:
            values = generate_batch(block_spec(spec, n), a.shape, trials, space, threads) * scale
            sums = np.tensordot(values, a, axes=(list(range(1, d + 1)), list(range(d))))
            prob = float(np.mean(space.norm(sums) > eps * C * R))
        names.append(str(n))
        ws.append(R ** s - previous ** s)
        probs.append(prob)
        previous = R
    rows = _accumulate(names, ws, probs, band, trials)
    const = weighted_series_constant(p, s, d, space.smoothness_constant(p), ledger)
    vals, w = abs_law(spec)
    moment = float(w @ (scale * vals / eps) ** s)
    report = SeriesReport(f"weighted:{weights.kind}:d={d}", rows, const * moment, n_max, trials, {"constant": const, "moment": moment})
    return report


def tail_share(report: SeriesReport, fraction: float = 0.25) -> float:
    """Share of the series total contributed by the final ``fraction`` of its terms."""
    sums = report.partial_sums
    if sums.size == 0 or sums[-1] == 0:
        return 0.0
    cut = int(math.floor(len(sums) * (1 - fraction)))
    before = sums[cut - 1] if cut > 0 else 0.0
    return float((sums[-1] - before) / sums[-1])
