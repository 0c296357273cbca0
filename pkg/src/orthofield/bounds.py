"""Explicit constants and right-hand sides of the deviation inequalities."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .field_lab import (
    REAL,
    GeneratorSpec,
    NormedValueSpace,
    batch_max_partial_sums,
    batch_power_sums,
    exact_field,
    generate_batch,
    prefix_sums,
)
from .lattice import Rectangle
from .parallel import dkw_epsilon
from .tail_calculus import (
    NEG_INF,
    POS_INF,
    DivergenceError,
    OperatorParams,
    StepTail,
    TailCheck,
    TailFunction,
    apply_T,
    composition_constant,
    default_t_grid,
    ecdf_tail,
    I_value,
    kappa_constant,
)


# ---------------------------------------------------------------------------
# ledger


@dataclass
class LedgerEntry:
    name: str
    value: float
    formula: str
    inputs: dict

    def as_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "formula": self.formula, "inputs": self.inputs}


@dataclass
class ConstantLedger:
    """Named constants with the formula and inputs that produced each one."""

    entries: dict[str, LedgerEntry] = field(default_factory=dict)

    def record(self, name: str, value: float, formula: str, **inputs) -> float:
        value = float(value)
        if not (math.isfinite(value) and value > 0):
            raise ValueError(f"constant {name} = {value} is not positive and finite")
        clean = {k: (str(v) if not isinstance(v, (int, float, str, bool, type(None))) else v) for k, v in inputs.items()}
        self.entries[name] = LedgerEntry(name, value, formula, clean)
        return value

    def __getitem__(self, name: str) -> float:
        return self.entries[name].value

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __iter__(self):
        return iter(sorted(self.entries))

    def to_json(self) -> str:
        ordered = [self.entries[k].as_dict() for k in sorted(self.entries)]
        return json.dumps(ordered, indent=2, sort_keys=True)


def _fmt(x) -> str:
    return f"{x:g}" if isinstance(x, (int, float)) else str(x)


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class BoundParams:
    p: float
    q: float
    d: int
    C_pB: float = 1.0

    def __post_init__(self):
        if not 1 < self.p <= 2:
            raise ValueError("p must lie in (1, 2]")
        if not self.q > self.p:
            raise ValueError("q must exceed p")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("d must be a positive integer")
        if not self.C_pB > 0:
            raise ValueError("C_pB must be positive")

    def key(self) -> str:
        return f"p={_fmt(self.p)},q={_fmt(self.q)},d={self.d},C={_fmt(self.C_pB)}"

    def with_(self, **changes) -> "BoundParams":
        data = {"p": self.p, "q": self.q, "d": self.d, "C_pB": self.C_pB}
        data.update(changes)
        return BoundParams(**data)


def rescale_factor(c: float, q: float, d: int) -> float:
    """R with T_{p,q,d}(g)(c x) <= R T_{p,q,d}(g)(x); valid for finite q."""
    if c >= 1:
        return 1.0
    return c ** (-q) * (1 + math.log(1 / c)) ** d


# ---------------------------------------------------------------------------
# the constant recursion


def base_case_constant(params: BoundParams, ledger: ConstantLedger | None = None) -> float:
    """f_{p,q,1}: the one-dimensional martingale inequality made explicit."""
    ledger = ledger if ledger is not None else ConstantLedger()
    p, q, C = params.p, params.q, params.C_pB
    tag = params.with_(d=1).key()
    c0 = 2 ** q / (2 ** q - 1) * q * 2 ** (-p)
    scale = 2 ** (-1 - q / p) * C ** (-1 / p)
    q_cond = (q + 1) / p
    kappa = kappa_constant(q_cond)
    comp = composition_constant(NEG_INF, q / p, 0, 1, q_cond, 0).certified
    rescale = rescale_factor(scale, q, 0)
    value = c0 * (1 + kappa * comp) * rescale
    ledger.record(f"C_pB[p={_fmt(p)}]", C, "smoothness constant of the value space (user-overridable)", p=p)
    ledger.record(f"base.c0[{tag}]", c0, "2^q/(2^q-1) * q * 2^-p", p=p, q=q)
    ledger.record(f"base.scale_inverse[{tag}]", 1 / scale, "1 / (2^(-1-q/p) C^(-1/p))", p=p, q=q, C=C)
    ledger.record(f"kappa[{_fmt(q_cond)}]", kappa, "2^q/(2^q-1) (q+1) 2^(q(q+1)) at q=(q+1)/p", q=q_cond)
    ledger.record(f"comp.base[{tag}]", comp, "certified T(-inf,q/p,0) o T(1,(q+1)/p,0)", q_over_p=q / p, q_cond=q_cond)
    ledger.record(f"base.rescale[{tag}]", rescale, "s^-q with s = 2^(-1-q/p) C^(-1/p) (1 if s >= 1)", s=scale, q=q)
    ledger.record(f"f[{tag}]", value, "c0 (1 + kappa C_comp) R(s)", c0=c0, kappa=kappa, comp=comp, rescale=rescale)
    return value


def f_constant(params: BoundParams, ledger: ConstantLedger | None = None) -> float:
    """f_{p,q,d}(C_{p,B}) by the induction over the dimension.

    f_{p,q,d+1} = 4 f_{p,q,d} f_{p,q+1,1} C_a C_b 4^q (1 + log 4)^d where
    C_a is the certified constant of T(1,inf,0) o T(p,q,d) and C_b that of
    T(p,q,d-1) o T(p,q+1,0).  The inner factor uses q+1 because the
    composition lemma excludes equal upper exponents.
    """
    ledger = ledger if ledger is not None else ConstantLedger()
    name = f"f[{params.key()}]"
    if name in ledger:
        return ledger[name]
    if params.d == 1:
        return base_case_constant(params, ledger)
    p, q, d = params.p, params.q, params.d - 1
    prev = f_constant(params.with_(d=d), ledger)
    inner = f_constant(params.with_(q=q + 1, d=1), ledger)
    c_b = composition_constant(p, q, d - 1, p, q + 1, 0).certified
    c_a = composition_constant(1, POS_INF, 0, p, q, d).certified
    rescale = rescale_factor(0.25, q, d)
    value = 4 * prev * inner * c_a * c_b * rescale
    tag = params.key()
    ledger.record(f"comp.outer[{tag}]", c_a, "certified T(1,inf,0) o T(p,q,d-1)", p=p, q=q, d=d)
    ledger.record(f"comp.inner[{tag}]", c_b, "certified T(p,q,d-2) o T(p,q+1,0)", p=p, q=q, d=d)
    ledger.record(f"step.rescale[{tag}]", rescale, "4^q (1 + log 4)^(d-1)", q=q, d=d)
    ledger.record(name, value, "4 f[d-1] f[q+1,1] C_a C_b 4^q (1+log 4)^(d-1)", prev=prev, inner=inner, c_a=c_a, c_b=c_b)
    return value


def corollary_constant(params: BoundParams, ledger: ConstantLedger | None = None) -> float:
    """Constant in front of T_{p,q,d}(tail of V) when sum ||X_i||^p is convex-dominated by V^p.

    Convex ordering gives P(U > tau) <= int_1^inf P(V^p > tau v / 4) dv; the
    substitution w = v^{1/p} turns the deviation bound into
    p T_{p,q,d-1} o T_{p,inf,0}(tail V)(t 4^{-1/p}).
    """
    ledger = ledger if ledger is not None else ConstantLedger()
    p, q, d = params.p, params.q, params.d
    f = f_constant(params, ledger)
    comp = composition_constant(p, q, d - 1, p, POS_INF, 0).certified
    rescale = rescale_factor(4 ** (-1 / p), q, d)
    value = f * p * comp * rescale
    tag = params.key()
    ledger.record(f"comp.cor[{tag}]", comp, "certified T(p,q,d-1) o T(p,inf,0)", p=p, q=q, d=d)
    ledger.record(f"fcor[{tag}]", value, "f p C_comp 4^(q/p) (1 + log(4)/p)^d", f=f, comp=comp, rescale=rescale)
    return value


def moment_constant(p: float, s: float, d: int, C_pB: float = 1.0, ledger: ConstantLedger | None = None) -> float:
    """K(p,s,d) with ||max_n ||S_n|| ||_s <= K ||(sum ||X_i||^p)^{1/p}||_s, using q = s + 1."""
    if not s > p:
        raise ValueError("need s > p")
    ledger = ledger if ledger is not None else ConstantLedger()
    params = BoundParams(p, s + 1, d, C_pB)
    f = f_constant(params, ledger)
    value = (f * (1.0 / (params.q - s) + I_value(s - p, d - 1))) ** (1 / s)
    ledger.record(
        f"K[p={_fmt(p)},s={_fmt(s)},d={d},C={_fmt(C_pB)}]", value,
        "(f_{p,s+1,d} (1 + I_{s-p,d-1}))^(1/s)", f=f,
    )
    return value


def build_ledger(params_list, moment_list=()) -> ConstantLedger:
    ledger = ConstantLedger()
    for params in params_list:
        f_constant(params, ledger)
        corollary_constant(params, ledger)
    for p, s, d, C in moment_list:
        moment_constant(p, s, d, C, ledger)
    return ledger


# ---------------------------------------------------------------------------
# right-hand sides


def theorem_operator(params: BoundParams) -> OperatorParams:
    return OperatorParams(params.p, params.q, params.d - 1)


def deviation_rhs(params: BoundParams, tail: TailFunction, t, ledger: ConstantLedger | None = None):
    """f_{p,q,d} T_{p,q,d-1}(tail of Y)(t) with Y = (sum ||X_i||^p)^{1/p}."""
    f = f_constant(params, ledger)
    return f * apply_T(theorem_operator(params), tail, t)


def deviation_rhs_dominated(params: BoundParams, tail: TailFunction, t, ledger: ConstantLedger | None = None):
    """Dominated form: constant times T_{p,q,d}(tail of V)(t)."""
    f = corollary_constant(params, ledger)
    return f * apply_T(OperatorParams(params.p, params.q, params.d), tail, t)


def rhs_is_finite(params: BoundParams, tail: TailFunction, t: float = 1.0) -> bool:
    try:
        value = apply_T(theorem_operator(params), tail, t)
    except DivergenceError:
        return False
    return math.isfinite(value)


def pareto_tail(beta: float):
    from .tail_calculus import AnalyticTail

    return AnalyticTail(lambda v: np.minimum(1.0, v ** (-beta)))


def phi_moment_is_finite(beta: float, p: float, log_power: int) -> bool:
    """E Y^p (1 + |log Y|)^k for Pareto(beta) on [1, inf): finite iff beta > p."""
    integrand = lambda w: math.exp((p - beta) * w) * (1 + w) ** log_power
    total = 0.0
    for k in range(400):
        piece = sum(integrand(k + j / 8) / 8 for j in range(8))
        total += piece
        if piece < 1e-12 * total:
            return True
    return False


# ---------------------------------------------------------------------------
# verification


@dataclass
class DeviationReport(TailCheck):
    mode: str = "mc"
    constant: float = 0.0


def verify_deviation(
    spec: GeneratorSpec,
    rect,
    params: BoundParams,
    trials: int = 10_000,
    t_grid=None,
    mode: str = "mc",
    space: NormedValueSpace = REAL,
    dominated: bool = False,
    threads=None,
) -> DeviationReport:
    """Tail of max_n ||S_n|| against the deviation bound (or its dominated form).

    Exact mode enumerates a finite space and uses no band.  Monte Carlo mode
    compares the empirical tail with the bound evaluated at the empirical tail
    of Y (or of V = |N|^{1/p} ||X_1|| when ``dominated``), plus the 99% DKW band.
    """
    rect = rect if isinstance(rect, Rectangle) else Rectangle(rect)
    shape = rect.shape
    ledger = ConstantLedger()
    if mode == "exact":
        ex = exact_field(spec, shape)
        vals = ex.values[..., None]
        maxima = batch_max_partial_sums(vals, REAL)
        probs = ex.space.probs
        if dominated:
            first = np.abs(vals.reshape(vals.shape[0], -1)[:, 0])
            y = rect.volume ** (1 / params.p) * first
        else:
            y = batch_power_sums(vals, params.p, REAL)
        y_tail = StepTail(y, probs)
        t = default_t_grid(maxima) if t_grid is None else np.asarray(t_grid, dtype=float)
        lhs = StepTail(maxima, probs)(t)
        band = np.zeros_like(t)
        trials_used = 0
    else:
        batch = generate_batch(spec, shape, trials, space, threads)
        maxima = batch_max_partial_sums(batch, space)
        if dominated:
            y = rect.volume ** (1 / params.p) * space.norm(batch.reshape(trials, -1, space.width)[:, 0])
        else:
            y = batch_power_sums(batch, params.p, space)
        y_tail = ecdf_tail(y)
        t = default_t_grid(maxima) if t_grid is None else np.asarray(t_grid, dtype=float)
        lhs = ecdf_tail(maxima)(t)
        band = np.full(t.shape, dkw_epsilon(trials))
        trials_used = trials
    if dominated:
        rhs = np.asarray(deviation_rhs_dominated(params, y_tail, t, ledger), dtype=float)
        const = corollary_constant(params, ledger)
    else:
        rhs = np.asarray(deviation_rhs(params, y_tail, t, ledger), dtype=float)
        const = f_constant(params, ledger)
    name = f"{'corollary' if dominated else 'theorem'}:{spec.kind}:{spec.law}"
    return DeviationReport(name, t, lhs, rhs, band, trials_used, mode, const)


def max_moment_bound(p: float, s: float, samples_max, samples_y, d: int, C_pB: float = 1.0) -> tuple[float, float, float]:
    """(||max||_s, ||Y||_s, K) from paired samples; the bound reads lhs <= K rhs."""
    lhs = float(np.mean(np.asarray(samples_max, dtype=float) ** s) ** (1 / s))
    rhs = float(np.mean(np.asarray(samples_y, dtype=float) ** s) ** (1 / s))
    return lhs, rhs, moment_constant(p, s, d, C_pB)


@dataclass
class RosenthalReport:
    r: float
    lhs: float
    rhs: float
    constant: float
    lp_lhs: float | None = None
    lp_rhs: float | None = None
    slack: float = 0.0
    lp_slack: float = 0.0

    @property
    def holds(self) -> bool:
        """Exact reports use a 1e-12 relative tolerance; Monte Carlo ones add three standard errors."""
        ok = self.lhs <= self.constant * self.rhs * (1 + 1e-12) + self.slack
        if self.lp_lhs is not None:
            ok = ok and self.lp_lhs <= self.lp_rhs * (1 + 1e-12) + self.lp_slack
        return ok


def verify_rosenthal(
    spec: GeneratorSpec,
    rect,
    r: float = 2.0,
    trials: int | None = None,
    lp: float | None = None,
    space: NormedValueSpace = REAL,
    threads=None,
) -> RosenthalReport:
    """E||S_N||^r against C(B)^d sum E||X_i||^r, exactly when ``trials`` is None.

    With ``lp`` = p >= 2 also compares ||S_N||_p with (p-1)^{d/2} (sum ||X_i||_p^2)^{1/2}.
    """
    rect = rect if isinstance(rect, Rectangle) else Rectangle(rect)
    shape, d = rect.shape, rect.dim
    if not 1 < r <= 2:
        raise ValueError("r must lie in (1, 2]")
    c_b = space.smoothness_constant(r)
    if trials is None:
        ex = exact_field(spec, shape)
        vals = ex.values.reshape(ex.space.n_atoms, -1)
        weights = ex.space.probs
        total = vals.sum(axis=1)
        lhs = float(weights @ np.abs(total) ** r)
        rhs = float(np.sum(weights @ np.abs(vals) ** r))
        lp_pair = None
        if lp is not None:
            lp_pair = (
                float((weights @ np.abs(total) ** lp) ** (1 / lp)),
                (lp - 1) ** (d / 2) * float(np.sum((weights @ np.abs(vals) ** lp) ** (2 / lp)) ** 0.5),
            )
    else:
        batch = generate_batch(spec, shape, trials, space, threads)
        flat = batch.reshape(trials, -1, space.width)
        total = space.norm(flat.sum(axis=1))
        norms = space.norm(flat)
        lhs = float(np.mean(total ** r))
        rhs = float(np.sum(np.mean(norms ** r, axis=0)))
        slack = 3 * float(np.std(total ** r - np.sum(norms ** r, axis=1))) / math.sqrt(trials)
        lp_pair = None
        if lp is not None:
            moment = float(np.mean(total ** lp))
            spread = 3 * float(np.std(total ** lp)) / math.sqrt(trials)
            lp_pair = (
                moment ** (1 / lp),
                (lp - 1) ** (d / 2) * float(np.sum(np.mean(norms ** lp, axis=0) ** (2 / lp)) ** 0.5),
                (moment + spread) ** (1 / lp) - moment ** (1 / lp),
            )
        const = c_b ** d
        if lp_pair is None:
            return RosenthalReport(r, lhs, rhs, const, slack=slack)
        return RosenthalReport(r, lhs, rhs, const, lp_pair[0], lp_pair[1], slack, lp_pair[2])
    const = c_b ** d
    if lp_pair is None:
        return RosenthalReport(r, lhs, rhs, const)
    return RosenthalReport(r, lhs, rhs, const, *lp_pair)
