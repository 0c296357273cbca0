"""Tail functions and the operator calculus T_{p,q,d}.

For a nonnegative nonincreasing ``g`` and ``x > 0``::

    T_{p,q,d}(g)(x) = int_0^1 u^{q-1} g(xu) du + int_1^inf u^{p-1} (1 + log u)^d g(xu) du

``p = -inf`` removes the second integral and ``q = +inf`` removes the first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as sp_integrate

from .parallel import dkw_epsilon, map_trials, trial_rng
from .quadrature import integrate, integrate_many


class DivergenceError(ArithmeticError):
    """The operator integral does not converge for the given tail."""


# ---------------------------------------------------------------------------
# extended reals


@dataclass(frozen=True)
class Infinity:
    sign: int

    def __repr__(self) -> str:
        return "+inf" if self.sign > 0 else "-inf"

    def __neg__(self) -> "Infinity":
        return Infinity(-self.sign)


POS_INF = Infinity(1)
NEG_INF = Infinity(-1)

Extended = "float | Infinity"


def is_finite(value) -> bool:
    return not isinstance(value, Infinity)


def ext_lt(a, b) -> bool:
    if isinstance(a, Infinity) and isinstance(b, Infinity):
        return a.sign < b.sign
    if isinstance(a, Infinity):
        return a.sign < 0
    if isinstance(b, Infinity):
        return b.sign > 0
    return a < b


def ext_max(a, b):
    return b if ext_lt(a, b) else a


def ext_min(a, b):
    return a if ext_lt(a, b) else b


def ext_scale(value, s: float):
    """Multiply an extended real by a positive scalar."""
    if s <= 0:
        raise ValueError("scale must be positive")
    return value if isinstance(value, Infinity) else value * s


def parse_extended(text) -> "float | Infinity":
    if isinstance(text, Infinity):
        return text
    if isinstance(text, str):
        low = text.strip().lower()
        if low in {"inf", "+inf", "infinity", "+infinity"}:
            return POS_INF
        if low in {"-inf", "-infinity"}:
            return NEG_INF
        return float(low)
    value = float(text)
    if math.isinf(value):
        return POS_INF if value > 0 else NEG_INF
    return value


# ---------------------------------------------------------------------------
# operator parameters


@dataclass(frozen=True)
class OperatorParams:
    p: "float | Infinity"
    q: "float | Infinity"
    d: int = 0

    def __post_init__(self):
        p, q = parse_extended(self.p), parse_extended(self.q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        if p == POS_INF or q == NEG_INF:
            raise ValueError("p may only be -inf and q may only be +inf")
        if not ext_lt(p, q):
            raise ValueError(f"operator needs p < q, got p={p}, q={q}")
        if int(self.d) != self.d or self.d < 0:
            raise ValueError("d must be a nonnegative integer")
        object.__setattr__(self, "d", int(self.d))

    @property
    def has_lower_part(self) -> bool:
        return is_finite(self.q)

    @property
    def has_upper_part(self) -> bool:
        return is_finite(self.p)

    def scaled(self, s: float) -> "OperatorParams":
        return OperatorParams(ext_scale(self.p, s), ext_scale(self.q, s), self.d)

    def kernel(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        low = (u > 0) & (u <= 1)
        if self.has_lower_part:
            out[low] = u[low] ** (self.q - 1)
        high = u > 1
        if self.has_upper_part:
            out[high] = u[high] ** (self.p - 1) * (1 + np.log(u[high])) ** self.d
        return out

    def __str__(self) -> str:
        return f"T({self.p}, {self.q}, {self.d})"


# ---------------------------------------------------------------------------
# tail functions


class TailFunction:
    """Nonincreasing t -> P(Y > t); subclasses are immutable."""

    support_bound: float | None = None
    breakpoints: tuple[float, ...] = ()

    def __call__(self, t) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class StepTail(TailFunction):
    """Tail of a discrete law given by atoms and weights (right-continuous)."""

    values: np.ndarray
    weights: np.ndarray
    _suffix: np.ndarray = field(repr=False)

    def __init__(self, values, weights=None):
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            raise ValueError("a step tail needs at least one atom")
        if not np.all(np.isfinite(values)):
            raise ValueError("atoms must be finite")
        if weights is None:
            weights = np.full(values.size, 1.0 / values.size)
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.shape != values.shape or np.any(weights < 0):
            raise ValueError("weights must be nonnegative and match the atoms")
        weights = weights / weights.sum()
        order = np.argsort(values, kind="stable")
        values, weights = values[order], weights[order]
        suffix = np.concatenate([np.cumsum(weights[::-1])[::-1], [0.0]])
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_suffix", suffix)

    @property
    def support_bound(self) -> float:
        return float(self.values[-1])

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(np.unique(self.values[self.values > 0]))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        pos = np.searchsorted(self.values, t, side="right")
        return np.minimum(self._suffix[pos], 1.0)

    def power(self, s: float) -> "StepTail":
        if np.any(self.values < 0):
            raise ValueError("powers need nonnegative atoms")
        return StepTail(self.values ** s, self.weights)


@dataclass(frozen=True, eq=False)
class AnalyticTail(TailFunction):
    """Tail given by a vectorized callable on (0, inf).

    ``support_bound`` B asserts the tail vanishes on [B, inf); ``breakpoints``
    lists jump locations so quadrature can cut there.
    """

    func: Callable[[np.ndarray], np.ndarray]
    support_bound: float | None = None
    breakpoints: tuple[float, ...] = ()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.ones_like(t)
        pos = t > 0
        if np.any(pos):
            out[pos] = np.asarray(self.func(t[pos]), dtype=float)
        if self.support_bound is not None:
            out[t >= self.support_bound] = 0.0
        return out


def ecdf_tail(samples) -> StepTail:
    """Empirical tail t -> #{s > t}/n."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("ecdf_tail needs at least one sample")
    return StepTail(samples)


def exponential_tail(rate: float = 1.0) -> AnalyticTail:
    return AnalyticTail(lambda v: np.exp(-rate * v))


def indicator_tail(c: float) -> AnalyticTail:
    """Tail of the constant c: equal to 1 on (0, c) and 0 from c on."""
    return AnalyticTail(lambda v: (v < c).astype(float), support_bound=c, breakpoints=(c,))


def power_tail(tail: TailFunction, s: float) -> TailFunction:
    """Tail of Y^s given the tail of a nonnegative Y."""
    if isinstance(tail, StepTail):
        return tail.power(s)
    bound = None if tail.support_bound is None else tail.support_bound ** s
    points = tuple(b ** s for b in tail.breakpoints)
    return AnalyticTail(lambda v: tail(v ** (1.0 / s)), support_bound=bound, breakpoints=points)


# ---------------------------------------------------------------------------
# applying the operator

_PANEL = math.log(2.0)
_PANEL_RTOL = 1e-12
_QUAD_RTOL = 1e-11


def _upper_primitive(p: float, d: int, L: np.ndarray) -> np.ndarray:
    """int_0^L e^{pw} (1+w)^d dw, i.e. int_1^{e^L} u^{p-1}(1+log u)^d du."""
    L = np.asarray(L, dtype=float)
    if p == 0:
        return ((1 + L) ** (d + 1) - 1) / (d + 1)
    if abs(p) >= 0.05:
        def prim(w):
            acc = np.zeros_like(w)
            for k in range(d + 1):
                coef = (-1) ** k * math.factorial(d) / math.factorial(d - k) / p ** (k + 1)
                acc = acc + coef * (1 + w) ** (d - k)
            return np.exp(p * w) * acc
        return prim(L) - prim(np.zeros_like(L))
    # small |p|: the alternating closed form cancels badly, integrate instead
    nodes, weights = np.polynomial.legendre.leggauss(24)
    out = np.empty_like(L)
    for idx, length in np.ndenumerate(L):
        pieces = max(1, int(math.ceil(length)))
        edges = np.linspace(0.0, length, pieces + 1)
        a, b = edges[:-1, None], edges[1:, None]
        w = 0.5 * (a + b) + 0.5 * (b - a) * nodes[None, :]
        vals = np.exp(p * w) * (1 + w) ** d
        out[idx] = float(np.sum(0.5 * (b - a) * (vals @ weights[:, None])))
    return out


def cumulative_kernel(params: OperatorParams, a) -> np.ndarray:
    """K(a) = int_0^a kernel(u) du for a > 0 (and 0 for a <= 0)."""
    a = np.asarray(a, dtype=float)
    out = np.zeros_like(a)
    pos = a > 0
    if not np.any(pos):
        return out
    if params.has_lower_part:
        if params.q <= 0:
            raise DivergenceError("u^{q-1} is not integrable at 0 for q <= 0")
        out[pos] += np.minimum(a[pos], 1.0) ** params.q / params.q
    if params.has_upper_part:
        big = a > 1
        if np.any(big):
            out[big] += _upper_primitive(params.p, params.d, np.log(a[big]))
    return out


def _apply_step(params: OperatorParams, g: StepTail, x: np.ndarray) -> np.ndarray:
    ratios = g.values[None, :] / x[:, None]
    return cumulative_kernel(params, ratios) @ g.weights


def _lower_part(params: OperatorParams, g, x: float, rtol: float = _QUAD_RTOL) -> float:
    # substitution v = u^q removes the singularity of u^{q-1} at 0
    q = params.q
    if q <= 0:
        if float(g(np.array([1e-300 * max(x, 1.0)]))[0]) > 0:
            raise DivergenceError("u^{q-1} is not integrable at 0 for q <= 0")
        return 0.0
    top = 1.0
    bound = getattr(g, "support_bound", None)
    if bound is not None:
        top = min(1.0, (bound / x) ** q)
    # v = top * e^{-s}; chunks of dyadic panels toward 0 also absorb integrable
    # blow-ups of g at the origin (composed operators produce those)
    jumps = [math.log(top / (b / x) ** q) for b in getattr(g, "breakpoints", ()) if 0 < (b / x) ** q < top]

    def integrand(s):
        v = top * np.exp(-s)
        return g(x * v ** (1.0 / q)) * v

    total = 0.0
    chunk = 8 * _PANEL
    for k in range(120):
        a, b = k * chunk, (k + 1) * chunk
        pts = [j for j in jumps if a < j < b]
        piece, _ = integrate(integrand, a, b, rtol=rtol, atol=max(rtol * total, 1e-300), points=pts)
        total += piece
        if piece <= _PANEL_RTOL * total:
            return total / q
    raise DivergenceError(f"lower integral of {params} did not settle near 0")


def _upper_part(params: OperatorParams, g, x: float, rtol: float = _QUAD_RTOL) -> float:
    p, d = params.p, params.d
    bound = getattr(g, "support_bound", None)
    w_end = math.inf
    if bound is not None:
        if bound <= x:
            return 0.0
        w_end = math.log(bound / x)
    jumps = sorted(math.log(b / x) for b in getattr(g, "breakpoints", ()) if b > x)
    max_panels = int(min(400, 700.0 / (max(p, 0.5) * _PANEL)))

    def integrand(w):
        return np.exp(p * w) * (1 + w) ** d * g(x * np.exp(w))

    total = 0.0
    for k in range(max_panels):
        a, b = k * _PANEL, min((k + 1) * _PANEL, w_end)
        pts = [j for j in jumps if a < j < b]
        piece, _ = integrate(integrand, a, b, rtol=rtol, atol=max(rtol * total, 1e-300), points=pts)
        total += piece
        if b >= w_end:
            return total
        tail_left = float(g(np.array([x * math.exp(b)]))[0])
        if tail_left == 0.0 or (k >= 1 and piece <= _PANEL_RTOL * total):
            return total
    raise DivergenceError(
        f"upper integral of {params} did not settle after {max_panels} dyadic panels"
    )


def _as_tail(g) -> TailFunction:
    if isinstance(g, TailFunction):
        return g
    if callable(g):
        return AnalyticTail(g)
    raise TypeError("g must be a TailFunction or a vectorized callable")


def apply_T(params: OperatorParams, g, x, rtol: float = _QUAD_RTOL):
    """Evaluate T_{p,q,d}(g) at ``x`` (scalar or array of positive reals).

    ``rtol`` is the per-panel relative tolerance of the adaptive quadrature;
    step tails are integrated in closed form and ignore it.
    """
    g = _as_tail(g)
    scalar = np.ndim(x) == 0
    shape = np.shape(x)
    xs = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if np.any(xs <= 0):
        raise ValueError("the operator is evaluated at positive points only")
    if isinstance(g, StepTail):
        out = _apply_step(params, g, xs)
    elif not g.breakpoints and xs.size > 1:
        out = _apply_smooth_many(params, g, xs, rtol)
    else:
        out = np.empty_like(xs)
        for k, xv in enumerate(xs):
            val = 0.0
            if params.has_lower_part:
                val += _lower_part(params, g, float(xv), rtol)
            if params.has_upper_part:
                val += _upper_part(params, g, float(xv), rtol)
            out[k] = val
    return float(out[0]) if scalar else out.reshape(shape)


def _apply_smooth_many(params: OperatorParams, g: TailFunction, xs: np.ndarray, rtol: float = _QUAD_RTOL) -> np.ndarray:
    """All evaluation points at once on shared panels (g without jumps)."""
    out = np.zeros_like(xs)
    if params.has_lower_part:
        q = params.q
        if q <= 0:
            return np.array([apply_T(params, g, float(v), rtol) for v in xs])

        def lower(s):
            v = np.exp(-s)[:, None]
            return g(xs[None, :] * v ** (1.0 / q)) * v

        total = np.zeros_like(xs)
        chunk = 8 * _PANEL
        for k in range(120):
            piece = integrate_many(lower, k * chunk, (k + 1) * chunk, rtol=rtol, atol=np.maximum(rtol * total, 1e-300))
            total += piece
            if np.all(piece <= _PANEL_RTOL * total):
                break
        else:
            raise DivergenceError(f"lower integral of {params} did not settle near 0")
        out += total / q
    if params.has_upper_part:
        p, d = params.p, params.d

        def upper(w):
            return (np.exp(p * w) * (1 + w) ** d)[:, None] * g(xs[None, :] * np.exp(w)[:, None])

        total = np.zeros_like(xs)
        max_panels = int(min(400, 700.0 / (max(p, 0.5) * _PANEL)))
        for k in range(max_panels):
            a, b = k * _PANEL, (k + 1) * _PANEL
            piece = integrate_many(upper, a, b, rtol=rtol, atol=np.maximum(rtol * total, 1e-300))
            total += piece
            left = g(xs * math.exp(b))
            if np.all((left == 0.0) | ((piece <= _PANEL_RTOL * total) & (k >= 1))):
                break
        else:
            raise DivergenceError(f"upper integral of {params} did not settle after {max_panels} dyadic panels")
        out += total
    return out


def apply_composition(first: OperatorParams, second: OperatorParams, g, x):
    """T_first(T_second(g))(x) by nested quadrature."""
    g = _as_tail(g)
    inner = AnalyticTail(lambda v: apply_T(second, g, v), support_bound=g.support_bound)
    return apply_T(first, inner, x, rtol=1e-9)


def power_substitution_check(params: OperatorParams, samples, s: float, t: float) -> tuple[float, float]:
    """Both sides of the substitution identity for Y >= 0.

    Returns (T_{p,q,d}(tail of Y^s)(t^s), s * T_{sp,sq,d}(tail of Y)(t)).
    """
    if s <= 0:
        raise ValueError("s must be positive")
    tail = samples if isinstance(samples, TailFunction) else ecdf_tail(samples)
    lhs = apply_T(params, power_tail(tail, s), t ** s)
    rhs = s * apply_T(params.scaled(s), tail, t)
    return lhs, rhs


def power_substitution_bounds(params: OperatorParams, samples, s: float, t: float) -> tuple[float, float, float]:
    """(lower, lhs, upper) with lower <= lhs <= upper.

    The substitution u = v^s turns (1 + log u)^d into (1 + s log v)^d, so for
    d >= 1 the two sides of the identity differ by a factor between
    min(1, s)^d and max(1, s)^d; for d = 0 they coincide.
    """
    lhs, rhs = power_substitution_check(params, samples, s, t)
    return min(1.0, s) ** params.d * rhs, lhs, max(1.0, s) ** params.d * rhs


# ---------------------------------------------------------------------------
# composition constants


def I_value(q: float, d: int) -> float:
    """I_{q,d} = int_1^inf v^{-1-q} (1+log v)^d dv, by quadrature."""
    if q <= 0:
        raise DivergenceError("I_{q,d} needs q > 0")
    val, _ = sp_integrate.quad(lambda w: math.exp(-q * w) * (1 + w) ** d, 0.0, math.inf, epsabs=0, epsrel=1e-13, limit=200)
    return val


def I_closed_form(q: float, d: int) -> float:
    return sum(math.factorial(d) / math.factorial(d - k) / q ** (k + 1) for k in range(d + 1))


def _inv_gap(a, b) -> float:
    """1/|a-b| with the convention 0 when either side is infinite."""
    if not (is_finite(a) and is_finite(b)):
        return 0.0
    return 1.0 / abs(a - b)


@dataclass(frozen=True)
class CompositionConstant:
    constant: float
    certified: float
    merged: OperatorParams
    terms: dict

    def as_dict(self) -> dict:
        return {
            "constant": self.constant,
            "certified": self.certified,
            "merged": [str(self.merged.p), str(self.merged.q), self.merged.d],
            "terms": dict(self.terms),
        }


class EqualUpperExponents(ValueError):
    """The composition lemma excludes q1 == q2."""


def composition_constant(p1, q1, d1, p2, q2, d2) -> CompositionConstant:
    """Constant C with T1 o T2 <= C * T_merged.

    ``constant`` is the closed-form lemma value.  ``certified`` comes from
    splitting the product kernel into its four regions and bounding each,
    and is the one used downstream.
    """
    first, second = OperatorParams(p1, q1, d1), OperatorParams(p2, q2, d2)
    p1, q1, p2, q2 = first.p, first.q, second.p, second.q
    if not ext_lt(ext_max(p1, p2), ext_min(q1, q2)):
        raise ValueError("need max(p1, p2) < min(q1, q2)")
    if is_finite(q1) and is_finite(q2) and q1 == q2:
        raise EqualUpperExponents("q1 == q2 is excluded")
    same_p = p1 == p2
    p, q = ext_max(p1, p2), ext_min(q1, q2)
    merged = OperatorParams(p, q, first.d + second.d + int(same_p))
    dsum = first.d + second.d

    lemma_I = I_value(q - p, dsum) if is_finite(p) and is_finite(q) else 1.0
    upper_gap = 1.0 if same_p else _inv_gap(p1, p2)
    lemma = lemma_I * 2.0 ** dsum * (upper_gap + _inv_gap(q1, q2))

    cross_21 = I_value(q2 - p1, first.d) if is_finite(p1) and is_finite(q2) else 0.0
    cross_12 = I_value(q1 - p2, second.d) if is_finite(q1) and is_finite(p2) else 0.0
    both_p = 1.0 if same_p and is_finite(p1) else _inv_gap(p1, p2)
    regions = []
    if is_finite(q):
        regions.append(cross_21 + cross_12 + _inv_gap(q1, q2))
    if is_finite(p):
        regions.append(cross_21 + cross_12 + both_p)
    certified = max(regions)
    terms = {
        "I_merged": lemma_I if is_finite(p) and is_finite(q) else None,
        "I_cross_21": cross_21,
        "I_cross_12": cross_12,
        "gap_p": both_p,
        "gap_q": _inv_gap(q1, q2),
        "small_t_region": regions[0] if is_finite(q) else None,
        "large_t_region": regions[-1] if is_finite(p) else None,
    }
    return CompositionConstant(lemma, certified, merged, terms)


@dataclass
class CompositionReport:
    first: OperatorParams
    second: OperatorParams
    constant: CompositionConstant
    x: np.ndarray
    lhs: np.ndarray
    rhs_certified: np.ndarray
    rhs_lemma: np.ndarray
    tolerance: float

    @property
    def holds(self) -> bool:
        return bool(np.all(self.lhs <= self.rhs_certified * (1 + self.tolerance) + 1e-300))

    @property
    def holds_lemma(self) -> bool:
        return bool(np.all(self.lhs <= self.rhs_lemma * (1 + self.tolerance) + 1e-300))

    @property
    def worst_ratio(self) -> float:
        pos = self.rhs_certified > 0
        if not np.any(pos):
            return 0.0
        return float(np.max(self.lhs[pos] / self.rhs_certified[pos]))


def verify_composition(first: OperatorParams, second: OperatorParams, g, xs, tolerance: float = 1e-6) -> CompositionReport:
    const = composition_constant(first.p, first.q, first.d, second.p, second.q, second.d)
    xs = np.asarray(xs, dtype=float)
    lhs = np.asarray(apply_composition(first, second, g, xs), dtype=float)
    base = np.asarray(apply_T(const.merged, g, xs), dtype=float)
    return CompositionReport(first, second, const, xs, lhs, const.certified * base, const.constant * base, tolerance)


def product_kernel_ratio(first: OperatorParams, second: OperatorParams, t_grid) -> np.ndarray:
    """(k1 * k2)(t) / k_merged(t) on a grid: the sharp pointwise composition ratio."""
    const = composition_constant(first.p, first.q, first.d, second.p, second.q, second.d)
    out = []
    for t in np.asarray(t_grid, dtype=float):
        def f(w):
            u = np.exp(w)
            return first.kernel(u) * second.kernel(t / u)
        cuts = sorted({0.0, math.log(t)})
        val, _ = integrate(f, -60.0, 60.0, rtol=1e-10, atol=1e-300, points=cuts)
        out.append(val / float(const.merged.kernel(np.array([t]))[0]))
    return np.array(out)


# ---------------------------------------------------------------------------
# Orlicz norms


@dataclass(frozen=True)
class YoungExponents:
    """phi(t) = t^p (1 + |log t|)^q, or with log_+ when ``log_plus`` is set."""

    p: float
    q: float = 0.0
    log_plus: bool = False

    def __post_init__(self):
        if self.p < 1 or self.q < 0:
            raise ValueError("Young exponents need p >= 1 and q >= 0")
        grid = np.logspace(-8, 8, 4001)
        vals = self(grid)
        if np.any(np.diff(vals) < -1e-12 * vals[1:]):
            raise ValueError(f"phi_{{{self.p},{self.q}}} is not nondecreasing")

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        with np.errstate(divide="ignore"):
            logs = np.where(t > 0, np.log(np.where(t > 0, t, 1.0)), 0.0)
        logs = np.maximum(logs, 0.0) if self.log_plus else np.abs(logs)
        return np.where(t > 0, t ** self.p * (1 + logs) ** self.q, 0.0)


def orlicz_norm(samples, exps: YoungExponents, weights=None, rtol: float = 1e-10) -> float:
    """Luxemburg norm inf{lam > 0 : E phi(|Y|/lam) <= 1} by bisection."""
    y = np.abs(np.asarray(samples, dtype=float).ravel())
    if y.size == 0:
        raise ValueError("orlicz_norm needs data")
    if not np.all(np.isfinite(y)):
        raise ValueError("non-integrable input: non-finite values")
    w = np.full(y.size, 1.0 / y.size) if weights is None else np.asarray(weights, dtype=float).ravel()
    w = w / w.sum()
    top = float(np.max(y[w > 0])) if np.any(w > 0) else 0.0
    if top == 0.0:
        return 0.0

    # the norm is homogeneous, so bisect on data scaled to max 1; this keeps
    # lo * hi away from underflow for subnormal inputs
    scaled = y / top

    def excess(lam):
        return float(np.dot(w, exps(scaled / lam))) - 1.0

    hi, lo = 1.0, 0.5
    while excess(lo) <= 0:
        hi, lo = lo, lo / 2
        if lo < 1e-300:
            return 0.0
    while (hi - lo) > rtol * hi:
        mid = math.sqrt(lo * hi)
        if excess(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return top * hi


# ---------------------------------------------------------------------------
# Doob-type maximal tail bound

DOOB = OperatorParams(1, POS_INF, 0)


def doob_tail_rhs(tail: TailFunction, t):
    """4 * T_{1,inf,0}(tail)(t/4)."""
    return 4.0 * apply_T(DOOB, tail, np.asarray(t, dtype=float) / 4.0)


def convex_order_tail_rhs(tail: TailFunction, t):
    """T_{1,inf,0}(tail)(t/4) = int_1^inf tail(tv/4) dv."""
    return apply_T(DOOB, tail, np.asarray(t, dtype=float) / 4.0)


@dataclass
class TailCheck:
    """Empirical-vs-bound comparison on a grid of thresholds."""

    name: str
    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    band: np.ndarray
    trials: int = 0

    @property
    def passed(self) -> np.ndarray:
        return self.lhs <= self.rhs + self.band

    @property
    def all_pass(self) -> bool:
        return bool(np.all(self.passed))

    def rows(self) -> list[dict]:
        return [
            {"t": float(t), "lhs": float(a), "rhs": float(b), "band": float(c), "pass": bool(a <= b + c)}
            for t, a, b, c in zip(self.t, self.lhs, self.rhs, self.band)
        ]


@dataclass(frozen=True)
class SubmartingaleModel:
    """Nonnegative submartingale with an exactly known endpoint law."""

    name: str
    paths: Callable[[np.random.Generator, int], np.ndarray]
    endpoint_law: Callable[[int], tuple[np.ndarray, np.ndarray]]


def _walk_paths(rng, n):
    return np.abs(np.cumsum(rng.choice([-1.0, 1.0], size=n)))


def _walk_law(n):
    k = np.arange(n + 1)
    probs = np.array([math.comb(n, int(j)) for j in k], dtype=float) / 2.0 ** n
    return np.abs(2.0 * k - n), probs


SUBMARTINGALES = {
    "abs_walk": SubmartingaleModel("abs_walk", _walk_paths, _walk_law),
    "squared_walk": SubmartingaleModel(
        "squared_walk",
        lambda rng, n: _walk_paths(rng, n) ** 2,
        lambda n: (_walk_law(n)[0] ** 2, _walk_law(n)[1]),
    ),
    "deterministic": SubmartingaleModel(
        "deterministic",
        lambda rng, n: np.arange(1, n + 1, dtype=float) / n,
        lambda n: (np.array([1.0]), np.array([1.0])),
    ),
}


def default_t_grid(values, points: int = 20) -> np.ndarray:
    """Log-spaced thresholds across the bulk and upper tail of ``values``."""
    values = np.asarray(values, dtype=float)
    top = float(np.max(values)) if values.size else 1.0
    pos = values[values > 0]
    low = float(np.quantile(pos, 0.05)) if pos.size else top / 100
    low = max(low, top / 1000) if top > 0 else 1e-3
    top = max(top, low * 2)
    return np.geomspace(low, 1.2 * top, points)


def verify_doob(model: str | SubmartingaleModel, n: int, trials: int, seed: int = 0, t_grid=None, threads=None) -> TailCheck:
    """Empirical tail of max_{k<=n} Y_k against the Doob-type operator bound."""
    model = SUBMARTINGALES[model] if isinstance(model, str) else model
    maxima = map_trials(lambda k: float(np.max(model.paths(trial_rng(seed, k), n))), trials, threads)
    values, probs = model.endpoint_law(n)
    end_tail = StepTail(values, probs)
    t = default_t_grid(maxima) if t_grid is None else np.asarray(t_grid, dtype=float)
    lhs = ecdf_tail(maxima)(t)
    rhs = np.asarray(doob_tail_rhs(end_tail, t), dtype=float)
    band = np.full(t.shape, dkw_epsilon(trials))
    return TailCheck(f"doob:{model.name}", t, lhs, rhs, band, trials)


# ---------------------------------------------------------------------------
# conditional sums


def kappa_trace(q: float) -> list[tuple[str, float]]:
    """Step-by-step derivation of the conditional-sum constant kappa(q)."""
    if q <= 0:
        raise ValueError("kappa(q) needs q > 0")
    delta = 2.0 ** (-q - 1)
    dyadic = 2.0 ** q / (2.0 ** q - 1)
    moment = q + 1
    rescale = delta ** (-q)
    return [
        ("delta = 2^(-q-1)", delta),
        ("dyadic sum factor 2^q/(2^q-1) in sum_j 2^(-qj) 1{Z>2^-j} <= c*min(Z, Z^(q+1))/Z", dyadic),
        ("(q+1) from E[min(Z, Z^(q+1))] = (q+1) * T_{1,q+1,0}(tail Z)", moment),
        ("delta^(-q) from moving T_{1,q+1,0} at delta*t to T_{1,q,0} at t", rescale),
        ("kappa(q)", dyadic * moment * rescale),
    ]


def kappa_constant(q: float) -> float:
    return kappa_trace(q)[-1][1]


def conditional_tail_rhs(tail: TailFunction, t, q: float):
    """kappa(q) * T_{1,q,0}(tail of S)(t)."""
    return kappa_constant(q) * apply_T(OperatorParams(1, q, 0), tail, t)


def _iid_exponential(rng, n):
    y = rng.exponential(1.0, size=n)
    return y.sum(), float(n)


def _iid_uniform(rng, n):
    y = rng.uniform(0.0, 1.0, size=n)
    return y.sum(), 0.5 * n


def _modulated(rng, n):
    # Y_i = A_{i-1} E_i with A_{i-1} = 1 + 1{E_{i-1} > 1}, so E[Y_i | past] = A_{i-1}
    e = rng.exponential(1.0, size=n + 1)
    scale = 1.0 + (e[:-1] > 1.0)
    return float(np.sum(scale * e[1:])), float(np.sum(scale))


CONDITIONAL_MODELS = {"exponential": _iid_exponential, "uniform": _iid_uniform, "modulated": _modulated}


def verify_conditional_tail(model: str, n: int, trials: int, q: float = 2.0, seed: int = 0, t_grid=None, threads=None) -> TailCheck:
    """Tail of the conditional sum against kappa(q) T_{1,q,0}(tail of S)(t).

    Both sides are estimated from the same trials.  The band adds the DKW
    width of the left side and a bound on how far the operator moves under a
    uniform perturbation of the right-hand tail.
    """
    sampler = CONDITIONAL_MODELS[model]
    pairs = map_trials(lambda k: np.array(sampler(trial_rng(seed, k), n)), trials, threads)
    sums, cond = pairs[:, 0], pairs[:, 1]
    t = default_t_grid(cond) if t_grid is None else np.asarray(t_grid, dtype=float)
    eps = dkw_epsilon(trials)
    lhs = ecdf_tail(cond)(t)
    rhs = np.asarray(conditional_tail_rhs(ecdf_tail(sums), t, q), dtype=float)
    reach = np.maximum(np.max(sums) / t - 1.0, 0.0)
    band = eps + kappa_constant(q) * eps * (1.0 / q + reach)
    return TailCheck(f"conditional:{model}", t, lhs, rhs, band, trials)


def check_predictable_case(tail: TailFunction, t_grid, q: float = 2.0) -> TailCheck:
    """When every summand is predictable the two sums coincide: tail <= kappa T(tail)."""
    t = np.asarray(t_grid, dtype=float)
    lhs = tail(t)
    rhs = np.asarray(conditional_tail_rhs(tail, t, q), dtype=float)
    return TailCheck("conditional:predictable", t, lhs, rhs, np.zeros_like(t))
