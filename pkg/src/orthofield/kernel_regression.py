"""Fixed-design kernel regression on {1..n}^d / n and its L^p deviation bounds."""

from __future__ import annotations

import csv
import math
import string
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import erfc

from .bounds import BoundParams, ConstantLedger, corollary_constant, rescale_factor
from .field_lab import GeneratorSpec, NormedValueSpace, UnsupportedCombination, generate_batch, get_law
from .parallel import dkw_epsilon
from .tail_calculus import AnalyticTail, OperatorParams, StepTail, TailCheck, apply_T, ecdf_tail


class VanishingDenominator(ValueError):
    """No design point falls inside the kernel window of some evaluation point."""


class InadmissibleBandwidth(ValueError):
    pass


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_EDGE = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """Product kernel k(u_1)...k(u_d) on [-1,1]^d.

    ``box`` uses k = 1/2.  ``plateau`` uses k(u) = 1/2 + slope (1/2 - |u|), a
    tent-on-a-plateau profile with integral 1 that stays in
    [(1 - slope)/2, (1 + slope)/2] and is Lipschitz with constant ``slope``.
    """

    profile: str = "box"
    slope: float = 0.0

    def __post_init__(self):
        if self.profile not in ("box", "plateau"):
            raise ValueError(f"unknown kernel profile {self.profile!r}")
        if self.profile == "box" and self.slope != 0:
            raise ValueError("the box kernel has no slope")
        if not 0 <= self.slope < 1:
            raise ValueError("slope must lie in [0, 1) so the kernel stays bounded below")

    @classmethod
    def box(cls) -> "KernelSpec":
        return cls("box")

    @classmethod
    def plateau(cls, slope: float = 0.5) -> "KernelSpec":
        return cls("plateau", slope)

    def profile_1d(self, u) -> np.ndarray:
        u = np.abs(np.asarray(u, dtype=float))
        inside = u <= 1 + _EDGE
        return np.where(inside, 0.5 + self.slope * (0.5 - np.minimum(u, 1.0)), 0.0)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.prod(self.profile_1d(x), axis=-1)

    def lower(self, d: int) -> float:
        return ((1 - self.slope) / 2) ** d

    def upper(self, d: int) -> float:
        return ((1 + self.slope) / 2) ** d

    def lipschitz(self, d: int) -> float:
        """Sup-norm Lipschitz constant of the product kernel."""
        return d * self.slope * ((1 + self.slope) / 2) ** (d - 1)

    def integral(self, d: int) -> float:
        pieces = [(-1.0, 0.0), (0.0, 1.0)]
        one = sum(0.5 * (b - a) * float(self.profile_1d(0.5 * (a + b) + 0.5 * (b - a) * _GL_X) @ _GL_W) for a, b in pieces)
        return one ** d


@dataclass
class RegressionConfig:
    n: int
    d: int
    bandwidth: float
    g: Callable[[np.ndarray], np.ndarray] = field(default=lambda x: np.zeros(x.shape[:-1]))
    noise: GeneratorSpec = field(default_factory=lambda: GeneratorSpec("iid"))
    p: float = 2.0
    q: float | None = None
    kernel: KernelSpec = field(default_factory=KernelSpec.box)
    gamma: float | None = None

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if self.n * self.bandwidth < 1 - 1e-12:
            raise ValueError("need n h_n >= 1")

    @classmethod
    def power_law(cls, n: int, d: int, gamma: float, **kw) -> "RegressionConfig":
        return cls(n=n, d=d, bandwidth=n ** (-gamma), gamma=gamma, **kw)

    @property
    def p_prime(self) -> float:
        return min(self.p, 2.0)

    @property
    def q_value(self) -> float:
        return self.q if self.q is not None else self.p_prime + 1

    @property
    def nh(self) -> float:
        return self.n * self.bandwidth

    def bandwidth_exponent(self) -> float:
        if self.gamma is not None:
            return self.gamma
        return -math.log(self.bandwidth) / math.log(self.n) if self.n > 1 else 0.0

    def admissible_range(self) -> tuple[float, float]:
        """Open interval of power-law exponents for which the p > 2 bound can vanish."""
        low = 1 / (self.d + 1)
        high = 1 - (self.p - 2) / (self.p * (self.p - 1)) if self.p > 2 else 1.0
        return low, high

    def design(self) -> np.ndarray:
        return np.arange(1, self.n + 1) / self.n


def midpoint_grid(n: int) -> np.ndarray:
    """The 2n-per-side midpoint rule on [0, 1]."""
    return (np.arange(2 * n) + 0.5) / (2 * n)


def weight_matrix(config: RegressionConfig, points) -> np.ndarray:
    """One-dimensional weights W[k, i] = k((x_k - i/n)/h) / sum_j k((x_k - j/n)/h)."""
    points = np.asarray(points, dtype=float).reshape(-1)
    raw = config.kernel.profile_1d((points[:, None] - config.design()[None, :]) / config.bandwidth)
    denom = raw.sum(axis=1)
    bad = np.flatnonzero(denom <= 0)
    if bad.size:
        raise VanishingDenominator(f"kernel weights vanish at x = {points[bad[0]]:g}")
    return raw / denom[:, None]


def _apply_axes(weights: np.ndarray, data: np.ndarray, d: int) -> np.ndarray:
    """Contract the last d axes of ``data`` (each of length n) with ``weights`` (m, n)."""
    out = data
    for axis in range(d):
        ax = out.ndim - d + axis
        out = np.moveaxis(np.tensordot(out, weights, axes=([ax], [1])), -1, ax)
    return out


def _contract_points(per_axis: list[np.ndarray], data: np.ndarray) -> np.ndarray:
    d = len(per_axis)
    letters = string.ascii_lowercase[1 : d + 1]
    spec = ",".join(f"a{c}" for c in letters) + f",...{letters}->...a"
    return np.einsum(spec, *per_axis, data)


def estimate(config: RegressionConfig, data, points=None) -> np.ndarray:
    """g_n at evaluation points.

    ``data`` holds Y over the design with shape (..., n, ..., n).  Without
    ``points`` the result lives on the midpoint grid (2n per side); otherwise
    ``points`` is an (m, d) array (or (m,) when d = 1) and the result has a
    trailing axis of length m.
    """
    data = np.asarray(data, dtype=float)
    if points is None:
        return _apply_axes(weight_matrix(config, midpoint_grid(config.n)), data, config.d)
    pts = np.asarray(points, dtype=float).reshape(-1, config.d)
    per_axis = [weight_matrix(config, pts[:, l]) for l in range(config.d)]
    return _contract_points(per_axis, data)


def regression_values(config: RegressionConfig) -> np.ndarray:
    axes = np.meshgrid(*([config.design()] * config.d), indexing="ij")
    return np.asarray(config.g(np.stack(axes, axis=-1)), dtype=float)


def bias_profile(config: RegressionConfig, points=None) -> float:
    """sup |E g_n(x) - g(x)| over the evaluation points, computed from the weights."""
    expected = estimate(config, regression_values(config), points)
    if points is None:
        grid = midpoint_grid(config.n)
        mesh = np.stack(np.meshgrid(*([grid] * config.d), indexing="ij"), axis=-1)
    else:
        mesh = np.asarray(points, dtype=float).reshape(-1, config.d)
    truth = np.asarray(config.g(mesh), dtype=float)
    return float(np.max(np.abs(expected - truth)))


# ---------------------------------------------------------------------------
# alpha coefficients


def _breakpoints(config: RegressionConfig) -> np.ndarray:
    centers = config.design()
    cuts = [centers - config.bandwidth, centers + config.bandwidth]
    if config.kernel.profile == "plateau":
        cuts.append(centers)
    cuts = np.concatenate(cuts + [np.array([0.0, 1.0])])
    return np.unique(np.clip(cuts, 0.0, 1.0))


def weight_power_integrals(config: RegressionConfig, method: str = "exact") -> np.ndarray:
    """beta_i = integral over [0,1] of w_i(x)^p for the one-dimensional weights.

    ``exact`` integrates piecewise (weights are smooth between kernel
    breakpoints) with 16-point Gauss-Legendre; ``grid`` uses the midpoint rule
    that also defines the L^p norm of the estimator.
    """
    p = config.p
    if method == "grid":
        w = weight_matrix(config, midpoint_grid(config.n))
        return np.mean(w ** p, axis=0)
    if method != "exact":
        raise ValueError("method must be 'exact' or 'grid'")
    cuts = _breakpoints(config)
    a, b = cuts[:-1], cuts[1:]
    keep = b - a > 1e-15
    a, b = a[keep], b[keep]
    nodes = (0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * _GL_X[None, :]
    weights = (0.5 * (b - a))[:, None] * _GL_W[None, :]
    w = weight_matrix(config, nodes.ravel())
    return weights.ravel() @ (w ** p)


@dataclass
class AlphaReport:
    alpha: np.ndarray
    A_p: float
    scaling: float
    kappa: float
    frozen_kappa: float | None
    method: str

    @property
    def bound_holds(self) -> bool:
        ref = self.frozen_kappa if self.frozen_kappa is not None else self.kappa
        return self.A_p <= ref * self.scaling * (1 + 1e-12)


def alpha_scaling(config: RegressionConfig) -> float:
    """(n h)^{d(1-p)}, times n^{d(p-2)/p} when p > 2."""
    base = config.nh ** (config.d * (1 - config.p))
    if config.p > 2:
        base *= config.n ** (config.d * (config.p - 2) / config.p)
    return base


def alpha_coefficients(config: RegressionConfig, method: str = "exact", frozen_kappa: float | None = None) -> AlphaReport:
    """alpha_{i,p} = (prod_l beta_{i_l})^{p'/p} and A_p = sum alpha.

    The kappa of the report is A_p divided by the theoretical scaling; pass the
    value fitted on a reference configuration as ``frozen_kappa`` to check the
    scaling law on other configurations.
    """
    beta = weight_power_integrals(config, method)
    one_dim = beta ** (config.p_prime / config.p)
    alpha = one_dim
    for _ in range(config.d - 1):
        alpha = np.multiply.outer(alpha, one_dim)
    A_p = float(one_dim.sum() ** config.d)
    scaling = alpha_scaling(config)
    return AlphaReport(alpha, A_p, scaling, A_p / scaling, frozen_kappa, method)


# ---------------------------------------------------------------------------
# deviation bound


def lp_norms(config: RegressionConfig, fields: np.ndarray) -> np.ndarray:
    """||g_n - E g_n|| in L^p([0,1]^d) by the midpoint rule, for each trial in ``fields``."""
    values = estimate(config, fields)
    axes = tuple(range(values.ndim - config.d, values.ndim))
    return np.mean(np.abs(values) ** config.p, axis=axes) ** (1 / config.p)


def abs_noise_tail(spec: GeneratorSpec):
    """Tail of |X_1| for the identically distributed noise generators."""
    law = get_law(spec.law)
    if spec.kind == "tensor":
        if spec.law == "rademacher" and spec.modulation in (None, "sign"):
            return StepTail([1.0])
        raise UnsupportedCombination("|X_1| has no closed form for this tensor field")
    if spec.modulation == "scale":
        raise UnsupportedCombination("scale-modulated noise is not identically distributed")
    if law.finite:
        support, probs = law.as_pair()
        return StepTail(np.abs(support), probs)
    if spec.law == "gaussian":
        return AnalyticTail(lambda v: erfc(np.asarray(v) / math.sqrt(2)))
    raise UnsupportedCombination(f"no tail for law {spec.law!r}")


@dataclass
class RegressionReport(TailCheck):
    kappa: float = 0.0
    argument_scale: float = 0.0
    A_p: float = 0.0
    resolution: int = 0


def regression_constant(config: RegressionConfig, kappa_alpha: float, ledger: ConstantLedger | None = None) -> float:
    """kappa_{p,q,d}: the dominated-form constant at p' times the rescaling by kappa_alpha^{-1/p'}."""
    ledger = ledger if ledger is not None else ConstantLedger()
    pp = config.p_prime
    c_b = NormedValueSpace.grid_lp(2 * config.n, config.p).smoothness_constant(pp)
    params = BoundParams(pp, config.q_value, config.d, c_b)
    f_cor = corollary_constant(params, ledger)
    factor = rescale_factor(kappa_alpha ** (-1 / pp), config.q_value, config.d)
    value = f_cor * factor
    ledger.record(
        f"kappa_regression[n={config.n},d={config.d},p={config.p:g}]", value,
        "f_cor(p', q, d, C_{p',L^p}) R(kappa_A^{-1/p'})", f_cor=f_cor, kappa_A=kappa_alpha, R=factor,
    )
    return value


def check_admissible(config: RegressionConfig) -> None:
    if config.p <= 2:
        return
    low, high = config.admissible_range()
    gamma = config.bandwidth_exponent()
    if not low < gamma < high:
        raise InadmissibleBandwidth(f"bandwidth exponent {gamma:.4g} outside ({low:.4g}, {high:.4g}) for p = {config.p:g}")


def regression_deviation_check(
    config: RegressionConfig,
    trials: int = 2000,
    t_grid=None,
    frozen_kappa: float | None = None,
    threads=None,
    ledger: ConstantLedger | None = None,
) -> RegressionReport:
    """Tail of ||g_n - E g_n||_{L^p} against the regression bound, with a 99% DKW band.

    The bound is kappa_{p,q,d} T_{p',q,d}(tail of |X_1|)(t s) with the
    scaling s = (n h)^{d(1-1/p)} for p <= 2 and (n h)^{d(p-1)/2} n^{d(2-p)/(2p)}
    for p > 2.  A_p is taken on the same midpoint grid as the norm, so the
    dominated-form bound applies to the discretized L^p space exactly.
    """
    check_admissible(config)
    shape = (config.n,) * config.d
    fields = generate_batch(config.noise, shape, trials, threads=threads)[..., 0]
    norms = lp_norms(config, fields)
    alpha = alpha_coefficients(config, "grid", frozen_kappa)
    kappa_a = frozen_kappa if frozen_kappa is not None else alpha.kappa
    kappa = regression_constant(config, kappa_a, ledger)
    scale = alpha.scaling ** (-1 / config.p_prime)
    t = np.asarray(t_grid, dtype=float) if t_grid is not None else _t_grid(norms)
    tail = abs_noise_tail(config.noise)
    rhs = kappa * np.asarray(apply_T(OperatorParams(config.p_prime, config.q_value, config.d), tail, t * scale), dtype=float)
    lhs = ecdf_tail(norms)(t)
    band = np.full(t.shape, dkw_epsilon(trials))
    name = f"regression:p={config.p:g}:n={config.n}:d={config.d}"
    return RegressionReport(name, t, lhs, rhs, band, trials, kappa, scale, alpha.A_p, 2 * config.n)


def _t_grid(norms: np.ndarray, points: int = 20) -> np.ndarray:
    top = float(np.max(norms)) if np.max(norms) > 0 else 1.0
    return np.linspace(top / points, top * 1.05, points)


# ---------------------------------------------------------------------------
# CSV interface


def read_observations(path, d: int | None = None) -> tuple[int, np.ndarray]:
    """Read columns i_1..i_d, y; returns (n, Y array of shape (n,)*d)."""
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    header, body = rows[0], [r for r in rows[1:] if r]
    dim = len(header) - 1
    if d is not None and d != dim:
        raise ValueError(f"expected {d} index columns, found {dim}")
    idx = np.array([[int(v) for v in r[:dim]] for r in body])
    y = np.array([float(r[dim]) for r in body])
    n = int(idx.max())
    if idx.min() < 1 or len(body) != n ** dim:
        raise ValueError("observations must cover {1..n}^d exactly once")
    out = np.full((n,) * dim, np.nan)
    out[tuple((idx - 1).T)] = y
    if np.isnan(out).any():
        raise ValueError("duplicate design points in observations")
    return n, out


def write_estimates(path, config: RegressionConfig, values: np.ndarray) -> None:
    """Estimates on the midpoint grid; ``path`` may also be an open text stream."""
    grid = midpoint_grid(config.n)
    mesh = np.stack(np.meshgrid(*([grid] * config.d), indexing="ij"), axis=-1).reshape(-1, config.d)
    if hasattr(path, "write"):
        _write_rows(path, config, mesh, values)
        return
    with open(path, "w", newline="") as handle:
        _write_rows(handle, config, mesh, values)


def _write_rows(handle, config, mesh, values) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow([f"x{l + 1}" for l in range(config.d)] + ["g_n"])
    for point, value in zip(mesh, np.asarray(values).reshape(-1)):
        writer.writerow([repr(float(c)) for c in point] + [repr(float(value))])
