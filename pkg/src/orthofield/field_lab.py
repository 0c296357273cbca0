"""Generators of orthomartingale-difference fields and operations on their samples."""

from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .finite_prob import (
    FiniteSpace,
    SigmaFieldSpec,
    cond_expect,
    lower_cone_filtration,
    product_filtration,
    product_space,
    window_space,
)
from .lattice import LatticeIndex, Rectangle, as_index
from .parallel import map_trials, trial_rng


class UnsupportedCombination(ValueError):
    pass


class WindowTooLarge(ValueError):
    pass


# ---------------------------------------------------------------------------
# innovation laws


@dataclass(frozen=True)
class Law:
    name: str
    support: tuple[float, ...] | None = None
    probs: tuple[float, ...] | None = None
    sampler: Callable[[np.random.Generator, tuple], np.ndarray] | None = None

    @property
    def finite(self) -> bool:
        return self.support is not None

    @property
    def mean(self) -> float:
        if self.finite:
            return float(np.dot(self.support, self.probs))
        return 0.0

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.sampler is not None:
            return self.sampler(rng, tuple(shape))
        idx = rng.choice(len(self.support), size=shape, p=self.probs)
        return np.asarray(self.support, dtype=float)[idx]

    def as_pair(self):
        if not self.finite:
            raise UnsupportedCombination(f"law {self.name!r} is not finitely supported")
        return self.support, self.probs


def _rademacher(rng, shape):
    return 2.0 * rng.integers(0, 2, size=shape) - 1.0


LAWS = {
    "rademacher": Law("rademacher", (-1.0, 1.0), (0.5, 0.5), _rademacher),
    "gaussian": Law("gaussian", sampler=lambda rng, shape: rng.standard_normal(shape)),
    "three_point": Law("three_point", (-1.0, 0.0, 1.0), (1 / 3, 1 / 3, 1 / 3)),
    "two_point": Law("two_point", (-1.0, 2.0), (2 / 3, 1 / 3)),
    "shifted": Law("shifted", (-0.7, 1.3), (0.5, 0.5)),
}


def get_law(name: str) -> Law:
    try:
        return LAWS[name]
    except KeyError:
        raise UnsupportedCombination(f"unknown law {name!r}; choose from {sorted(LAWS)}") from None


# ---------------------------------------------------------------------------
# value spaces


@dataclass(frozen=True)
class NormedValueSpace:
    """Real line, Euclidean R^k, or L^p on a uniform midpoint grid of [0,1]^m."""

    kind: str = "real"
    width: int = 1
    exponent: float = 2.0
    grid_shape: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in {"real", "euclidean", "gridlp"}:
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.kind == "real" and self.width != 1:
            raise ValueError("the real line has width 1")
        if self.kind == "gridlp":
            if self.exponent < 1:
                raise ValueError("grid L^p needs p >= 1")
            if not self.grid_shape:
                object.__setattr__(self, "grid_shape", (self.width,))
            if math.prod(self.grid_shape) != self.width:
                raise ValueError("grid shape does not match the width")

    @classmethod
    def real(cls) -> "NormedValueSpace":
        return cls("real", 1)

    @classmethod
    def euclidean(cls, k: int) -> "NormedValueSpace":
        return cls("euclidean", int(k))

    @classmethod
    def grid_lp(cls, grid_shape: Sequence[int] | int, p: float) -> "NormedValueSpace":
        shape = (int(grid_shape),) if np.ndim(grid_shape) == 0 else tuple(int(g) for g in grid_shape)
        return cls("gridlp", math.prod(shape), float(p), shape)

    @property
    def smoothness(self) -> float:
        """Largest r <= 2 for which the space is r-smooth."""
        if self.kind == "gridlp":
            return min(self.exponent, 2.0)
        return 2.0

    def grid_points(self) -> np.ndarray:
        """Midpoints of the uniform grid, shape (width, len(grid_shape))."""
        axes = [(np.arange(n) + 0.5) / n for n in self.grid_shape]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def norm(self, values) -> np.ndarray:
        """Norm along the last axis."""
        v = np.asarray(values, dtype=float)
        if self.kind == "real":
            return np.abs(v[..., 0]) if v.ndim and v.shape[-1] == 1 else np.abs(v)
        if self.kind == "euclidean":
            return np.sqrt(np.sum(v * v, axis=-1))
        return np.mean(np.abs(v) ** self.exponent, axis=-1) ** (1.0 / self.exponent)

    def smoothness_constant(self, p: float) -> float:
        """An upper bound for C_{p,B}, the best constant in E||sum D||^p <= C sum E||D||^p.

        For p = 2 in Hilbert spaces the constant is 1.  For p < 2 the pointwise
        inequality |a+b|^p <= |a|^p + p|a|^{p-2}<a,b> + 2^{2-p}|b|^p gives
        2^{2-p}, on the grid via Fubini.  For L^p with p > 2 and exponent 2 the
        2-uniform smoothness constant is p - 1.
        """
        if not 1 < p <= self.smoothness + 1e-12:
            raise ValueError(f"the space is not {p}-smooth (smoothness {self.smoothness})")
        if self.kind in {"real", "euclidean"}:
            return 1.0 if p == 2 else 2.0 ** (2 - p)
        if self.exponent <= 2:
            return 1.0 if self.exponent == 2 else 2.0 ** (2 - p)
        return self.exponent - 1.0


REAL = NormedValueSpace.real()


# ---------------------------------------------------------------------------
# samples and serialization

MAGIC = b"OFS\x01"
HEADER = struct.Struct("<4sHH4H")


@dataclass
class FieldSample:
    rect: Rectangle
    values: np.ndarray
    space: NormedValueSpace = REAL

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape == self.rect.shape:
            values = values[..., None]
        if values.shape != self.rect.shape + (self.space.width,):
            raise ValueError(f"values of shape {values.shape} do not fit {self.rect.shape} x {self.space.width}")
        self.values = values

    def __len__(self) -> int:
        return self.rect.volume

    def at(self, index) -> np.ndarray:
        return self.values[self.rect.offset(as_index(index))]

    def to_bytes(self) -> bytes:
        """16-byte header (magic, d, width, four dims) then float64 little-endian, row-major."""
        d = self.rect.dim
        if d > 4:
            raise ValueError("the binary layout stores at most four dimensions")
        if any(c != 1 for c in self.rect.lower):
            raise ValueError("only rectangles anchored at 1 are serialized")
        dims = list(self.rect.shape) + [0] * (4 - d)
        header = HEADER.pack(MAGIC, d, self.space.width, *dims)
        return header + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes, space: NormedValueSpace = REAL) -> "FieldSample":
        magic, d, width, *dims = HEADER.unpack_from(blob)
        if magic != MAGIC:
            raise ValueError("not a field sample")
        if width != space.width:
            raise ValueError("stored width does not match the value space")
        shape = tuple(dims[:d])
        data = np.frombuffer(blob, dtype="<f8", offset=HEADER.size)
        return cls(Rectangle(shape), data.reshape(shape + (width,)).copy(), space)


# ---------------------------------------------------------------------------
# generator specifications


KINDS = ("iid", "modulated", "tensor")
MODULATIONS = (None, "sign", "scale")


@dataclass(frozen=True)
class GeneratorSpec:
    """How to build a field.

    ``iid``: X_i = eps_i.  ``modulated``: X_i = eps_i * m(neighbors) where the
    neighbors are eps_{i-delta}, delta in {0,1}^d minus 0, inside the window.
    ``tensor``: X_i = prod_l D^l_{i_l} for independent one-dimensional
    difference sequences D^l (modulated by their predecessor when requested).
    """

    kind: str = "iid"
    law: str = "rademacher"
    modulation: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedCombination(f"unknown generator kind {self.kind!r}")
        if self.modulation not in MODULATIONS:
            raise UnsupportedCombination(f"unknown modulation {self.modulation!r}")
        if self.kind == "modulated" and self.modulation is None:
            object.__setattr__(self, "modulation", "sign")
        if self.kind == "iid" and self.modulation is not None:
            raise UnsupportedCombination("i.i.d. fields carry no modulation")
        get_law(self.law)


def _modulate(summary: np.ndarray, how: str) -> np.ndarray:
    if how == "sign":
        return np.where(summary >= 0, 1.0, -1.0)
    return 1.0 + np.abs(summary)


def _neighbor_sum(eps: np.ndarray, d: int) -> np.ndarray:
    """Sum of eps over the immediate past neighbors, axes 1..d of ``eps``, zero outside."""
    total = np.zeros_like(eps)
    for delta in itertools.product((0, 1), repeat=d):
        if not any(delta):
            continue
        shifted = eps
        for axis, step in enumerate(delta):
            if step:
                ax = axis + 1
                pad = [(0, 0)] * eps.ndim
                pad[ax] = (1, 0)
                shifted = np.pad(shifted, pad)
                shifted = np.take(shifted, range(eps.shape[ax]), axis=ax)
        total = total + shifted
    return total


def field_from_innovations(spec: GeneratorSpec, eps: np.ndarray) -> np.ndarray:
    """Scalar field values from innovations of shape (batch, *shape)."""
    d = eps.ndim - 1
    if spec.kind == "iid":
        return eps
    return eps * _modulate(_neighbor_sum(eps, d), spec.modulation)


def tensor_from_factors(spec: GeneratorSpec, factors: Sequence[np.ndarray]) -> np.ndarray:
    """Product field from per-axis innovation arrays of shape (batch, N_l)."""
    out = None
    for k, eps in enumerate(factors):
        if spec.modulation is not None:
            prev = np.pad(eps, [(0, 0), (1, 0)])[:, :-1]
            eps = eps * _modulate(prev, spec.modulation)
        shape = [eps.shape[0]] + [1] * len(factors)
        shape[k + 1] = eps.shape[1]
        piece = eps.reshape(shape)
        out = piece if out is None else out * piece
    return out


def _profile(space: NormedValueSpace) -> np.ndarray:
    pts = space.grid_points()
    return 1.0 + 0.5 * np.cos(2 * np.pi * pts.sum(axis=1))


def draw_values(spec: GeneratorSpec, shape: Sequence[int], rng: np.random.Generator, space: NormedValueSpace = REAL) -> np.ndarray:
    """One realization as an array of shape (*shape, width)."""
    shape = tuple(shape)
    law = get_law(spec.law)
    if spec.kind == "tensor":
        if space.kind == "euclidean":
            raise UnsupportedCombination("tensor products are defined for scalar-valued factors")
        factors = [law.sample(rng, (1, n)) for n in shape]
        scalar = tensor_from_factors(spec, factors)[0]
    elif space.kind == "euclidean":
        eps = law.sample(rng, (space.width,) + shape)
        if spec.kind == "iid":
            return np.moveaxis(eps, 0, -1)
        factor = _modulate(_neighbor_sum(eps[:1], len(shape)), spec.modulation)[0]
        return np.moveaxis(eps * factor[None], 0, -1)
    else:
        scalar = field_from_innovations(spec, law.sample(rng, (1,) + shape))[0]
    if space.kind == "gridlp":
        return scalar[..., None] * _profile(space)
    return scalar[..., None]


def generate(spec: GeneratorSpec, rect, space: NormedValueSpace = REAL, trial: int = 0) -> FieldSample:
    rect = rect if isinstance(rect, Rectangle) else Rectangle(rect)
    values = draw_values(spec, rect.shape, trial_rng(spec.seed, trial), space)
    return FieldSample(rect, values, space)


def generate_batch(spec: GeneratorSpec, shape: Sequence[int], trials: int, space: NormedValueSpace = REAL, threads=None) -> np.ndarray:
    """Array (trials, *shape, width); trial k always uses stream (seed, k)."""
    return map_trials(lambda k: draw_values(spec, shape, trial_rng(spec.seed, k), space), trials, threads)


# ---------------------------------------------------------------------------
# exact representation on a finite space


@dataclass
class ExactField:
    """Field values as functions of the atoms of a finite space."""

    spec: GeneratorSpec
    shape: tuple[int, ...]
    space: FiniteSpace
    filtration: Callable
    values: np.ndarray  # (n_atoms, *shape)

    def at(self, index) -> np.ndarray:
        return self.values[(slice(None),) + tuple(c - 1 for c in as_index(index))]


def exact_field(spec: GeneratorSpec, shape: Sequence[int]) -> ExactField:
    shape = tuple(shape)
    law = get_law(spec.law)
    pair = law.as_pair()
    try:
        if spec.kind == "tensor":
            space = product_space(shape, pair)
            factors = [np.stack([space.column((axis, k)) for k in range(1, n + 1)], axis=1) for axis, n in enumerate(shape)]
            values = tensor_from_factors(spec, factors)
            filtration = product_filtration(space)
        else:
            space = window_space(shape, pair)
            eps = np.stack([space.column(lab) for lab in space.labels], axis=1).reshape((space.n_atoms,) + shape)
            values = field_from_innovations(spec, eps)
            filtration = lower_cone_filtration(space)
    except ValueError as exc:
        if "exceed" in str(exc):
            raise WindowTooLarge(str(exc)) from exc
        raise
    return ExactField(spec, shape, space, filtration, values)


@dataclass
class OrthoReport:
    mode: str
    max_violation: float
    worst: tuple | None = None
    details: dict = field(default_factory=dict)


def orthomartingale_violation(values: np.ndarray, space: FiniteSpace, filtration, shape) -> tuple[float, tuple | None]:
    """max over i and l of |E[X_i | F_{i-e_l}]|, together with adaptedness |E[X_i|F_i] - X_i|."""
    worst, where = 0.0, None
    d = len(shape)
    for i in Rectangle(shape):
        x = values[(slice(None),) + tuple(c - 1 for c in i)]
        gap = float(np.max(np.abs(cond_expect(x, filtration(i), space) - x)))
        if gap > worst:
            worst, where = gap, (i.coords, "adapted")
        for axis in range(d):
            prev = LatticeIndex([c - (k == axis) for k, c in enumerate(i.coords)])
            viol = float(np.max(np.abs(cond_expect(x, filtration(prev), space))))
            if viol > worst:
                worst, where = viol, (i.coords, axis)
    return worst, where


def check_orthomartingale(spec: GeneratorSpec, window, mode: str = "exact", trials: int = 100_000, threads=None) -> OrthoReport:
    """Exact enumeration, or studentized Monte Carlo means of X_i h for past-measurable h."""
    shape = window.shape if isinstance(window, Rectangle) else tuple(window)
    if mode == "exact":
        ex = exact_field(spec, shape)
        worst, where = orthomartingale_violation(ex.values, ex.space, ex.filtration, shape)
        return OrthoReport("exact", worst, where, {"atoms": ex.space.n_atoms})
    if mode != "mc":
        raise ValueError("mode must be 'exact' or 'mc'")
    return _mc_orthomartingale(spec, shape, trials, threads)


def _past_tests(eps: np.ndarray, prev: tuple[int, ...], spec: GeneratorSpec) -> list[np.ndarray]:
    """Functions of the innovations in the lower cone of ``prev``."""
    ones = np.ones(eps.shape[0])
    if any(c < 1 for c in prev):
        return [ones]
    cone = eps[(slice(None),) + tuple(slice(0, c) for c in prev)].reshape(eps.shape[0], -1)
    last = eps[(slice(None),) + tuple(c - 1 for c in prev)]
    return [ones, last, np.sign(cone.sum(axis=1)), cone.sum(axis=1) ** 2]


def _mc_orthomartingale(spec: GeneratorSpec, shape, trials: int, threads) -> OrthoReport:
    law = get_law(spec.law)
    d = len(shape)
    if spec.kind == "tensor":
        def draw(k):
            rng = trial_rng(spec.seed, k)
            factors = [law.sample(rng, (1, n)) for n in shape]
            return np.concatenate([f.ravel() for f in factors])
        flat = map_trials(draw, trials, threads)
        splits = np.cumsum(shape)[:-1]
        factors = np.split(flat, splits, axis=1)
        values = tensor_from_factors(spec, factors)
        # per-axis innovations: the past of i - e_l is generated by eps^l_{<i_l} and eps^m_{<=i_m}
        eps = None
    else:
        eps = map_trials(lambda k: law.sample(trial_rng(spec.seed, k), shape), trials, threads)
        values = field_from_innovations(spec, eps)
    worst, where = 0.0, None
    for i in Rectangle(shape):
        x = values[(slice(None),) + tuple(c - 1 for c in i)]
        for axis in range(d):
            prev = tuple(c - (k == axis) for k, c in enumerate(i.coords))
            if eps is None:
                tests = [np.ones(trials), factors[axis][:, prev[axis] - 1] if prev[axis] >= 1 else np.ones(trials)]
            else:
                tests = _past_tests(eps, prev, spec)
            for h in tests:
                prod = x * h
                sd = prod.std(ddof=1)
                if sd == 0:
                    z = 0.0 if abs(prod.mean()) < 1e-15 else math.inf
                else:
                    z = abs(prod.mean()) / (sd / math.sqrt(trials))
                if z > worst:
                    worst, where = z, (i.coords, axis)
    return OrthoReport("mc", worst, where, {"trials": trials, "threshold": 4.0})


# ---------------------------------------------------------------------------
# partial sums


@dataclass
class PartialSums:
    table: np.ndarray
    norms: np.ndarray
    maximum: float


def prefix_sums(values: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Rectangle partial sums S_n = sum_{1<=i<=n} X_i along the given axes."""
    out = np.asarray(values, dtype=float)
    for ax in axes:
        out = np.cumsum(out, axis=ax)
    return out


def max_partial_sum(sample: FieldSample) -> PartialSums:
    d = sample.rect.dim
    table = prefix_sums(sample.values, range(d))
    norms = sample.space.norm(table)
    return PartialSums(table, norms, float(norms.max()))


def batch_max_partial_sums(values: np.ndarray, space: NormedValueSpace = REAL) -> np.ndarray:
    """max_n ||S_n|| for each trial of an array (trials, *shape, width)."""
    d = values.ndim - 2
    norms = space.norm(prefix_sums(values, range(1, d + 1)))
    return norms.reshape(values.shape[0], -1).max(axis=1)


def power_sum(sample: FieldSample, p: float) -> float:
    if p < 1:
        raise ValueError("p must be at least 1")
    norms = sample.space.norm(sample.values)
    return float(np.sum(norms ** p) ** (1.0 / p))


def batch_power_sums(values: np.ndarray, p: float, space: NormedValueSpace = REAL) -> np.ndarray:
    norms = space.norm(values).reshape(values.shape[0], -1)
    return np.sum(norms ** p, axis=1) ** (1.0 / p)


# ---------------------------------------------------------------------------
# truncation


@dataclass
class Truncation:
    exact: ExactField
    threshold: float
    small: np.ndarray  # X'
    large: np.ndarray  # X''


def truncate_decompose(spec: GeneratorSpec, rect, threshold: float) -> Truncation:
    """X = X' + X'' with X' built from X 1{|X| <= threshold} by alternating past projections.

    X'_i = sum over delta in {0,1}^d of (-1)^{|delta|} E[X_i 1{|X_i| <= c} | F_{i-delta}],
    and X'' likewise with the complementary indicator.
    """
    shape = rect.shape if isinstance(rect, Rectangle) else tuple(rect)
    ex = exact_field(spec, shape)
    small = np.zeros_like(ex.values)
    large = np.zeros_like(ex.values)
    d = len(shape)
    for i in Rectangle(shape):
        pos = (slice(None),) + tuple(c - 1 for c in i)
        x = ex.values[pos]
        keep = np.abs(x) <= threshold
        low, high = np.where(keep, x, 0.0), np.where(keep, 0.0, x)
        for delta in itertools.product((0, 1), repeat=d):
            sign = (-1) ** sum(delta)
            sigma = ex.filtration(LatticeIndex([c - s for c, s in zip(i.coords, delta)]))
            small[pos] += sign * cond_expect(low, sigma, ex.space)
            large[pos] += sign * cond_expect(high, sigma, ex.space)
    return Truncation(ex, threshold, small, large)


# ---------------------------------------------------------------------------
# increasing convex order


@dataclass
class ConvexOrderReport:
    grid: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def max_violation(self) -> float:
        return float(np.max(self.lhs - self.rhs))

    def passed(self, tol: float = 1e-12) -> bool:
        return self.max_violation <= tol


def _law(x, weights):
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("convex-order inputs must be finite")
    w = np.full(x.size, 1.0 / x.size) if weights is None else np.asarray(weights, dtype=float).ravel()
    return x, w / w.sum()


def check_convex_order(x, y, grid=None, x_weights=None, y_weights=None) -> ConvexOrderReport:
    """Compare E(X - a)_+ with E(Y - a)_+ on a grid of hinge points a.

    The default grid holds every atom of both laws plus a point below all of
    them (which compares the means).
    """
    x, wx = _law(x, x_weights)
    y, wy = _law(y, y_weights)
    if grid is None:
        atoms = np.unique(np.concatenate([x, y]))
        grid = np.concatenate([[atoms.min() - 1.0], atoms])
    grid = np.asarray(grid, dtype=float)
    lhs = np.maximum(x[None, :] - grid[:, None], 0.0) @ wx
    rhs = np.maximum(y[None, :] - grid[:, None], 0.0) @ wy
    return ConvexOrderReport(grid, lhs, rhs)
