"""Exact probability on finite product spaces.

Atoms are joint assignments of finitely supported innovations to a set of
coordinate labels. Sigma-fields are those generated by subsets of the
coordinates, so conditional expectations reduce to weighted averages over
the classes of atoms that agree on the generating coordinates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np
from scipy import sparse

from .lattice import LatticeIndex, Rectangle, as_index, leq, min_index

MAX_ATOMS = 2 ** 20

RADEMACHER = ((-1.0, 1.0), (0.5, 0.5))
THREE_POINT = ((-1.0, 0.0, 1.0), (1 / 3, 1 / 3, 1 / 3))


class DegenerateSpace(ValueError):
    """A conditioning class carries zero probability."""


class SpaceTooLarge(ValueError):
    pass


class IndependenceError(ValueError):
    """Supplied sigma-field groups are not independent."""


@dataclass(frozen=True)
class SigmaFieldSpec:
    """Sigma-field generated by the innovations at ``coords``."""

    coords: frozenset

    def __init__(self, coords: Iterable[Hashable] = ()):
        object.__setattr__(self, "coords", frozenset(coords))

    def __or__(self, other: "SigmaFieldSpec") -> "SigmaFieldSpec":
        return SigmaFieldSpec(self.coords | other.coords)

    def issubset(self, other: "SigmaFieldSpec") -> bool:
        return self.coords <= other.coords


class FiniteSpace:
    """Enumerated probability space over labelled coordinates.

    Parameters
    ----------
    labels : sequence of hashable
        One label per innovation coordinate.
    values : array (n_atoms, n_coords)
        Innovation value of each coordinate on each atom.
    probs : array (n_atoms,)
        Atom probabilities, summing to one.
    """

    def __init__(self, labels: Sequence[Hashable], values, probs):
        values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(labels):
            raise ValueError("values must have one column per label")
        if values.shape[0] != probs.shape[0]:
            raise ValueError("one probability per atom is required")
        if values.shape[0] > MAX_ATOMS:
            raise SpaceTooLarge(f"{values.shape[0]} atoms exceed the cap of {MAX_ATOMS}")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("atom probabilities must be nonnegative and sum to 1")
        if len(set(labels)) != len(labels):
            raise ValueError("coordinate labels must be distinct")
        if len(np.unique(values, axis=0)) != values.shape[0]:
            raise ValueError("atoms must be distinct")
        self.labels = tuple(labels)
        self.values = values
        self.probs = probs
        self._pos = {lab: k for k, lab in enumerate(self.labels)}
        self._partitions: dict[frozenset, tuple[np.ndarray, sparse.csr_matrix]] = {}

    @classmethod
    def product(cls, labels: Sequence[Hashable], support=RADEMACHER[0], weights=RADEMACHER[1]):
        """Independent coordinates sharing one finitely supported law."""
        support = np.asarray(support, dtype=float)
        weights = np.asarray(weights, dtype=float)
        n = len(labels)
        n_atoms = len(support) ** n
        if n_atoms > MAX_ATOMS:
            raise SpaceTooLarge(f"{n_atoms} atoms exceed the cap of {MAX_ATOMS}")
        grid = np.array(list(itertools.product(range(len(support)), repeat=n)), dtype=int)
        if n == 0:
            grid = np.zeros((1, 0), dtype=int)
        values = support[grid]
        probs = np.prod(weights[grid], axis=1) if n else np.ones(1)
        probs = probs / probs.sum()
        return cls(labels, values, probs)

    @property
    def n_atoms(self) -> int:
        return self.values.shape[0]

    def column(self, label) -> np.ndarray:
        return self.values[:, self._pos[label]]

    def expectation(self, y) -> np.ndarray:
        return np.tensordot(self.probs, np.asarray(y, dtype=float), axes=(0, 0))

    def check_coords(self, sigma: SigmaFieldSpec) -> None:
        missing = [c for c in sigma.coords if c not in self._pos]
        if missing:
            raise KeyError(f"coordinates outside the window: {missing[:5]}")

    def partition(self, sigma: SigmaFieldSpec):
        """Class id of every atom and the class-by-atom probability matrix."""
        key = sigma.coords
        cached = self._partitions.get(key)
        if cached is not None:
            return cached
        self.check_coords(sigma)
        cols = sorted(self._pos[c] for c in key)
        if cols:
            _, groups = np.unique(self.values[:, cols], axis=0, return_inverse=True)
            groups = np.asarray(groups).reshape(-1)
        else:
            groups = np.zeros(self.n_atoms, dtype=int)
        n_groups = int(groups.max()) + 1
        mass = sparse.csr_matrix(
            (self.probs, (groups, np.arange(self.n_atoms))), shape=(n_groups, self.n_atoms)
        )
        self._partitions[key] = (groups, mass)
        return groups, mass


def cond_expect(y, sigma: SigmaFieldSpec, space: FiniteSpace) -> np.ndarray:
    """E[y | sigma] as an atom-indexed array (columns of a 2-D ``y`` handled jointly)."""
    y = np.asarray(y, dtype=float)
    if y.shape[0] != space.n_atoms:
        raise ValueError("y must be defined on every atom")
    groups, mass = space.partition(sigma)
    den = np.asarray(mass.sum(axis=1)).reshape(-1)
    if np.any(den <= 0):
        raise DegenerateSpace("a conditioning class has zero probability")
    num = mass @ y
    if y.ndim == 1:
        return (num / den)[groups]
    return (num / den[:, None])[groups]


def is_measurable(y, sigma: SigmaFieldSpec, space: FiniteSpace, tol: float = 1e-12) -> bool:
    return float(np.max(np.abs(cond_expect(y, sigma, space) - np.asarray(y, dtype=float)), initial=0.0)) <= tol


@dataclass
class CheckReport:
    max_violation: float
    details: dict = field(default_factory=dict)

    def passed(self, tol: float) -> bool:
        return self.max_violation <= tol


Filtration = Callable[[LatticeIndex], SigmaFieldSpec]


def monomial_basis(space: FiniteSpace) -> np.ndarray | None:
    """Products of powers of the innovations, one column per exponent vector.

    On a full product space these span every atom function while keeping a
    sup-norm of order one, so violations are not diluted by tiny atoms.
    Returns None when the atoms do not form a full product grid.
    """
    levels = [len(np.unique(space.values[:, c])) for c in range(space.values.shape[1])]
    if int(np.prod(levels, dtype=float)) != space.n_atoms:
        return None
    basis = np.ones((space.n_atoms, 1))
    for c, k in enumerate(levels):
        powers = space.values[:, c][:, None] ** np.arange(k)
        basis = (basis[:, :, None] * powers[:, None, :]).reshape(space.n_atoms, -1)
    return basis


def default_basis(space: FiniteSpace, max_dense: int = 4096, n_random: int = 64, seed: int = 0):
    """A spanning family of test functions, or random ones for large spaces."""
    if space.n_atoms <= max_dense:
        basis = monomial_basis(space)
        return np.eye(space.n_atoms) if basis is None else basis
    rng = np.random.default_rng(seed)
    return rng.choice([-1.0, 1.0], size=(space.n_atoms, n_random))


def check_commuting(
    filtration: Filtration,
    indices: Sequence,
    space: FiniteSpace,
    basis=None,
) -> CheckReport:
    """Largest sup-norm gap in E[E[Y|F_i]|F_j] = E[Y|F_min(i,j)] and in monotonicity."""
    if basis is None:
        basis = default_basis(space)
    basis = np.asarray(basis, dtype=float)
    if basis.ndim == 1:
        basis = basis[:, None]
    indices = [as_index(i) for i in indices]
    projected = {i: cond_expect(basis, filtration(i), space) for i in indices}
    commuting = 0.0
    monotone = 0.0
    worst = None
    for i in indices:
        for j in indices:
            lhs = cond_expect(projected[i], filtration(j), space)
            rhs = cond_expect(basis, filtration(min_index(i, j)), space)
            gap = float(np.max(np.abs(lhs - rhs)))
            if gap > commuting:
                commuting, worst = gap, (i.coords, j.coords)
            if leq(i, j):
                # F_i inside F_j means F_j leaves F_i-measurable functions unchanged.
                monotone = max(monotone, float(np.max(np.abs(lhs - projected[i]))))
    return CheckReport(
        max(commuting, monotone),
        {"commuting": commuting, "monotone": monotone, "worst_pair": worst, "pairs": len(indices) ** 2},
    )


def check_independent(groups: Sequence[SigmaFieldSpec], space: FiniteSpace, tol: float = 1e-12) -> float:
    """Largest gap between the joint law of the groups and the product of marginals."""
    ids = []
    marginals = []
    for g in groups:
        labels, mass = space.partition(g)
        ids.append(labels)
        marginals.append(np.asarray(mass.sum(axis=1)).reshape(-1))
    joint = np.stack(ids, axis=1)
    cells, inverse = np.unique(joint, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    joint_mass = np.bincount(inverse, weights=space.probs, minlength=len(cells))
    product = np.ones(len(cells))
    for k, m in enumerate(marginals):
        product = product * m[cells[:, k]]
    gap = float(np.max(np.abs(joint_mass - product)))
    # combinations never observed carry product mass 1 - sum(product)
    gap = max(gap, abs(1.0 - float(product.sum())))
    return gap


def check_product_lemma(
    groups: Sequence[SigmaFieldSpec],
    events: Sequence,
    subfields: Sequence[SigmaFieldSpec],
    space: FiniteSpace,
    tol: float = 1e-12,
) -> CheckReport:
    """Sup gap in E[prod 1_{A_l} | join of G'_l] = prod E[1_{A_l} | G'_l].

    Raises
    ------
    IndependenceError
        If the groups are not independent on ``space``.
    """
    if not (len(groups) == len(events) == len(subfields)):
        raise ValueError("need one event and one sub-field per group")
    gap = check_independent(groups, space)
    if gap > tol:
        raise IndependenceError(f"groups are dependent (gap {gap:.3g})")
    indicators = [np.asarray(a, dtype=float) for a in events]
    for g, sub, ind in zip(groups, subfields, indicators):
        if not sub.issubset(g):
            raise ValueError("each sub-field must be contained in its group")
        if not is_measurable(ind, g, space):
            raise ValueError("each event must be measurable for its group")
    joined = SigmaFieldSpec()
    for sub in subfields:
        joined = joined | sub
    lhs = cond_expect(np.prod(indicators, axis=0), joined, space)
    rhs = np.ones(space.n_atoms)
    for sub, ind in zip(subfields, indicators):
        rhs = rhs * cond_expect(ind, sub, space)
    return CheckReport(float(np.max(np.abs(lhs - rhs))), {"independence_gap": gap})


# ---------------------------------------------------------------------------
# The two standard constructions and a deliberately broken one.


def window_space(shape: Sequence[int], law=RADEMACHER, lower: Sequence[int] | None = None) -> FiniteSpace:
    """I.i.d. innovations indexed by the lattice points of a window."""
    shape = tuple(shape)
    lower = tuple(lower) if lower is not None else (1,) * len(shape)
    upper = tuple(a + s - 1 for a, s in zip(lower, shape))
    labels = [i.coords for i in Rectangle(lower, upper)]
    return FiniteSpace.product(labels, *law)


def lower_cone_filtration(space: FiniteSpace) -> Filtration:
    """F_i generated by the innovations at u <= i inside the window."""
    labels = space.labels

    def sigma(i) -> SigmaFieldSpec:
        i = as_index(i)
        return SigmaFieldSpec(u for u in labels if leq(u, i))

    return sigma


def corrupted_filtration(space: FiniteSpace, axis: int = 0) -> Filtration:
    """Lower cone enlarged by the innovation one step ahead along ``axis``."""
    base = lower_cone_filtration(space)
    present = set(space.labels)

    def sigma(i) -> SigmaFieldSpec:
        i = as_index(i)
        ahead = list(i.coords)
        ahead[axis] += 1
        extra = {tuple(ahead)} & present
        return SigmaFieldSpec(base(i).coords | extra)

    return sigma


def product_space(lengths: Sequence[int], law=RADEMACHER) -> FiniteSpace:
    """Independent one-dimensional innovation sequences, one per axis."""
    labels = [(axis, k) for axis, n in enumerate(lengths) for k in range(1, n + 1)]
    return FiniteSpace.product(labels, *law)


def product_filtration(space: FiniteSpace) -> Filtration:
    """F_i = join over axes of sigma(eta^axis_k : k <= i_axis)."""
    labels = space.labels

    def sigma(i) -> SigmaFieldSpec:
        i = as_index(i)
        return SigmaFieldSpec((axis, k) for axis, k in labels if k <= i[axis])

    return sigma


def filtration_indices(shape: Sequence[int]) -> list[LatticeIndex]:
    """Indices 0..N per axis, so that shifted indices i - e_l are also covered."""
    return [LatticeIndex(c) for c in itertools.product(*[range(0, n + 1) for n in shape])]
