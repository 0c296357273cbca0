"""Index arithmetic on the integer lattice Z^d."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True, order=False)
class LatticeIndex:
    coords: tuple[int, ...]

    def __init__(self, coords: Sequence[int]):
        values = tuple(int(c) for c in coords)
        if len(values) < 1:
            raise ValueError("a lattice index needs at least one coordinate")
        object.__setattr__(self, "coords", values)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __len__(self) -> int:
        return len(self.coords)

    def __getitem__(self, k: int) -> int:
        return self.coords[k]

    def __add__(self, other: "LatticeIndex | Sequence[int]") -> "LatticeIndex":
        other = as_index(other)
        _check_dims(self, other)
        return LatticeIndex([a + b for a, b in zip(self.coords, other.coords)])

    def __sub__(self, other: "LatticeIndex | Sequence[int]") -> "LatticeIndex":
        other = as_index(other)
        _check_dims(self, other)
        return LatticeIndex([a - b for a, b in zip(self.coords, other.coords)])

    def __repr__(self) -> str:
        return f"LatticeIndex{self.coords}"


def as_index(value: "LatticeIndex | Sequence[int]") -> LatticeIndex:
    if isinstance(value, LatticeIndex):
        return value
    return LatticeIndex(value)


def _check_dims(i: LatticeIndex, j: LatticeIndex) -> None:
    if i.dim != j.dim:
        raise DimensionMismatch(f"dimension mismatch: {i.dim} vs {j.dim}")


def unit_vector(d: int, axis: int) -> LatticeIndex:
    coords = [0] * d
    coords[axis] = 1
    return LatticeIndex(coords)


def ones(d: int) -> LatticeIndex:
    return LatticeIndex([1] * d)


def leq(i, j) -> bool:
    """Coordinatewise order: True iff every coordinate of ``i`` is at most that of ``j``."""
    i, j = as_index(i), as_index(j)
    _check_dims(i, j)
    return all(a <= b for a, b in zip(i.coords, j.coords))


def min_index(i, j) -> LatticeIndex:
    i, j = as_index(i), as_index(j)
    _check_dims(i, j)
    return LatticeIndex([min(a, b) for a, b in zip(i.coords, j.coords)])


def volume(n) -> int:
    """Product of the coordinates of a positive multi-index."""
    n = as_index(n)
    if any(c < 1 for c in n.coords):
        raise ValueError(f"volume needs positive coordinates, got {n.coords}")
    return math.prod(n.coords)


def dyadic_block(n) -> LatticeIndex:
    """The multi-index (2^{n_1}, ..., 2^{n_d}) for nonnegative exponents."""
    n = as_index(n)
    if any(c < 0 for c in n.coords):
        raise ValueError("dyadic exponents must be nonnegative")
    return LatticeIndex([2 ** c for c in n.coords])


def max_coordinate(n) -> int:
    return max(as_index(n).coords)


def count_compositions(k: int, d: int) -> int:
    """Number of vectors in N^d (zero allowed) whose coordinates sum to ``k``."""
    if k < 0 or d < 1:
        raise ValueError("need k >= 0 and d >= 1")
    return math.comb(k + d - 1, d - 1)


def count_compositions_brute(k: int, d: int) -> int:
    return sum(1 for v in itertools.product(range(k + 1), repeat=d) if sum(v) == k)


def compositions(k: int, d: int) -> Iterator[tuple[int, ...]]:
    """All vectors in N^d summing to ``k``, in lexicographic order."""
    if d == 1:
        yield (k,)
        return
    for first in range(k + 1):
        for rest in compositions(k - first, d - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class Rectangle:
    """Closed box ``lower <= i <= upper`` in the positive orthant."""

    lower: LatticeIndex
    upper: LatticeIndex

    def __init__(self, lower, upper=None):
        if upper is None:
            upper = as_index(lower)
            lower = ones(upper.dim)
        lower, upper = as_index(lower), as_index(upper)
        _check_dims(lower, upper)
        if not leq(lower, upper):
            raise ValueError(f"empty rectangle: {lower.coords} is not below {upper.coords}")
        if any(c < 1 for c in lower.coords):
            raise ValueError("rectangles must lie in the positive orthant")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lower.coords, self.upper.coords))

    @property
    def volume(self) -> int:
        return math.prod(self.shape)

    def __iter__(self) -> Iterator[LatticeIndex]:
        ranges = [range(a, b + 1) for a, b in zip(self.lower.coords, self.upper.coords)]
        for coords in itertools.product(*ranges):
            yield LatticeIndex(coords)

    def __contains__(self, item) -> bool:
        item = as_index(item)
        return leq(self.lower, item) and leq(item, self.upper)

    def offset(self, index) -> tuple[int, ...]:
        """Zero-based array position of ``index`` inside the rectangle."""
        index = as_index(index)
        return tuple(c - a for c, a in zip(index.coords, self.lower.coords))
