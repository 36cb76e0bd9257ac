"""Reducing finite product domains and boxes to the integer lattice.

A ``LatticeMap`` sends lattice levels to real coordinates, one strictly
increasing grid per coordinate. Finite grids map level ``j`` to their
``j``-th value; intervals ``[a, b]`` are sampled uniformly with ``k`` levels,
where ``k`` is chosen from the Lipschitz constant and the target accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ArgumentError, DomainError, UnsupportedDomainError
from .lattice import Lattice
from .oracle import CallableOracle, FunctionOracle


@dataclass(frozen=True)
class FiniteGrid:
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ArgumentError("a grid needs at least one value")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ArgumentError(f"grid values must be strictly increasing: {list(vals)}")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise UnsupportedDomainError("unbounded intervals are not supported")
        if not self.a < self.b:
            raise ArgumentError(f"degenerate interval [{self.a}, {self.b}]")

    @property
    def width(self) -> float:
        return self.b - self.a


@dataclass
class DomainSpec:
    """Per-coordinate domains; intervals also need ``lipschitz`` and ``eps_prime``.

    ``lipschitz`` is an l-infinity Lipschitz constant of the objective on the
    original box.
    """

    coords: list
    lipschitz: float | None = None
    eps_prime: float | None = None

    def __post_init__(self):
        if not self.coords:
            raise ArgumentError("a domain needs at least one coordinate")
        for c in self.coords:
            if not isinstance(c, (FiniteGrid, Interval)):
                raise ArgumentError(f"unknown coordinate domain {c!r}")
        if self.lipschitz is not None and self.lipschitz < 0:
            raise ArgumentError("the Lipschitz constant must be non-negative")
        if self.eps_prime is not None and not self.eps_prime > 0:
            raise ArgumentError("eps_prime must be positive")

    @property
    def has_intervals(self) -> bool:
        return any(isinstance(c, Interval) for c in self.coords)


@dataclass(frozen=True)
class LatticeMap:
    """Coordinatewise strictly increasing map from lattice levels to reals."""

    grids: tuple[np.ndarray, ...]

    @property
    def ks(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.grids)

    @property
    def lattice(self) -> Lattice:
        return Lattice(self.ks)

    def __call__(self, x) -> np.ndarray:
        x = self.lattice.check_point(x)
        return np.array([g[j] for g, j in zip(self.grids, x)])


def reduce_finite(spec: DomainSpec) -> tuple[LatticeMap, tuple[int, ...]]:
    """Map level ``j`` of coordinate ``i`` to the ``j``-th grid value."""
    if spec.has_intervals:
        raise ArgumentError("reduce_finite needs finite grids only; use discretize_interval")
    m = LatticeMap(tuple(np.array(c.values) for c in spec.coords))
    return m, m.ks


def discretization_levels(lipschitz: float | None, eps_prime: float | None, width: float = 1.0) -> int:
    """``k = ceil(L' / eps') + 1`` where ``L' = L * width`` is the constant after scaling to ``[0, 1]``."""
    if lipschitz is None or not math.isfinite(lipschitz):
        raise UnsupportedDomainError("discretizing an interval needs a finite Lipschitz constant")
    if eps_prime is None or not eps_prime > 0:
        raise ArgumentError("discretizing an interval needs eps_prime > 0")
    return int(math.ceil(lipschitz * width / eps_prime)) + 1


def discretize_interval(spec: DomainSpec) -> tuple[LatticeMap, tuple[int, ...]]:
    """Uniform grids on interval coordinates; finite grids pass through unchanged.

    All intervals share one ``k``, computed from the widest interval so the
    sandwich bound holds with ``eps_prime``. ``k = 1`` (constant objective)
    keeps only the left end point.
    """
    intervals = [c for c in spec.coords if isinstance(c, Interval)]
    k = None
    if intervals:
        k = discretization_levels(spec.lipschitz, spec.eps_prime, max(c.width for c in intervals))
    grids = []
    for c in spec.coords:
        if isinstance(c, FiniteGrid):
            grids.append(np.array(c.values))
        elif k == 1:
            grids.append(np.array([c.a]))
        else:
            grids.append(c.a + c.width * np.arange(k) / (k - 1))
    m = LatticeMap(tuple(grids))
    return m, m.ks


def reduce_domain(spec: DomainSpec) -> tuple[LatticeMap, tuple[int, ...]]:
    return discretize_interval(spec) if spec.has_intervals else reduce_finite(spec)


def map_back(x, m: LatticeMap) -> np.ndarray:
    return m(x)


def lift_objective(fn: Callable[[np.ndarray], float], m: LatticeMap, **kw) -> FunctionOracle:
    """The lattice oracle ``x -> fn(m(x))`` (normalized at the zero level)."""
    T = np.zeros((len(m.grids), max(m.ks)))
    for i, g in enumerate(m.grids):
        T[i, : len(g)] = g
    rows = np.arange(len(m.grids))
    return CallableOracle(lambda x: fn(T[rows, x]), m.lattice, **kw)


def grids_of(coords: Sequence) -> list[np.ndarray]:
    """Helper for decompositions: the value grids of a map or domain list."""
    if isinstance(coords, LatticeMap):
        return list(coords.grids)
    out = []
    for c in coords:
        if isinstance(c, FiniteGrid):
            out.append(np.array(c.values))
        else:
            raise DomainError("interval coordinates have no grid before discretization")
    return out
