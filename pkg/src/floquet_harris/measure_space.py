"""Discrete weighted function and measure spaces on a uniform grid.

Functions are stored by their nodal values.  Measures are stored as nodal
masses with quadrature weights already folded in, so the duality pairing is a
plain dot product and the transpose identity <mu P, f> = <mu, P f> is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GridMismatchError


@dataclass(frozen=True)
class SpaceGrid:
    x_min: float
    x_max: float
    n_nodes: int

    def __post_init__(self):
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 2:
            raise ValueError(f"n_nodes must be an integer >= 2, got {self.n_nodes}")
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if not self.x_min < self.x_max:
            raise ValueError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")
        object.__setattr__(self, "n_nodes", int(self.n_nodes))
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_nodes - 1)

    @property
    def nodes(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n_nodes)
        x[-1] = self.x_max
        return x

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n_nodes, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    def index_range(self, lo: float, hi: float) -> tuple[int, int]:
        """Inclusive node-index range of the nodes lying in [lo, hi]."""
        x = self.nodes
        tol = 1e-9 * self.dx
        idx = np.flatnonzero((x >= lo - tol) & (x <= hi + tol))
        if idx.size == 0:
            raise ValueError(f"no grid node in [{lo}, {hi}]")
        return int(idx[0]), int(idx[-1])


def _as_vector(grid: SpaceGrid, data, name: str) -> np.ndarray:
    arr = np.array(data, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != grid.n_nodes:
        raise GridMismatchError(
            f"{name} has shape {arr.shape}, grid expects ({grid.n_nodes},)"
        )
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DiscreteFunction:
    grid: SpaceGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_vector(self.grid, self.values, "values"))

    @classmethod
    def from_callable(cls, grid: SpaceGrid, fn: Callable[[np.ndarray], np.ndarray]):
        return cls(grid, np.broadcast_to(fn(grid.nodes), (grid.n_nodes,)))

    @classmethod
    def constant(cls, grid: SpaceGrid, c: float = 1.0):
        return cls(grid, np.full(grid.n_nodes, float(c)))

    def __call__(self, x) -> np.ndarray:
        """Piecewise-linear interpolant, constant beyond the grid ends."""
        return np.interp(x, self.grid.nodes, self.values)

    def scaled(self, c: float) -> "DiscreteFunction":
        return DiscreteFunction(self.grid, c * self.values)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    grid: SpaceGrid
    masses: np.ndarray

    def __post_init__(self):
        m = _as_vector(self.grid, self.masses, "masses")
        if not np.all(np.isfinite(m)):
            raise ValueError("measure masses must be finite")
        object.__setattr__(self, "masses", m)

    @classmethod
    def dirac(cls, grid: SpaceGrid, j: int, mass: float = 1.0):
        m = np.zeros(grid.n_nodes)
        m[j] = mass
        return cls(grid, m)

    @classmethod
    def from_density(cls, grid: SpaceGrid, density) -> "DiscreteMeasure":
        """Trapezoid quadrature of a density (values or callable) into nodal masses."""
        vals = density(grid.nodes) if callable(density) else np.asarray(density, float)
        return cls(grid, grid.trapezoid_weights() * vals)

    @classmethod
    def lebesgue(cls, grid: SpaceGrid, lo: float | None = None, hi: float | None = None):
        """Lebesgue measure restricted to [lo, hi] (trapezoid over the nodes inside)."""
        lo = grid.x_min if lo is None else lo
        hi = grid.x_max if hi is None else hi
        i0, i1 = grid.index_range(lo, hi)
        m = np.zeros(grid.n_nodes)
        m[i0 : i1 + 1] = grid.dx
        m[i0] *= 0.5
        m[i1] *= 0.5
        if i0 == i1:
            m[i0] = grid.dx
        return cls(grid, m)

    def scaled(self, c: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.grid, c * self.masses)

    def total_mass(self) -> float:
        return float(np.sum(self.masses))


@dataclass(frozen=True, eq=False)
class WeightPair:
    """Lyapunov weights with 0 < psi <= V at every node."""

    V: DiscreteFunction
    psi: DiscreteFunction
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_same_grid(self.V.grid, self.psi.grid)
        if np.any(self.V.values <= 0):
            raise ValueError("V must be strictly positive")
        if np.any(self.psi.values <= 0):
            raise ValueError("psi must be strictly positive")
        if np.any(self.psi.values > self.V.values * (1 + 1e-12)):
            raise ValueError("psi must satisfy psi <= V")

    @property
    def grid(self) -> SpaceGrid:
        return self.V.grid


def _check_same_grid(g1: SpaceGrid, g2: SpaceGrid) -> None:
    if g1 != g2:
        raise GridMismatchError(f"grid mismatch: {g1} vs {g2}")


def pairing(mu: DiscreteMeasure, f: DiscreteFunction) -> float:
    _check_same_grid(mu.grid, f.grid)
    return float(np.dot(mu.masses, f.values))


def weighted_tv_norm(mu: DiscreteMeasure, V: DiscreteFunction) -> float:
    """Discrete ||mu||_{M(V)}; the sup over ||f||_{B(V)} <= 1 is attained at f = sign(mu) V."""
    _check_same_grid(mu.grid, V.grid)
    return float(np.dot(np.abs(mu.masses), V.values))


def weighted_sup_norm(f: DiscreteFunction, V: DiscreteFunction) -> float:
    _check_same_grid(f.grid, V.grid)
    return float(np.max(np.abs(f.values) / V.values))
