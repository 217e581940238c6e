"""Discrete propagators M_{s,t}: assembly by explicit dual stepping, composition, actions.

A model plugged into :func:`assemble` must provide

* ``grid``: the :class:`SpaceGrid` it lives on,
* ``period``: the coefficient period (used to reduce step times modulo the period),
* ``is_autonomous``: true when the generator does not depend on time,
* ``max_stable_dt()``: the largest explicit step that keeps ``I + dt L`` entrywise
  nonnegative (the model's CFL bound),
* ``generator_apply_array(F, t)``: the dual generator applied to each column of ``F``.

The dual evolution runs backward in the initial time, so a step over
``[tau - dt, tau]`` maps ``f`` to ``f + dt L_tau f`` (Euler) or to the
two-stage Heun average.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CFLViolationError, GridMismatchError, NumericalFailure, TimeOrderError
from .measure_space import DiscreteFunction, DiscreteMeasure, SpaceGrid

CLAMP_THRESHOLD = 1e-12
_TIME_TOL = 1e-12


class Method(str, enum.Enum):
    EULER = "euler"
    HEUN = "heun"


@dataclass(frozen=True)
class StepScheme:
    dt_max: float = 0.01
    method: Method = Method.EULER
    cfl_safety: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not self.dt_max > 0:
            raise ValueError(f"dt_max must be > 0, got {self.dt_max}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")

    @property
    def order(self) -> int:
        return 1 if self.method is Method.EULER else 2

    def step_count(self, model, span: float) -> int:
        """Number of uniform steps for an interval of length ``span``; depends on the span only."""
        if span < 0:
            raise TimeOrderError(f"negative time span {span}")
        if span == 0:
            return 0
        dt_cap = min(self.dt_max, self.cfl_safety * model.max_stable_dt())
        return max(1, math.ceil(span / dt_cap - 1e-9))


@dataclass(frozen=True, eq=False)
class Propagator:
    grid: SpaceGrid
    s: float
    t: float
    matrix: np.ndarray
    clamp_count: int = 0
    n_steps: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.t < self.s - _TIME_TOL:
            raise TimeOrderError(f"propagator needs t >= s, got s={self.s}, t={self.t}")
        m = np.array(self.matrix, dtype=float)
        n = self.grid.n_nodes
        if m.shape != (n, n):
            raise GridMismatchError(f"matrix shape {m.shape} does not match grid ({n}, {n})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, grid: SpaceGrid, s: float) -> "Propagator":
        return cls(grid, s, s, np.eye(grid.n_nodes))

    def scaled(self, c: float) -> "Propagator":
        return Propagator(self.grid, self.s, self.t, c * self.matrix, self.clamp_count, self.n_steps)

    def to_csv(self, path) -> Path:
        """Row-major dump: a header line ``n,s,t``, its values, then one matrix row per line."""
        path = Path(path)
        n = self.grid.n_nodes
        with path.open("w") as fh:
            fh.write("n,s,t\n")
            fh.write(f"{n},{self.s:.15g},{self.t:.15g}\n")
            np.savetxt(fh, self.matrix, fmt="%.15g", delimiter=",")
        return path

    @classmethod
    def from_csv(cls, path, grid: SpaceGrid) -> "Propagator":
        with Path(path).open() as fh:
            header = fh.readline().strip()
            if header != "n,s,t":
                raise ValueError(f"unexpected header {header!r}")
            n, s, t = fh.readline().strip().split(",")
            matrix = np.loadtxt(fh, delimiter=",", ndmin=2)
        if int(n) != grid.n_nodes:
            raise GridMismatchError(f"dump has n={n}, grid has {grid.n_nodes}")
        return cls(grid, float(s), float(t), matrix)


def _check_grid(g1: SpaceGrid, g2: SpaceGrid) -> None:
    if g1 != g2:
        raise GridMismatchError(f"grid mismatch: {g1} vs {g2}")


def apply_dual(P: Propagator, f: DiscreteFunction) -> DiscreteFunction:
    _check_grid(P.grid, f.grid)
    return DiscreteFunction(P.grid, P.matrix @ f.values)


def push_forward(mu: DiscreteMeasure, P: Propagator) -> DiscreteMeasure:
    _check_grid(P.grid, mu.grid)
    return DiscreteMeasure(P.grid, mu.masses @ P.matrix)


def compose(P1: Propagator, P2: Propagator) -> Propagator:
    """M_{s,u} M_{u,t} = M_{s,t}; the dual action applies P2 first."""
    _check_grid(P1.grid, P2.grid)
    if not math.isclose(P1.t, P2.s, rel_tol=0.0, abs_tol=_TIME_TOL * max(1.0, abs(P1.t))):
        raise TimeOrderError(f"cannot chain [{P1.s}, {P1.t}] with [{P2.s}, {P2.t}]")
    return Propagator(
        P1.grid,
        P1.s,
        P2.t,
        P1.matrix @ P2.matrix,
        P1.clamp_count + P2.clamp_count,
        P1.n_steps + P2.n_steps,
    )


def explicit_step(generator, F: np.ndarray, tau: float, dt: float, method: Method) -> np.ndarray:
    """One backward dual step over [tau - dt, tau] for ``generator(F, t)``."""
    method = Method(method)
    if dt == 0:
        return np.array(F, dtype=float, copy=True)
    stage = F + dt * generator(F, tau)
    if method is Method.EULER:
        return stage
    return 0.5 * F + 0.5 * (stage + dt * generator(stage, tau - dt))


def check_step_size(model, dt: float) -> None:
    bound = model.max_stable_dt()
    if dt < 0:
        raise TimeOrderError(f"negative step {dt}")
    if dt > bound * (1 + 1e-12):
        raise CFLViolationError(f"step {dt:.6g} exceeds the stability bound {bound:.6g}")


def _step_times(model, s: float, dt: float, n_steps: int) -> np.ndarray:
    """Upper endpoints of the steps, offset from the reduced start time so shifts by a period repeat exactly."""
    period = getattr(model, "period", None)
    base = math.fmod(s, period) if period else s
    if period and base < 0:
        base += period
    return base + dt * np.arange(1, n_steps + 1)


def _finalize(matrix: np.ndarray) -> tuple[np.ndarray, int]:
    if not np.all(np.isfinite(matrix)):
        raise NumericalFailure("non-finite propagator entries; the step likely violates the stability bound")
    worst = float(matrix.min())
    if worst < -CLAMP_THRESHOLD:
        raise NumericalFailure(
            f"propagator entry {worst:.3e} below -{CLAMP_THRESHOLD:g}; positivity lost"
        )
    small = matrix < 0
    count = int(np.count_nonzero(small))
    if count:
        matrix = np.where(small, 0.0, matrix)
    return matrix, count


def assemble(
    model,
    s: float,
    t: float,
    scheme: StepScheme,
    n_steps: int | None = None,
    check_duality: bool = False,
) -> Propagator:
    """Build M_{s,t} by stepping the identity backward from t to s.

    ``n_steps`` overrides the step count derived from the scheme (it must still
    respect the stability bound); convergence-order studies use it.
    """
    grid = model.grid
    if t < s:
        raise TimeOrderError(f"assemble needs t >= s, got s={s}, t={t}")
    if n_steps is None:
        n_steps = scheme.step_count(model, t - s)
    elif n_steps < 0 or (n_steps == 0 and t > s):
        raise ValueError(f"invalid step count {n_steps} for span {t - s}")
    n = grid.n_nodes
    if n_steps == 0:
        return Propagator(grid, s, t, np.eye(n))
    dt = (t - s) / n_steps
    check_step_size(model, dt)
    gen = model.generator_apply_array
    times = _step_times(model, s, dt, n_steps)

    if getattr(model, "is_autonomous", False):
        step = explicit_step(gen, np.eye(n), times[0], dt, scheme.method)
        step, step_clamps = _finalize(step)
        matrix = np.linalg.matrix_power(step, n_steps)
    else:
        step_clamps = 0
        matrix = np.eye(n)
        for tau in times[::-1]:
            matrix = explicit_step(gen, matrix, tau, dt, scheme.method)
            if not np.all(np.isfinite(matrix[:, 0])):
                raise NumericalFailure(f"non-finite values at step time {tau:.6g}")
    matrix, clamps = _finalize(matrix)
    clamps += step_clamps
    P = Propagator(grid, s, t, matrix, clamps, n_steps, {"dt": dt, "method": scheme.method.value})
    if check_duality:
        duality_gap(P)
    return P


def duality_gap(P: Propagator, n_trials: int = 3, seed: int = 0) -> float:
    """Largest relative gap |<mu P, f> - <mu, P f>| over random signed (mu, f)."""
    rng = np.random.default_rng(seed)
    n = P.grid.n_nodes
    worst = 0.0
    for _ in range(n_trials):
        mu = DiscreteMeasure(P.grid, rng.standard_normal(n))
        f = DiscreteFunction(P.grid, rng.standard_normal(n))
        lhs = float(np.dot(push_forward(mu, P).masses, f.values))
        rhs = float(np.dot(mu.masses, apply_dual(P, f).values))
        scale = float(np.abs(mu.masses) @ np.abs(P.matrix) @ np.abs(f.values)) or 1.0
        worst = max(worst, abs(lhs - rhs) / scale)
    if worst > 1e-12:
        raise NumericalFailure(f"duality gap {worst:.3e} exceeds 1e-12")
    return worst


def composition_defect(model, s: float, u: float, t: float, scheme: StepScheme, n_steps: int) -> float:
    """max |M_{s,u} M_{u,t} - M_{s,t}| with ``n_steps`` per piece and ``2 n_steps`` for the direct route.

    Both routes share the interval length per step only when ``u`` is the
    midpoint; an off-centre ``u`` makes the defect a genuine time-stepping error.
    """
    left = assemble(model, s, u, scheme, n_steps=n_steps)
    right = assemble(model, u, t, scheme, n_steps=n_steps)
    direct = assemble(model, s, t, scheme, n_steps=2 * n_steps)
    return float(np.max(np.abs(compose(left, right).matrix - direct.matrix)))
