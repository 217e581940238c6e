"""Selection-mutation with drift: transport at unit speed, periodic fitness, window mutation kernel.

Dual generator

    L_t f(x) = f'(x) + a(t, x) f(x) + int f(y) Q(x, dy).

The grid is [-L, L]; beyond it f is extended by constants, which is the
zero-gradient closure at the right end and keeps every kernel row's mass equal
to Q(x, R).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ConvergenceError, ModelShapeError, NumericalFailure, TimeOrderError
from .measure_space import DiscreteFunction, SpaceGrid, WeightPair
from .propagator import Method, StepScheme, apply_dual, assemble, check_step_size, explicit_step


# ---------------------------------------------------------------------------
# fitness fields


@dataclass(frozen=True)
class FitnessField:
    """Periodic fitness a(t, x) with explicit lower and upper envelopes in t.

    ``sqrt_shift``: a = -sqrt(|x + sin t|), period 2 pi.
    ``power_confine``: a = A0 - A1 |x - phi sin(2 pi t / T)|^p.
    """

    kind: str = "sqrt_shift"
    T: float = 2 * math.pi
    A0: float = 0.0
    A1: float = 1.0
    p: float = 2.0
    phi: float = 0.0

    def __post_init__(self):
        if self.kind == "sqrt_shift":
            object.__setattr__(self, "T", 2 * math.pi)
        elif self.kind == "power_confine":
            if not self.A1 > 0:
                raise ValueError(f"power_confine needs A1 > 0, got {self.A1}")
            if not self.p >= 1:
                raise ValueError(f"power_confine needs p >= 1, got {self.p}")
            if not self.T > 0:
                raise ValueError(f"period must be > 0, got {self.T}")
        else:
            raise ValueError(f"unknown fitness kind {self.kind!r}")

    @property
    def period(self) -> float:
        return self.T

    @property
    def is_autonomous(self) -> bool:
        return self.kind == "power_confine" and self.phi == 0.0

    def value(self, t, x):
        x = np.asarray(x, float)
        if self.kind == "sqrt_shift":
            return -np.sqrt(np.abs(x + np.sin(t)))
        centre = self.phi * np.sin(2 * math.pi * np.asarray(t, float) / self.T)
        return self.A0 - self.A1 * np.abs(x - centre) ** self.p

    __call__ = value

    def lower(self, x):
        """inf over t of a(t, x)."""
        x = np.abs(np.asarray(x, float))
        if self.kind == "sqrt_shift":
            return -np.sqrt(x + 1.0)
        return self.A0 - self.A1 * (x + abs(self.phi)) ** self.p

    def upper(self, x):
        """sup over t of a(t, x)."""
        x = np.abs(np.asarray(x, float))
        if self.kind == "sqrt_shift":
            return -np.sqrt(np.maximum(x - 1.0, 0.0))
        return self.A0 - self.A1 * np.maximum(x - abs(self.phi), 0.0) ** self.p

    @property
    def A(self) -> float:
        """sup_x of the upper envelope."""
        return 0.0 if self.kind == "sqrt_shift" else float(self.A0)


@dataclass(frozen=True)
class LowerEnvelopeFitness:
    """Time-independent field a(t, x) = inf_s a(s, x) of a periodic fitness."""

    base: FitnessField

    @property
    def period(self) -> float:
        return self.base.period

    is_autonomous = True

    def value(self, t, x):
        return self.base.lower(x)

    __call__ = value

    def lower(self, x):
        return self.base.lower(x)

    def upper(self, x):
        return self.base.lower(x)

    @property
    def A(self) -> float:
        return float(np.max(self.base.lower(np.array([0.0]))))


@dataclass(frozen=True)
class ConstantFitness:
    """Spatially flat fitness a = c; not confining, meant for transport-only checks."""

    c: float = 0.0
    T: float = 1.0

    @property
    def period(self) -> float:
        return self.T

    is_autonomous = True

    def value(self, t, x):
        return np.full(np.shape(x), float(self.c))

    __call__ = value

    def lower(self, x):
        return self.value(0.0, x)

    upper = lower

    @property
    def A(self) -> float:
        return float(self.c)


# ---------------------------------------------------------------------------
# mutation kernels


@dataclass(frozen=True)
class MutationKernel:
    """Q(x, dy) = rate(x) 1{|y - x| <= eps} dy.

    ``uniform_window``: rate = q.  ``decaying_uniform``: rate = kappa_lo + kappa_hi exp(-|x|).
    """

    kind: str = "uniform_window"
    eps: float = 1.0
    q: float = 1.0
    kappa_lo: float = 0.5
    kappa_hi: float = 0.5

    def __post_init__(self):
        if self.kind not in ("uniform_window", "decaying_uniform"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if not self.eps > 0:
            raise ValueError(f"window radius must be > 0, got {self.eps}")
        if self.kind == "uniform_window" and not self.q > 0:
            raise ValueError(f"uniform_window needs q > 0, got {self.q}")
        if self.kind == "decaying_uniform" and not (self.kappa_lo > 0 and self.kappa_hi >= 0):
            raise ValueError("decaying_uniform needs kappa_lo > 0 and kappa_hi >= 0")

    def rate(self, x):
        x = np.asarray(x, float)
        if self.kind == "uniform_window":
            return np.full(x.shape, float(self.q))
        return self.kappa_lo + self.kappa_hi * np.exp(-np.abs(x))

    @property
    def kappa0(self) -> float:
        return float(self.q if self.kind == "uniform_window" else self.kappa_lo)

    @property
    def Q_hat(self) -> float:
        top = self.q if self.kind == "uniform_window" else self.kappa_lo + self.kappa_hi
        return float(2.0 * self.eps * top)

    def shift_domination(self) -> dict:
        """Best C1 with Q(x + alpha, y) <= C1 Q(x, y).

        A shifted window reaches points where the unshifted one vanishes, so no
        finite C1 exists for these kernels.
        """
        return {"C1": math.inf, "verifiable": False,
                "reason": "window kernels: a shifted window leaves the support of the unshifted one"}


def window_matrix(grid: SpaceGrid, kernel: MutationKernel) -> sparse.csr_matrix:
    """Exact integral of the piecewise-linear interpolant over each window, times the rate.

    Parts of a window outside the grid read the constant end values.
    """
    x = grid.nodes
    dx = grid.dx
    n = grid.n_nodes
    eps = kernel.eps
    rates = kernel.rate(x)
    rows, cols, vals = [], [], []
    for i in range(n):
        a, b = x[i] - eps, x[i] + eps
        w = {}
        if a < x[0]:
            w[0] = w.get(0, 0.0) + (min(b, x[0]) - a)
        if b > x[-1]:
            w[n - 1] = w.get(n - 1, 0.0) + (b - max(a, x[-1]))
        j_lo = max(0, int(math.floor((a - x[0]) / dx)))
        j_hi = min(n - 2, int(math.ceil((b - x[0]) / dx)))
        for j in range(j_lo, j_hi + 1):
            lo, hi = max(a, x[j]), min(b, x[j + 1])
            if hi <= lo:
                continue
            left = ((x[j + 1] - lo) ** 2 - (x[j + 1] - hi) ** 2) / (2 * dx)
            right = ((hi - x[j]) ** 2 - (lo - x[j]) ** 2) / (2 * dx)
            w[j] = w.get(j, 0.0) + left
            w[j + 1] = w.get(j + 1, 0.0) + right
        for j, v in sorted(w.items()):
            rows.append(i)
            cols.append(j)
            vals.append(rates[i] * v)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True, eq=False)
class SMModel:
    fitness: object
    kernel: MutationKernel | None
    grid: SpaceGrid
    _K: sparse.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        if not math.isclose(self.grid.x_min, -self.grid.x_max, rel_tol=0, abs_tol=1e-12):
            raise ModelShapeError("selection-mutation grids are symmetric: x_min = -x_max")
        if self.kernel is None:
            K = sparse.csr_matrix((self.grid.n_nodes, self.grid.n_nodes))
        else:
            K = window_matrix(self.grid, self.kernel)
        object.__setattr__(self, "_K", K)

    @property
    def L(self) -> float:
        return self.grid.x_max

    @property
    def period(self) -> float:
        return self.fitness.period

    @property
    def is_autonomous(self) -> bool:
        return bool(getattr(self.fitness, "is_autonomous", False))

    @property
    def kernel_matrix(self) -> sparse.csr_matrix:
        return self._K

    @property
    def Q_hat(self) -> float:
        return 0.0 if self.kernel is None else self.kernel.Q_hat

    def lower_envelope_model(self) -> "SMModel":
        return SMModel(LowerEnvelopeFitness(self.fitness), self.kernel, self.grid)

    def with_grid(self, grid: SpaceGrid) -> "SMModel":
        return SMModel(self.fitness, self.kernel, grid)

    def max_stable_dt(self) -> float:
        x = self.grid.nodes
        loss = max(0.0, -float(np.min(self.fitness.lower(x))))
        return 1.0 / (1.0 / self.grid.dx + loss)

    def generator_apply_array(self, F: np.ndarray, t: float) -> np.ndarray:
        F = np.asarray(F, float)
        col = (slice(None),) + (None,) * (F.ndim - 1)
        out = np.empty_like(F)
        out[:-1] = (F[1:] - F[:-1]) / self.grid.dx
        out[-1] = 0.0
        out += self.fitness.value(t, self.grid.nodes)[col] * F
        out += self._K @ F
        return out


def generator_apply_sm(model: SMModel, f: DiscreteFunction, t: float) -> DiscreteFunction:
    return DiscreteFunction(model.grid, model.generator_apply_array(np.asarray(f.values), t))


def step_dual_sm(model: SMModel, f: DiscreteFunction, t: float, dt: float,
                 method: Method | str = Method.EULER) -> DiscreteFunction:
    """One explicit backward step over [t - dt, t]; rejects steps beyond the stability bound."""
    check_step_size(model, dt)
    vals = explicit_step(model.generator_apply_array, np.asarray(f.values), t, dt, method)
    return DiscreteFunction(model.grid, vals)


# ---------------------------------------------------------------------------
# Duhamel fixed point on a characteristic-aligned space-time grid


def strip_width(model: SMModel) -> float:
    """Largest multiple of dx with eps e^{eps A} Q_hat <= 1/2."""
    Q = model.Q_hat
    A = float(model.fitness.A)
    dx = model.grid.dx
    if Q == 0:
        return math.inf
    lo, hi = 0.0, 1.0
    while hi * math.exp(hi * A) * Q <= 0.5 and hi < 1e6:
        lo, hi = hi, 2 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(mid * A) * Q <= 0.5:
            lo = mid
        else:
            hi = mid
    width = math.floor(lo / dx + 1e-9) * dx
    if width <= 0:
        raise NumericalFailure("strip narrower than one grid cell; refine the grid")
    return width


@dataclass(frozen=True)
class DuhamelResult:
    values: np.ndarray
    iterations: tuple
    contraction_ratios: tuple
    strips: int


def _duhamel_strip(model: SMModel, terminal: np.ndarray, s: float, n_t: int, tol: float,
                   max_iter: int) -> tuple[np.ndarray, int, float]:
    """psi(s, .) on one strip [s, s + n_t dx] by iterating the Duhamel map.

    Characteristics move one node per time level, so each line c carries the
    nodes i = c + l at levels l = 0..n_t (clamped at the right end).
    """
    grid = model.grid
    n = grid.n_nodes
    dx = grid.dx
    x = grid.nodes
    K = model.kernel_matrix
    levels = np.arange(n_t + 1)
    lines = np.arange(-n_t, n)
    idx = np.clip(lines[None, :] + levels[:, None], 0, n - 1)
    valid = (lines[None, :] + levels[:, None]) >= 0
    taus = s + dx * levels
    a_vals = np.where(valid, model.fitness.value(taus[:, None], x[idx]), 0.0)
    I = np.zeros_like(a_vals)
    I[1:] = np.cumsum(0.5 * dx * (a_vals[1:] + a_vals[:-1]), axis=0)
    free = terminal[idx[-1]] * np.exp(I[-1])

    own = np.arange(n)[None, :] - levels[:, None] + n_t  # line through (level l, node i)
    psi = np.repeat(terminal[None, :], n_t + 1, axis=0)
    change_prev = math.inf
    worst_ratio = 0.0
    weight = np.where(valid, np.exp(I), 0.0)
    for it in range(1, max_iter + 1):
        G = (K @ psi.T).T
        H = weight * G[levels[:, None], idx]
        tail = np.cumsum(H[::-1], axis=0)[::-1]
        integral = dx * (tail - 0.5 * H - 0.5 * H[-1][None, :])
        with np.errstate(over="ignore", invalid="ignore"):
            line_vals = np.exp(-I) * (free[None, :] + integral)
        new = line_vals[levels[:, None], own]
        if not np.all(np.isfinite(new)):
            raise NumericalFailure("non-finite values in the Duhamel iteration")
        change = float(np.max(np.abs(new - psi)))
        psi = new
        if change <= tol:
            return psi[0], it, worst_ratio
        if it >= 2 and change_prev > 0:
            ratio = change / change_prev
            worst_ratio = max(worst_ratio, ratio)
            if ratio >= 1.0:
                raise NumericalFailure(f"Duhamel map is not contracting (ratio {ratio:.3f})")
        change_prev = change
    raise ConvergenceError(f"Duhamel iteration did not reach tol={tol:g} in {max_iter} steps")


def duhamel_iterate_sm(model: SMModel, f: DiscreteFunction, s: float, t: float,
                       tol: float = 1e-12, max_iter: int = 200) -> DuhamelResult:
    """M_{s,t} f from the mild formulation, strip by strip from t back to s.

    Each strip is short enough that the Duhamel map contracts with factor <= 1/2.
    The time step equals dx so characteristics land on grid nodes; time
    integrals use the trapezoid rule.
    """
    if t < s:
        raise TimeOrderError(f"need t >= s, got s={s}, t={t}")
    dx = model.grid.dx
    total = (t - s) / dx
    n_total = int(round(total))
    if abs(total - n_total) > 1e-8:
        raise ValueError(f"t - s = {t - s} must be a whole number of grid cells ({dx})")
    width = strip_width(model)
    per_strip = n_total if math.isinf(width) else max(1, int(round(width / dx)))
    vals = np.asarray(f.values, float).copy()
    iters, ratios = [], []
    end = n_total
    strips = 0
    while end > 0:
        start = max(0, end - per_strip)
        vals, it, ratio = _duhamel_strip(model, vals, s + start * dx, end - start, tol, max_iter)
        iters.append(it)
        ratios.append(ratio)
        end = start
        strips += 1
    return DuhamelResult(vals, tuple(iters), tuple(ratios), strips)


# ---------------------------------------------------------------------------
# Lyapunov pair and drift constants


def bump(x, x0: float):
    """psi_0(x) = (1 - (x / x0)^2)^2 on [-x0, x0], zero outside."""
    x = np.asarray(x, float)
    core = (1.0 - (x / x0) ** 2) ** 2
    return np.where(np.abs(x) <= x0, core, 0.0)


def drift_radius(model: SMModel, alpha0: float) -> float:
    """Smallest r with upper envelope <= -Q_hat + alpha0 for every |x| >= r (inf if none on the grid)."""
    x = model.grid.nodes
    x = x[x >= 0]
    ok = model.fitness.upper(x) <= -model.Q_hat + alpha0
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return 0.0
    if bad[-1] == x.size - 1:
        return math.inf
    return float(x[bad[-1] + 1])


def lyapunov_pair_sm(model: SMModel, x0: float, scheme: StepScheme | None = None,
                     horizon: float | None = None) -> WeightPair:
    """V = 1 and psi = Mbar_T psi_0 for the lower-envelope semigroup, scaled to max psi = 1."""
    if not 0 < x0 < model.L:
        raise ValueError(f"x0 must lie in (0, L = {model.L}), got {x0}")
    scheme = scheme or StepScheme(dt_max=model.grid.dx)
    horizon = model.period if horizon is None else horizon
    lower = model.lower_envelope_model()
    psi0 = DiscreteFunction(model.grid, bump(model.grid.nodes, x0))
    P = assemble(lower, 0.0, horizon, scheme)
    psi = apply_dual(P, psi0).values
    if np.any(psi <= 0):
        raise NumericalFailure(f"psi is not strictly positive (min {psi.min():.3e}); extend the horizon")
    psi = psi / float(np.max(psi))
    V = DiscreteFunction.constant(model.grid, 1.0)
    consts = drift_constants_formula(model, x0)
    notes = {"x0": x0, "horizon": horizon, "r0": consts["r0"],
             "bump_covers_r0": bool(consts["r0"] <= x0 / math.sqrt(2.0))}
    return WeightPair(V, DiscreteFunction(model.grid, psi), notes)


def drift_constants_formula(model: SMModel, x0: float) -> dict:
    if model.kernel is None:
        raise ModelShapeError("drift constants need a mutation kernel")
    k0 = model.kernel.kappa0
    eps = model.kernel.eps
    xs = np.linspace(-x0, x0, 2001)
    inf_lower = float(np.min(model.fitness.lower(xs)))
    beta_drift = -30.0 / (k0 * eps**3) + inf_lower
    alpha0 = beta_drift - 1.0
    theta0 = 4.0 * (float(model.fitness.A) + model.Q_hat)
    return {"beta_drift": beta_drift, "alpha0": alpha0, "theta0": theta0,
            "r0": drift_radius(model, alpha0)}


@dataclass(frozen=True)
class DriftReport:
    beta_drift: float
    alpha0: float
    theta0: float
    r0: float
    lower_holds: bool
    upper_holds: bool
    holds: bool
    lower_margin: float
    upper_margin: float
    worst_upper_node: float


def drift_constants_sm(model: SMModel, pair: WeightPair, x0: float,
                       times: tuple | None = None) -> DriftReport:
    """Closed-form drift constants and a grid check of both generator inequalities.

    lower: Lbar psi_0 >= beta_drift psi_0 with the lower-envelope generator;
    upper: L_s V <= alpha0 V + theta0 psi_0 at the sampled times s.
    """
    c = drift_constants_formula(model, x0)
    grid = model.grid
    T = model.period
    times = times if times is not None else (0.0, T / 4, T / 2, 3 * T / 4)
    psi0 = bump(grid.nodes, x0)
    lower = model.lower_envelope_model()
    Lpsi = lower.generator_apply_array(psi0, 0.0)
    lower_gap = (Lpsi - c["beta_drift"] * psi0)[:-1]
    V = np.asarray(pair.V.values)
    upper_gap = []
    for s in times:
        LV = model.generator_apply_array(V, s)
        upper_gap.append(c["alpha0"] * V + c["theta0"] * psi0 - LV)
    upper_gap = np.array(upper_gap)
    lower_margin = float(lower_gap.min())
    upper_margin = float(upper_gap.min())
    worst = float(grid.nodes[np.unravel_index(np.argmin(upper_gap), upper_gap.shape)[1]])
    lo_ok = lower_margin >= -1e-12
    up_ok = upper_margin >= -1e-12
    return DriftReport(c["beta_drift"], c["alpha0"], c["theta0"], c["r0"], lo_ok, up_ok,
                       lo_ok and up_ok, lower_margin, upper_margin, worst)


# ---------------------------------------------------------------------------
# window minorization


def indicator(grid: SpaceGrid, lo: float, hi: float) -> DiscreteFunction:
    x = grid.nodes
    tol = 1e-9 * grid.dx
    return DiscreteFunction(grid, ((x >= lo - tol) & (x <= hi + tol)).astype(float))


def minorization_window_sm(model: SMModel, s: float, t: float, x1: float, x2: float,
                           y1: float, y2: float, scheme: StepScheme) -> float:
    """eta* = min over nodes in [y1, y2] of M_{s,t} 1_{[x1, x2]}."""
    if not (x1 < x2 and y1 <= y2):
        raise ValueError("empty interval")
    if not t > s:
        raise TimeOrderError(f"need t > s, got s={s}, t={t}")
    grid = model.grid
    for v in (x1, x2, y1, y2):
        if not grid.x_min <= v <= grid.x_max:
            raise ValueError(f"interval endpoint {v} outside the grid")
    P = assemble(model, s, t, scheme)
    i0, i1 = grid.index_range(y1, y2)
    vals = apply_dual(P, indicator(grid, x1, x2)).values
    return float(np.min(vals[i0 : i1 + 1]))


def sampled_shift_constant(model: SMModel, x_values, t_values, alphas, n_quad: int = 201) -> float:
    """max over samples of int_0^t [a(tau + alpha, x + tau) - a(tau, x + tau)] dtau.

    A finite sampled value is evidence, not proof, for the shift condition on the fitness.
    """
    worst = -math.inf
    for t in t_values:
        tau = np.linspace(0.0, t, n_quad)
        for x in x_values:
            base = model.fitness.value(tau, x + tau)
            for al in alphas:
                shifted = model.fitness.value(tau + al, x + tau)
                worst = max(worst, float(np.trapezoid(shifted - base, tau)))
    return worst
