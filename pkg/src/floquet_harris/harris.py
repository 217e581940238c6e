"""Grid certificates for Harris-type drift and minorization conditions on propagators.

Every constant returned is the tightest value for which the defining pointwise
inequality holds on the grid, so re-evaluating the inequality with it leaves a
nonnegative slack up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import GridMismatchError, ModelShapeError, NumericalFailure
from .measure_space import DiscreteFunction, DiscreteMeasure, SpaceGrid, WeightPair
from .propagator import Propagator

TREND_TOL = 1e-3


# ---------------------------------------------------------------------------
# sets, measures, reports


@dataclass(frozen=True)
class SmallSet:
    grid: SpaceGrid
    i_lo: int
    i_hi: int

    def __post_init__(self):
        if not 0 <= self.i_lo <= self.i_hi < self.grid.n_nodes:
            raise ValueError(f"invalid node range [{self.i_lo}, {self.i_hi}]")

    @classmethod
    def from_interval(cls, grid: SpaceGrid, lo: float, hi: float) -> "SmallSet":
        return cls(grid, *grid.index_range(lo, hi))

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.i_lo, self.i_hi + 1)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.grid.n_nodes, dtype=bool)
        m[self.i_lo : self.i_hi + 1] = True
        return m

    @property
    def interval(self) -> tuple[float, float]:
        x = self.grid.nodes
        return float(x[self.i_lo]), float(x[self.i_hi])

    def sup_V_over_psi(self, pair: WeightPair) -> float:
        sl = slice(self.i_lo, self.i_hi + 1)
        return float(np.max(pair.V.values[sl] / pair.psi.values[sl]))


@dataclass(frozen=True, eq=False)
class MinorizationMeasure:
    grid: SpaceGrid
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, float)
        if w.shape != (self.grid.n_nodes,):
            raise GridMismatchError("weights do not match the grid")
        if np.any(w < 0):
            raise ValueError("minorization weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"minorization weights must sum to 1, got {w.sum()!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_measure(cls, mu: DiscreteMeasure) -> "MinorizationMeasure":
        m = np.asarray(mu.masses, float)
        return cls(mu.grid, m / m.sum())

    @classmethod
    def uniform_on(cls, K: SmallSet) -> "MinorizationMeasure":
        w = np.zeros(K.grid.n_nodes)
        w[K.indices] = 1.0 / K.indices.size
        return cls(K.grid, w)

    @classmethod
    def lebesgue_on(cls, grid: SpaceGrid, lo: float, hi: float) -> "MinorizationMeasure":
        return cls.from_measure(DiscreteMeasure.lebesgue(grid, lo, hi))

    def supported_in(self, K: SmallSet) -> bool:
        return bool(np.all(self.weights[~K.mask] == 0))

    def pair(self, f) -> float:
        return float(np.dot(self.weights, np.asarray(f, float)))


@dataclass
class CheckResult:
    name: str
    constants: dict
    margin: float
    passed: bool
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


@dataclass
class HarrisReport:
    checks: list
    verdict: bool = field(init=False)

    def __post_init__(self):
        self.verdict = all(c.passed for c in self.checks)

    def get(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"checks": [c.to_dict() for c in self.checks], "verdict": self.verdict}

    def table(self) -> str:
        rows = [("check", "pass", "margin", "constants")]
        for c in self.checks:
            consts = ", ".join(f"{k}={_fmt(v)}" for k, v in c.constants.items())
            rows.append((c.name, "yes" if c.passed else "NO", _fmt(c.margin), consts))
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        lines = [f"{r[0]:<{widths[0]}}  {r[1]:<{widths[1]}}  {r[2]:>{widths[2]}}  {r[3]}" for r in rows]
        lines.append(f"overall: {'pass' if self.verdict else 'FAIL'}")
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def _same_grid(*objs) -> None:
    grids = {id(o.grid): o.grid for o in objs}
    first = objs[0].grid
    for g in grids.values():
        if g != first:
            raise GridMismatchError("objects live on different grids")


def log_trend(values) -> float:
    """Least-squares slope of log(values) against the index over the last half of the sequence."""
    v = np.asarray(values, float)
    n = v.size
    start = n // 2
    idx = np.arange(start, n) + 1.0
    tail = v[start:]
    if tail.size < 2:
        return 0.0
    if np.any(tail <= 0):
        return -math.inf
    return float(np.polyfit(idx, np.log(tail), 1)[0])


# ---------------------------------------------------------------------------
# Assumption A on a single operator


def check_A1(P: Propagator, pair: WeightPair, K: SmallSet) -> CheckResult:
    """alpha = max_{outside K} PV / V, theta = max_K (PV - alpha V) / psi; pass iff alpha < 1."""
    _same_grid(P, pair, K)
    V = np.asarray(pair.V.values)
    psi = np.asarray(pair.psi.values)
    PV = P.matrix @ V
    out = ~K.mask
    alpha = float(np.max(PV[out] / V[out])) if out.any() else 0.0
    inside = K.mask
    theta = max(0.0, float(np.max((PV[inside] - alpha * V[inside]) / psi[inside])))
    slack = alpha * V + theta * inside * psi - PV
    gap = float(np.min(slack / V))
    return CheckResult("A1", {"alpha": alpha, "theta": theta}, 1.0 - alpha, alpha < 1.0,
                       {"certificate_gap": gap, "sup_K_V_over_psi": K.sup_V_over_psi(pair)})


def check_A2(P: Propagator, pair: WeightPair, alpha: float | None = None) -> CheckResult:
    """beta = min P psi / psi; pass iff beta > alpha (alpha from the paired drift check)."""
    _same_grid(P, pair)
    psi = np.asarray(pair.psi.values)
    beta = float(np.min((P.matrix @ psi) / psi))
    if alpha is None:
        return CheckResult("A2", {"beta": beta}, beta, beta > 0)
    return CheckResult("A2", {"beta": beta, "alpha": alpha}, beta - alpha, beta > alpha)


def doeblin_constant(P: Propagator, pair: WeightPair, K: SmallSet, nu: MinorizationMeasure) -> float:
    """c = min_{i in K, nu_j > 0} P_ij psi_j / ((P psi)_i nu_j)."""
    _same_grid(P, pair, K, nu)
    psi = np.asarray(pair.psi.values)
    M = P.matrix
    rows = K.indices
    Ppsi = M[rows] @ psi
    if np.any(Ppsi <= 0):
        raise NumericalFailure("P psi vanishes on K; the positivity precondition fails")
    support = np.flatnonzero(nu.weights > 0)
    if not nu.supported_in(K):
        raise ValueError("nu must be supported in K")
    ratio = M[np.ix_(rows, support)] * psi[support][None, :]
    ratio /= Ppsi[:, None] * nu.weights[support][None, :]
    return float(ratio.min())


def check_A3(P: Propagator, pair: WeightPair, K: SmallSet, nu: MinorizationMeasure,
             name: str = "A3") -> CheckResult:
    c = doeblin_constant(P, pair, K, nu)
    return CheckResult(name, {f"c_{name}": c}, c, c > 0)


def check_A4(P: Propagator, pair: WeightPair, K: SmallSet, nu: MinorizationMeasure,
             n_max: int, trend_tol: float = TREND_TOL) -> CheckResult:
    """d = min_n <nu, P^n psi / psi> / max_K P^n psi / psi, with a trend test on the ratios.

    Suprema over all n cannot be computed; a downward log-trend over the last
    half of n = 1..n_max is read as a ratio heading to zero.
    """
    _same_grid(P, pair, K, nu)
    psi = np.asarray(pair.psi.values)
    v = psi.copy()
    rows = K.indices
    ratios = []
    for _ in range(n_max):
        v = P.matrix @ v
        q = v / psi
        scale = float(np.max(q[rows]))
        ratios.append(nu.pair(q) / scale)
        v = v / scale
    ratios = np.array(ratios)
    d = float(ratios.min())
    slope = log_trend(ratios)
    passed = d > 0 and slope >= -trend_tol
    return CheckResult("A4", {"d_A4": d}, min(d, slope + trend_tol), passed,
                       {"log_slope": slope, "ratios": ratios.tolist(), "trend_tol": trend_tol,
                        "heuristic": "finite-horizon trend surrogate for the supremum over n"})


def check_assumption_A(P: Propagator, pair: WeightPair, K: SmallSet, nu: MinorizationMeasure,
                       n_max: int = 10, P_period: Propagator | None = None) -> HarrisReport:
    a1 = check_A1(P, pair, K)
    a2 = check_A2(P, pair, a1.constants["alpha"])
    a3 = check_A3(P, pair, K, nu)
    a4 = check_A4(P_period or P, pair, K, nu, n_max)
    return HarrisReport([a1, a2, a3, a4])


# ---------------------------------------------------------------------------
# Assumption B on a periodic provider


def _orbit_ratios(P: np.ndarray, psi: np.ndarray, n_max: int) -> np.ndarray:
    """Rows n = 1..n_max of (P^n psi), each renormalized; returns the log-scale too."""
    out = np.empty((n_max, psi.size))
    logs = np.zeros(n_max)
    v = psi.copy()
    acc = 0.0
    for n in range(n_max):
        v = P @ v
        m = float(np.max(np.abs(v)))
        acc += math.log(m)
        v = v / m
        out[n] = v
        logs[n] = acc
    return out, logs


def check_B4(provider, pair: WeightPair, K: SmallSet, s0: float, tau: float, n_max: int,
             s_samples, trend_tol: float = TREND_TOL) -> CheckResult:
    """C_B4 = max over s, n, y in K of M_{s0,s0+n tau} psi(y) / M_{s,s+n tau} psi(y), with a trend test."""
    psi = np.asarray(pair.psi.values)
    rows = K.indices
    base, base_log = _orbit_ratios(provider.get(s0, s0 + tau).matrix, psi, n_max)
    per_n = np.full(n_max, -np.inf)
    for s in s_samples:
        other, other_log = _orbit_ratios(provider.get(s, s + tau).matrix, psi, n_max)
        with np.errstate(divide="ignore"):
            log_ratio = (np.log(base[:, rows]) - np.log(other[:, rows])) + (base_log - other_log)[:, None]
        per_n = np.maximum(per_n, log_ratio.max(axis=1))
    C = float(math.exp(per_n.max())) if np.isfinite(per_n.max()) else math.inf
    slope = log_trend(np.exp(per_n)) if np.all(np.isfinite(per_n)) else math.inf
    passed = math.isfinite(C) and slope <= trend_tol
    return CheckResult("B4", {"C_B4": C}, trend_tol - slope, passed,
                       {"log_slope": slope, "max_log_ratio_by_n": per_n.tolist(),
                        "trend_tol": trend_tol,
                        "heuristic": "finite-horizon trend surrogate for the bound over all n"})


def check_B0(provider, pair: WeightPair, s0: float, tau: float, n_lattice: int = 6) -> CheckResult:
    """Sampled bounds M_{s,t} V <= C V and M_{s,t} psi >= c psi for s0 <= s <= t <= s0 + 2 tau."""
    V = np.asarray(pair.V.values)
    psi = np.asarray(pair.psi.values)
    times = s0 + 2 * tau * np.arange(n_lattice + 1) / n_lattice
    upper, lower = 1.0, 1.0
    for i in range(n_lattice):
        M = np.eye(V.size)
        for j in range(i, n_lattice):
            M = M @ provider.get(times[j], times[j + 1]).matrix
            upper = max(upper, float(np.max(M @ V / V)))
            lower = min(lower, float(np.min(M @ psi / psi)))
    passed = math.isfinite(upper) and lower > 0
    return CheckResult("B0", {"C_V": upper, "c_psi": lower}, lower, passed,
                       {"lattice_points": n_lattice + 1})


def check_B_suite(provider, pair: WeightPair, K: SmallSet, nu: MinorizationMeasure, s0: float,
                  tau: float, n_max: int, time_samples, sigma=None, b5_points: int = 3,
                  n_quad: int = 16) -> HarrisReport:
    """Sampled checks of the time-inhomogeneous conditions.

    ``time_samples`` are the initial times for the drift and growth bounds (one
    period suffices by periodicity) and for the ratio bound on [s0, s0 + tau].
    ``sigma(x, y)`` returns (times, weights, c_xy) for the two-point minorization.
    """
    T = provider.period
    k = tau / T
    if abs(k - round(k)) > 1e-9 or round(k) < 1:
        raise ModelShapeError(f"tau = {tau} must be a whole number of periods ({T})")
    checks = [check_B0(provider, pair, s0, tau)]
    alphas, thetas, betas, gaps = [], [], [], []
    for s in time_samples:
        P = provider.get(s, s + tau)
        a1 = check_A1(P, pair, K)
        alphas.append(a1.constants["alpha"])
        thetas.append(a1.constants["theta"])
        gaps.append(a1.notes["certificate_gap"])
        betas.append(check_A2(P, pair).constants["beta"])
    alpha, theta, beta = max(alphas), max(thetas), min(betas)
    checks.append(CheckResult("B1", {"alpha": alpha, "theta": theta}, 1.0 - alpha, alpha < 1.0,
                              {"certificate_gap": min(gaps), "samples": len(alphas)}))
    checks.append(CheckResult("B2", {"beta": beta, "alpha": alpha}, beta - alpha,
                              beta > alpha > 0))
    checks.append(check_A3(provider.get(s0, s0 + tau), pair, K, nu, name="B3"))
    b4_s = [s for s in time_samples if s0 <= s <= s0 + tau] or [s0]
    checks.append(check_B4(provider, pair, K, s0, tau, n_max, b4_s))
    if sigma is not None:
        checks.append(check_B5(provider, pair, K, s0, tau, sigma, b5_points, n_quad))
    return HarrisReport(checks)


def check_B5(provider, pair: WeightPair, K: SmallSet, s0: float, tau: float, sigma,
             n_points: int = 3, n_quad: int = 16) -> CheckResult:
    """Two-point minorization with sigma_{x,y} on the lattice v_q = s0 + q tau / n_quad.

    d_B5_certificate = min over sampled x, y of c_xy psi(y) / psi(x).  The grid
    check computes, over the hat basis f = e_j, the tightest d_B5 with
    M_{s0,t} f(x) / psi(x) >= d sum_q sigma_q M_{v_q,t} f(y) / psi(y); the margin is
    d_B5 - d_B5_certificate.
    """
    grid = pair.grid
    psi = np.asarray(pair.psi.values)
    x_nodes = grid.nodes
    t = s0 + tau
    lattice = s0 + tau * np.arange(n_quad + 1) / n_quad
    lattice[-1] = t
    W = [None] * (n_quad + 1)
    W[-1] = np.eye(grid.n_nodes)
    for q in range(n_quad - 1, -1, -1):
        W[q] = provider.get(lattice[q], lattice[q + 1]).matrix @ W[q + 1]
    P = W[0]
    picks = np.unique(np.linspace(K.i_lo, K.i_hi, n_points).round().astype(int))
    cert, empirical = math.inf, math.inf
    for i in picks:
        for j in picks:
            v_nodes, weights, c_xy = sigma(float(x_nodes[i]), float(x_nodes[j]), lattice)
            if not c_xy > 0:
                raise NumericalFailure(f"non-positive two-point constant at x={x_nodes[i]}, y={x_nodes[j]}")
            cert = min(cert, c_xy * psi[j] / psi[i])
            rhs = sum(w * W[q][j] for q, w in zip(v_nodes, weights) if w > 0) / psi[j]
            lhs = P[i] / psi[i]
            mask = rhs > 0
            if mask.any():
                empirical = min(empirical, float(np.min(lhs[mask] / rhs[mask])))
    margin = empirical - cert
    passed = cert > 0 and margin >= 0
    return CheckResult("B5", {"d_B5": empirical, "d_B5_certificate": cert}, margin, passed,
                       {"points_per_axis": int(picks.size), "quadrature_intervals": n_quad})


# ---------------------------------------------------------------------------
# two-point measures for the selection-mutation model


def _line_integral(a, t0: float, t1: float, x_of_t, n: int = 64) -> float:
    if t1 <= t0:
        return 0.0
    ts = np.linspace(t0, t1, n + 1)
    return float(np.trapezoid(a(ts, x_of_t(ts)), ts))


@dataclass(frozen=True)
class TwoPointMeasure:
    times: np.ndarray
    weights: np.ndarray
    c_xy: float
    depth: int


def b5_sigma(model, x: float, y: float, s0: float, tau: float, n: int,
             lattice=None, n_inner: int = 64) -> TwoPointMeasure:
    """Time measure sigma_{x,y} and constant c_xy with M_{s0,t} f(x) >= c_xy int M_{u,t} f(y) sigma(du).

    Depth 0 keeps the mutation-free path and needs y = x + tau.  Depth 1 keeps
    paths with exactly one mutation: leaving x at s0, jumping at time u into the
    window, and following the characteristic that passes y at time v, which gives

        rho(v) = kappa0 1{|y - x - (v - s0)| < eps}
                 int_{s0}^{v} exp(int_{s0}^{u} a(r, x + r - s0) dr + int_u^v a(r, y - v + r) dr) du,

    c_xy = int rho and sigma = rho / c_xy.  It needs y - x in (-eps, tau + eps).
    """
    t = s0 + tau
    a = model.fitness.value
    if n == 0:
        if abs(y - (x + tau)) > 1e-9 * max(1.0, abs(y)):
            raise ValueError("depth 0 applies only when y = x + tau")
        c = math.exp(_line_integral(a, s0, t, lambda r: x + r - s0, 256))
        return TwoPointMeasure(np.array([t]), np.array([1.0]), c, 0)
    if n != 1:
        raise NotImplementedError("two-point measures are built for depths 0 and 1 only")
    kernel = model.kernel
    if kernel is None:
        raise ModelShapeError("depth 1 needs a mutation kernel")
    eps, k0 = kernel.eps, kernel.kappa0
    if not -eps < y - x < tau + eps:
        raise ValueError(f"y - x = {y - x:g} outside (-eps, tau + eps); no single-mutation path")
    v_nodes = np.asarray(lattice if lattice is not None else np.linspace(s0, t, 65), float)
    rho = np.zeros(v_nodes.size)
    for q, v in enumerate(v_nodes):
        if not abs(y - x - (v - s0)) < eps or v <= s0:
            continue
        us = np.linspace(s0, v, n_inner + 1)
        first = np.array([_line_integral(a, s0, u, lambda r: x + r - s0, 32) for u in us])
        second = np.array([_line_integral(a, u, v, lambda r: y - v + r, 32) for u in us])
        rho[q] = k0 * np.trapezoid(np.exp(first + second), us)
    if v_nodes.size > 1:
        w = np.zeros(v_nodes.size)
        dv = np.diff(v_nodes)
        w[:-1] += 0.5 * dv
        w[1:] += 0.5 * dv
    else:
        w = np.ones(1)
    mass = w * rho
    c = float(mass.sum())
    if not c > 0:
        raise NumericalFailure("two-point density vanishes on the lattice")
    return TwoPointMeasure(v_nodes, mass / c, c, 1)


def sm_sigma_builder(model, s0: float, tau: float):
    """Adapter for :func:`check_B5`: lattice indices, weights and c_xy at depth 1."""

    def build(x, y, lattice):
        m = b5_sigma(model, x, y, s0, tau, 1, lattice=lattice)
        return list(range(len(lattice))), m.weights.tolist(), m.c_xy

    return build


# ---------------------------------------------------------------------------
# the drifted sine model: an explicit semiflow that violates the ratio bound


SIN_PERIOD = 2 * math.pi


def sin_grid(n_nodes: int) -> SpaceGrid:
    """Periodic grid x_j = 2 pi j / n on [0, 2 pi)."""
    return SpaceGrid(0.0, SIN_PERIOD * (n_nodes - 1) / n_nodes, n_nodes)


def sin_semiflow(s: float, t: float):
    """M_{s,t} f(x) = f(x + t - s) exp((t - s) sin(x - s)) acting on callables."""
    if t < s:
        raise ValueError("need t >= s")

    def op(f):
        return lambda x: f(np.asarray(x, float) + (t - s)) * np.exp((t - s) * np.sin(np.asarray(x, float) - s))

    return op


def sin_model_exact(grid: SpaceGrid, s: float, t: float, f) -> DiscreteFunction:
    """Closed-form semiflow at the nodes of a periodic grid.

    A callable f is evaluated exactly; nodal data need t - s to be a whole number of cells.
    """
    if isinstance(f, DiscreteFunction):
        return DiscreteFunction(grid, sin_propagator(grid, s, t).matrix @ np.asarray(f.values))
    return DiscreteFunction(grid, sin_semiflow(s, t)(f)(grid.nodes))


def sin_propagator(grid: SpaceGrid, s: float, t: float) -> Propagator:
    """Weighted periodic shift by (t - s) / dx nodes."""
    n = grid.n_nodes
    if not math.isclose(grid.dx * n, SIN_PERIOD, rel_tol=1e-12):
        raise ModelShapeError("the sine model lives on the periodic grid from sin_grid")
    shift = (t - s) / grid.dx
    m = int(round(shift))
    if abs(shift - m) > 1e-8:
        raise ValueError("t - s must be a whole number of cells for nodal data")
    x = grid.nodes
    M = np.zeros((n, n))
    M[np.arange(n), (np.arange(n) + m) % n] = np.exp((t - s) * np.sin(x - s))
    return Propagator(grid, s, t, M)


def sin_b4_ratio(x, s: float, u: float, k: int, T: float = SIN_PERIOD):
    """exp(k T (sin(x - s) - sin(x - u)))."""
    x = np.asarray(x, float)
    return np.exp(k * T * (np.sin(x - s) - np.sin(x - u)))


class SinProvider:
    """Exact propagators of the sine model on a periodic grid."""

    def __init__(self, grid: SpaceGrid):
        self.grid = grid
        self.period = SIN_PERIOD

    def get(self, a: float, b: float) -> Propagator:
        return sin_propagator(self.grid, a, b)
