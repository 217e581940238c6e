"""Growth-fragmentation with affine periodic rates.

Growth rate g(t, x) = g0(t) + g1(t) x and division rate b(t, x) = b0(t) + b1(t) x,
daughters distributed by a polynomial density kappa on [0, 1].  The dual generator is

    L_t f(x) = g(t, x) f'(x) + b(t, x) (int_0^1 kappa(z) f(z x) dz - f(x)).

Because the rates are affine, the dual Floquet eigenfunctions are affine in x and
their coefficients solve a 2x2 periodic linear ODE; that gives a route to the
Floquet eigenvalue that is independent of any spatial discretization.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import CFLViolationError, ModelShapeError, NumericalFailure
from .measure_space import DiscreteFunction, DiscreteMeasure, SpaceGrid, WeightPair
from .propagator import (
    Method,
    Propagator,
    StepScheme,
    assemble,
    check_step_size,
    explicit_step,
)


# ---------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True)
class PeriodicCoefficient:
    """c(t) = mean + sin_amp * sin(2 pi t / period + sin_phase)."""

    mean: float
    sin_amp: float = 0.0
    sin_phase: float = 0.0
    period: float = 1.0

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"period must be > 0, got {self.period}")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi / self.period

    @property
    def is_constant(self) -> bool:
        return self.sin_amp == 0.0

    def value(self, t):
        return self.mean + self.sin_amp * np.sin(self.omega * np.asarray(t, float) + self.sin_phase)

    __call__ = value

    def integral(self, a, b):
        """Exact int_a^b c(tau) d tau."""
        w = self.omega
        return self.mean * (b - a) - self.sin_amp / w * (
            np.cos(w * np.asarray(b, float) + self.sin_phase)
            - np.cos(w * np.asarray(a, float) + self.sin_phase)
        )

    def average(self) -> float:
        return float(self.mean)

    @property
    def min_value(self) -> float:
        return self.mean - abs(self.sin_amp)

    @property
    def max_value(self) -> float:
        return self.mean + abs(self.sin_amp)


# ---------------------------------------------------------------------------
# fragmentation kernel


@dataclass(frozen=True)
class FragmentationDistribution:
    """Polynomial daughter-size density kappa(z) on [0, 1] with unit first moment.

    ``uniform_binary`` is kappa = 2.  ``floor_plus_bump`` is
    kappa_floor + c_b z (1 - z) with c_b fixed by the unit first moment.
    """

    kind: str = "uniform_binary"
    kappa_floor: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform_binary", "floor_plus_bump"):
            raise ValueError(f"unknown fragmentation kind {self.kind!r}")
        if self.kind == "floor_plus_bump" and not 0 < self.kappa_floor <= 2:
            raise ValueError(
                f"floor_plus_bump needs 0 < kappa_floor <= 2 so the bump is nonnegative, got {self.kappa_floor}"
            )

    @property
    def coefficients(self) -> tuple[float, ...]:
        """Monomial coefficients c_k of kappa(z) = sum_k c_k z^k."""
        if self.kind == "uniform_binary":
            return (2.0,)
        c_b = 12.0 * (1.0 - 0.5 * self.kappa_floor)
        return (float(self.kappa_floor), c_b, -c_b)

    @property
    def lower_bound(self) -> float:
        return 2.0 if self.kind == "uniform_binary" else float(self.kappa_floor)

    def __call__(self, z):
        z = np.asarray(z, float)
        return sum(c * z**k for k, c in enumerate(self.coefficients))

    def is_symmetric(self) -> bool:
        z = np.linspace(0.0, 1.0, 33)
        return bool(np.allclose(self(z), self(1.0 - z), rtol=0, atol=1e-14))


def kappa_moment(kappa: FragmentationDistribution, k: float) -> float:
    """eta_k = int_0^1 z^k kappa(z) dz, exact for the polynomial catalog."""
    if k < 0:
        raise ValueError(f"moment order must be >= 0, got {k}")
    return float(sum(c / (k + j + 1.0) for j, c in enumerate(kappa.coefficients)))


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class GFModel:
    g0: PeriodicCoefficient
    g1: PeriodicCoefficient
    b0: PeriodicCoefficient
    b1: PeriodicCoefficient
    kappa: FragmentationDistribution
    grid: SpaceGrid
    alpha_weight: float = 2.0
    c_floor: float = 0.0
    enforce_floors: bool = True

    def __post_init__(self):
        periods = {c.period for c in (self.g0, self.g1, self.b0, self.b1)}
        if len(periods) != 1:
            raise ModelShapeError(f"coefficients must share one period, got {sorted(periods)}")
        if self.grid.x_min != 0.0:
            raise ModelShapeError("growth-fragmentation grids start at x = 0")
        if not self.alpha_weight > 1:
            raise ValueError(f"alpha_weight must be > 1, got {self.alpha_weight}")
        if self.enforce_floors:
            problems = self.floor_violations()
            if problems:
                raise ModelShapeError("; ".join(problems))

    def floor_violations(self) -> list[str]:
        out = []
        floor = max(self.c_floor, 0.0)
        if not self.g0.min_value > floor:
            out.append(f"g0 positivity floor: min g0 = {self.g0.min_value:g} must exceed {floor:g}")
        if not self.b1.min_value > floor:
            out.append(f"b1 positivity floor: min b1 = {self.b1.min_value:g} must exceed {floor:g}")
        if self.b0.min_value < 0:
            out.append(f"b0 must be nonnegative, min b0 = {self.b0.min_value:g}")
        if self.g1.min_value < 0:
            out.append(f"g1 must be nonnegative, min g1 = {self.g1.min_value:g}")
        return out

    @property
    def period(self) -> float:
        return self.g0.period

    @property
    def is_autonomous(self) -> bool:
        return all(c.is_constant for c in (self.g0, self.g1, self.b0, self.b1))

    @property
    def eta0(self) -> float:
        return kappa_moment(self.kappa, 0.0)

    def growth(self, t, x):
        return self.g0(t) + self.g1(t) * np.asarray(x, float)

    def division(self, t, x):
        return self.b0(t) + self.b1(t) * np.asarray(x, float)

    def weight_V(self) -> DiscreteFunction:
        return DiscreteFunction(self.grid, 1.0 + self.grid.nodes**self.alpha_weight)

    def with_grid(self, grid: SpaceGrid) -> "GFModel":
        return GFModel(
            self.g0, self.g1, self.b0, self.b1, self.kappa, grid,
            self.alpha_weight, self.c_floor, self.enforce_floors,
        )

    def max_stable_dt(self) -> float:
        x_max = self.grid.x_max
        g_sup = max(self.g0.max_value, 0.0) + max(self.g1.max_value, 0.0) * x_max
        b_sup = max(self.b0.max_value, 0.0) + max(self.b1.max_value, 0.0) * x_max
        rate = g_sup / self.grid.dx + b_sup
        return math.inf if rate == 0 else 1.0 / rate

    def generator_apply_array(self, F: np.ndarray, t: float) -> np.ndarray:
        return _generator(self, np.asarray(F, float), t)


@functools.lru_cache(maxsize=32)
def _fragmentation_weights(grid: SpaceGrid, coefficients: tuple[float, ...]):
    """Per-cell exact integrals of y^k times the two hat pieces, scaled by c_k x_i^(-k-1)."""
    x = grid.nodes
    dx = grid.dx
    lo, hi = x[:-1], x[1:]
    pieces = []
    with np.errstate(divide="ignore"):
        for k, c in enumerate(coefficients):
            m_k = (hi ** (k + 1) - lo ** (k + 1)) / (k + 1)
            m_k1 = (hi ** (k + 2) - lo ** (k + 2)) / (k + 2)
            w_left = (hi * m_k - m_k1) / dx
            w_right = (m_k1 - lo * m_k) / dx
            scale = np.zeros_like(x)
            scale[1:] = c * x[1:] ** (-(k + 1.0))
            pieces.append((w_left, w_right, scale))
    return tuple(pieces)


def _fragment_average(model: GFModel, F: np.ndarray) -> np.ndarray:
    """(K f)(x_i) = int_0^1 kappa(z) f~(z x_i) dz for the piecewise-linear interpolant f~.

    Substituting y = z x_i turns the integral into sum_k c_k x_i^(-k-1) int_0^{x_i} y^k f~(y) dy,
    so each column costs one cumulative sum per monomial.
    """
    pieces = _fragmentation_weights(model.grid, model.kappa.coefficients)
    out = np.zeros_like(F)
    col = (slice(None),) + (None,) * (F.ndim - 1)
    for w_left, w_right, scale in pieces:
        cells = w_left[col] * F[:-1] + w_right[col] * F[1:]
        out[1:] += scale[1:][col] * np.cumsum(cells, axis=0)
    out[0] = model.eta0 * F[0]
    return out


def _generator(model: GFModel, F: np.ndarray, t: float) -> np.ndarray:
    grid = model.grid
    x = grid.nodes
    col = (slice(None),) + (None,) * (F.ndim - 1)
    V_end = 1.0 + x[-1] ** model.alpha_weight
    V_ghost = 1.0 + (x[-1] + grid.dx) ** model.alpha_weight
    ahead = np.empty_like(F)
    ahead[:-1] = F[1:]
    ahead[-1] = F[-1] * (V_ghost / V_end)
    g = model.growth(t, x)
    b = model.division(t, x)
    transport = g[col] * (ahead - F) / grid.dx
    return transport + b[col] * (_fragment_average(model, F) - F)


def generator_apply_gf(model: GFModel, f: DiscreteFunction, t: float) -> DiscreteFunction:
    return DiscreteFunction(model.grid, _generator(model, np.asarray(f.values), t))


def step_dual_gf(model: GFModel, f: DiscreteFunction, t: float, dt: float,
                 method: Method | str = Method.EULER, cfl_safety: float = 1.0) -> DiscreteFunction:
    """One explicit backward step over [t - dt, t]."""
    if dt > cfl_safety * model.max_stable_dt() * (1 + 1e-12):
        raise CFLViolationError(
            f"step {dt:.6g} exceeds {cfl_safety:g} x stability bound {model.max_stable_dt():.6g}"
        )
    check_step_size(model, dt)
    vals = explicit_step(model.generator_apply_array, np.asarray(f.values), t, dt, method)
    return DiscreteFunction(model.grid, vals)


# ---------------------------------------------------------------------------
# characteristics


def flow(g0: PeriodicCoefficient, g1: PeriodicCoefficient, s: float, t: float, x):
    """X_{s,t}(x) for dX/dtau = g0(tau) + g1(tau) X.

    X_{s,t}(x) = x exp(G1(s,t)) + int_s^t g0(tau) exp(G1(tau,t)) dtau with G1(a,b) = int_a^b g1.
    """
    x = np.asarray(x, float)
    growth_factor = math.exp(float(g1.integral(s, t)))
    return x * growth_factor + _flow_from_zero(g0, g1, s, t)


def _flow_from_zero(g0: PeriodicCoefficient, g1: PeriodicCoefficient, s: float, t: float) -> float:
    if t == s:
        return 0.0
    if g1.is_constant:
        c = g1.mean
        w, phi = g0.omega, g0.sin_phase
        if c == 0.0:
            return float(g0.integral(s, t))
        base = g0.mean * math.expm1(c * (t - s)) / c
        # antiderivative of exp(-c tau) sin(w tau + phi), times exp(c t)
        a = -c

        def anti(tau):
            return math.exp(a * (tau - t)) * (a * math.sin(w * tau + phi) - w * math.cos(w * tau + phi)) / (a * a + w * w)

        return base + g0.sin_amp * (anti(t) - anti(s))

    def integrand(tau):
        return float(g0(tau)) * math.exp(float(g1.integral(tau, t)))

    val, _ = integrate.quad(integrand, s, t, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def characteristic_flow(model: GFModel, s: float, t: float, x):
    if t < s:
        raise ValueError(f"characteristic_flow needs t >= s, got s={s}, t={t}")
    return flow(model.g0, model.g1, s, t, x)


# ---------------------------------------------------------------------------
# Floquet ODE for affine eigenfunctions


def floquet_matrix_from(g0, g1, b0, b1, eta0: float, t: float) -> np.ndarray:
    r = -t
    return np.array(
        [
            [float(b0(r)) * (eta0 - 1.0), float(g0(r))],
            [float(b1(r)) * (eta0 - 1.0), float(g1(r))],
        ]
    )


def floquet_matrix(model: GFModel, t: float) -> np.ndarray:
    """A(t) for the coefficient ODE of the affine dual eigenfunction."""
    return floquet_matrix_from(model.g0, model.g1, model.b0, model.b1, model.eta0, t)


def _rk4_step(A, t: float, Y: np.ndarray, h: float) -> np.ndarray:
    k1 = A(t) @ Y
    k2 = A(t + 0.5 * h) @ (Y + 0.5 * h * k1)
    k3 = A(t + 0.5 * h) @ (Y + 0.5 * h * k2)
    k4 = A(t + h) @ (Y + h * k3)
    return Y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_fundamental(A, T: float, n_steps: int) -> np.ndarray:
    """Y(t_k) for Y' = A(t) Y, Y(0) = I at t_k = k T / n_steps, k = 0..n_steps."""
    if n_steps < 4:
        raise ValueError(f"n_steps must be >= 4, got {n_steps}")
    h = T / n_steps
    path = np.empty((n_steps + 1, 2, 2))
    path[0] = np.eye(2)
    for k in range(n_steps):
        path[k + 1] = _rk4_step(A, k * h, path[k], h)
    return path


def monodromy(model: GFModel, n_steps: int = 2000) -> np.ndarray:
    """Xi_T, the fundamental matrix of the coefficient ODE over one period."""
    return _monodromy_path(model, n_steps)[-1].copy()


@functools.lru_cache(maxsize=16)
def _monodromy_path(model: GFModel, n_steps: int) -> np.ndarray:
    return rk4_fundamental(lambda t: floquet_matrix(model, t), model.period, n_steps)


@dataclass(frozen=True)
class PerronPair:
    Lambda: float
    lambda_F: float
    u0: float
    v0: float


def perron_pair(Xi: np.ndarray, T: float) -> PerronPair:
    """Dominant eigenpair of an entrywise positive 2x2 matrix, eigenvector summing to 1."""
    Xi = np.asarray(Xi, float)
    if not np.all(Xi > 0):
        raise NumericalFailure(f"monodromy matrix is not entrywise positive: {Xi.tolist()}")
    (a, b), (c, d) = Xi
    half_tr = 0.5 * (a + d)
    disc = 0.25 * (a - d) ** 2 + b * c
    if disc < 0:
        raise NumericalFailure("complex dominant root for a positive matrix")
    Lam = half_tr + math.sqrt(disc)
    u, v = b, Lam - a
    total = u + v
    u, v = u / total, v / total
    if not (u > 0 and v > 0):
        raise NumericalFailure(f"Perron eigenvector not positive: ({u}, {v})")
    return PerronPair(Lam, math.log(Lam) / T, u, v)


def perron_floquet(model: GFModel, n_steps: int = 2000) -> PerronPair:
    return perron_pair(monodromy(model, n_steps), model.period)


def floquet_coefficients(model: GFModel, t: float, n_steps: int = 2000) -> tuple[float, float]:
    """(u_t, v_t) = exp(-lambda_F t) Xi_t (u0, v0), periodic in t."""
    T = model.period
    pair = perron_floquet(model, n_steps)
    path = _monodromy_path(model, n_steps)
    r = math.fmod(t, T)
    if r < 0:
        r += T
    h = T / n_steps
    k = min(int(r // h), n_steps)
    Y = path[k]
    rem = r - k * h
    if rem > 0:
        Y = _rk4_step(lambda tau: floquet_matrix(model, tau), k * h, Y, rem)
    uv = math.exp(-pair.lambda_F * r) * (Y @ np.array([pair.u0, pair.v0]))
    return float(uv[0]), float(uv[1])


def floquet_h(model: GFModel, s: float, x, n_steps: int = 2000):
    """h_s(x) = u_{-s} + v_{-s} x."""
    u, v = floquet_coefficients(model, -s, n_steps)
    return u + v * np.asarray(x, float)


def floquet_h_function(model: GFModel, s: float, n_steps: int = 2000) -> DiscreteFunction:
    return DiscreteFunction(model.grid, floquet_h(model, s, model.grid.nodes, n_steps))


def positivity_of_fundamental(model: GFModel, n_steps: int = 2000) -> float:
    """Smallest entry of Xi_t over the RK4 nodes in (0, T]."""
    return float(_monodromy_path(model, n_steps)[1:].min())


def lyapunov_pair_gf(model: GFModel, s: float = 0.0, n_steps: int = 2000) -> WeightPair:
    """V = 1 + x^alpha and psi = h_s scaled so that psi <= V."""
    V = model.weight_V()
    h = floquet_h(model, s, model.grid.nodes, n_steps)
    scale = min(1.0, float(np.min(V.values / h)))
    return WeightPair(V, DiscreteFunction(model.grid, scale * h), {"psi_scale": scale})


# ---------------------------------------------------------------------------
# Doeblin minorization


@dataclass(frozen=True)
class DoeblinCertificate:
    c_st: float
    nu_support: tuple[float, float]
    a1: float
    a2: float
    B: float
    c_beta: float
    tau_star: float
    margin: float
    relative_margin: float
    passed: bool
    details: dict = field(default_factory=dict)


def doeblin_constants(model: GFModel, s: float, t: float, R: float, a1: float = 0.5,
                      n_tau: int = 401) -> dict:
    """Constants of the lower bound M_{s,t} f(x) >= c_st <nu, f> for x in [0, R].

    Keeping only one division event along the characteristic, the daughter
    lands on [X_{tau,t}(0), X_{s,t}(x)], which covers nu's support
    (a1 X_{s,t}(0), X_{s,t}(0)) whenever tau >= tau_star with
    X_{tau_star,t}(0) = a1 X_{s,t}(0).  Integrating over tau in [tau_star, t] gives

        c_st = (t - tau_star) / (a2 X_{s,t}(R)) exp(-(t - s) B) kappa_min c_beta.
    """
    if not t > s:
        raise ValueError(f"need t > s, got s={s}, t={t}")
    if not 0 < a1 < 1:
        raise ValueError(f"a1 must lie in (0, 1), got {a1}")
    if not R > 0:
        raise ValueError(f"R must be > 0, got {R}")
    g0, g1 = model.g0, model.g1
    X0 = float(flow(g0, g1, s, t, 0.0))
    XR = float(flow(g0, g1, s, t, R))
    target = a1 * X0
    tau_star = optimize.brentq(lambda tau: float(flow(g0, g1, tau, t, 0.0)) - target, s, t,
                               xtol=1e-14, rtol=1e-14)
    taus = np.linspace(s, t, n_tau)
    X_R_path = np.array([float(flow(g0, g1, s, tau, R)) for tau in taus])
    carry = np.array([math.exp(float(g1.integral(tau, t))) for tau in taus])
    a2 = float(np.max(X_R_path * carry) / XR)
    B = float(np.max(model.division(taus, X_R_path)))
    late = np.linspace(tau_star, t, n_tau)
    X_0_late = np.array([float(flow(g0, g1, s, tau, 0.0)) for tau in late])
    c_beta = float(np.min(model.division(late, X_0_late)))
    c_st = (t - tau_star) / (a2 * XR) * math.exp(-(t - s) * B) * model.kappa.lower_bound * c_beta
    return {
        "c_st": c_st, "nu_support": (target, X0), "a1": a1, "a2": a2, "B": B,
        "c_beta": c_beta, "tau_star": tau_star, "X_st_R": XR,
    }


def doeblin_certificate_gf(model: GFModel, s: float, t: float, R: float, scheme: StepScheme,
                           a1: float = 0.5, P: Propagator | None = None) -> DoeblinCertificate:
    """Compute the constants and check P_ij >= c_st nu_j for x_i in [0, R] over the hat basis."""
    const = doeblin_constants(model, s, t, R, a1)
    grid = model.grid
    lo, hi = const["nu_support"]
    if hi > grid.x_max:
        raise ModelShapeError(f"nu support reaches {hi:g} beyond the grid end {grid.x_max:g}")
    nu = DiscreteMeasure.lebesgue(grid, lo, hi)
    if P is None:
        P = assemble(model, s, t, scheme)
    i_lo, i_hi = grid.index_range(0.0, R)
    rows = P.matrix[i_lo : i_hi + 1]
    support = nu.masses > 0
    gap = rows[:, support] - const["c_st"] * nu.masses[support][None, :]
    margin = float(gap.min())
    rel = float((rows[:, support] / (const["c_st"] * nu.masses[support][None, :])).min() - 1.0)
    return DoeblinCertificate(
        c_st=const["c_st"], nu_support=(lo, hi), a1=a1, a2=const["a2"], B=const["B"],
        c_beta=const["c_beta"], tau_star=const["tau_star"], margin=margin,
        relative_margin=rel, passed=margin >= 0, details={"X_st_R": const["X_st_R"]},
    )


# ---------------------------------------------------------------------------
# eigenvalue comparison with constant growth rates


def constant_rate_eigenvalue(g0: float, b1: float, eta0: float) -> float:
    """lambda for constant g0, b1, g1 = b0 = 0: the Perron root of [[0, g0], [b1 (eta0 - 1), 0]]."""
    return math.sqrt(g0 * b1 * (eta0 - 1.0))


def check_gabriel_shape(model: GFModel) -> None:
    problems = []
    if not (model.g1.is_constant and model.g1.mean == 0.0):
        problems.append("g1 must vanish")
    if not (model.b0.is_constant and model.b0.mean == 0.0):
        problems.append("b0 must vanish")
    if not model.b1.is_constant:
        problems.append("b1 must be constant")
    if not model.kappa.is_symmetric():
        problems.append("kappa must be symmetric")
    if problems:
        raise ModelShapeError("comparison needs " + ", ".join(problems))


def frozen_growth_model(model: GFModel, g0_value: float) -> GFModel:
    T = model.period
    return GFModel(
        PeriodicCoefficient(g0_value, period=T), model.g1, model.b0, model.b1, model.kappa,
        model.grid, model.alpha_weight, model.c_floor, model.enforce_floors,
    )


@dataclass(frozen=True)
class GabrielResult:
    lam_bar_g0: float
    lam_g0_bar: float
    lambda_F: float
    allowance: float
    tol: float
    holds: bool
    lam_bar_g0_exact: float
    lam_g0_bar_exact: float
    samples: tuple = ()


def gabriel_bounds(model: GFModel, scheme: StepScheme, n_s: int = 17, n_monodromy: int = 4000,
                   power_tol: float = 1e-10) -> GabrielResult:
    """lam_bar(g0) <= lambda_F <= lam(mean g0) with eigenvalues of frozen-rate models.

    The frozen eigenvalues come from power iteration on the assembled autonomous
    propagator over T_ref = 10 / lambda_scale.  The allowance is the measured gap
    between that route and the exact frozen eigenvalue at the mean rate.
    """
    from .floquet import power_iterate

    check_gabriel_shape(model)
    T = model.period
    eta0 = model.eta0
    b1 = model.b1.mean
    V = model.weight_V()
    lambda_F = perron_floquet(model, n_monodromy).lambda_F

    def computed(g_value: float) -> float:
        frozen = frozen_growth_model(model, g_value)
        scale = constant_rate_eigenvalue(g_value, b1, eta0)
        T_ref = 10.0 / scale
        P = assemble(frozen, 0.0, T_ref, scheme)
        eig = power_iterate(P, V, tol=power_tol)
        return math.log(eig.Lambda) / T_ref

    s_vals = np.linspace(0.0, T, n_s)
    g_vals = model.g0(s_vals)
    cache: dict[float, float] = {}
    lam_samples = []
    for g in g_vals:
        key = round(float(g), 15)
        if key not in cache:
            cache[key] = computed(float(g))
        lam_samples.append(cache[key])
    lam_samples = np.array(lam_samples)
    lam_bar = float(np.trapezoid(lam_samples, s_vals) / T)
    g_bar = model.g0.average()
    lam_mean = computed(g_bar)
    exact_mean = constant_rate_eigenvalue(g_bar, b1, eta0)
    exact_samples = np.array([constant_rate_eigenvalue(float(g), b1, eta0) for g in g_vals])
    exact_bar = float(np.trapezoid(exact_samples, s_vals) / T)
    allowance = abs(lam_mean - exact_mean)
    tol = 1e-6 + allowance
    holds = (lam_bar <= lambda_F + tol) and (lambda_F <= lam_mean + tol)
    return GabrielResult(
        lam_bar_g0=lam_bar, lam_g0_bar=lam_mean, lambda_F=lambda_F, allowance=allowance, tol=tol,
        holds=bool(holds), lam_bar_g0_exact=exact_bar, lam_g0_bar_exact=exact_mean,
        samples=tuple(zip(s_vals.tolist(), lam_samples.tolist())),
    )
