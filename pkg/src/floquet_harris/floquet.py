"""Period-map eigenelements, their extension to a periodic family, and decay-rate estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, GridMismatchError, NumericalFailure
from .measure_space import (
    DiscreteFunction,
    DiscreteMeasure,
    pairing,
    weighted_sup_norm,
    weighted_tv_norm,
)
from .propagator import Propagator, StepScheme, assemble, compose

_KEY_DIGITS = 12


class PropagatorProvider:
    """Hands out M_{a,b} for a periodic model, reusing matrices across shifts by whole periods.

    Requesting the same interval twice returns the same matrix.  For
    time-independent models the cache key is the span alone.
    """

    def __init__(self, model, scheme: StepScheme):
        self.model = model
        self.scheme = scheme
        self._cache: dict[tuple[float, float], np.ndarray] = {}
        self.assemblies = 0
        self.clamps = 0

    @property
    def grid(self):
        return self.model.grid

    @property
    def period(self) -> float:
        return self.model.period

    def _key(self, a: float, b: float) -> tuple[float, float]:
        span = round(b - a, _KEY_DIGITS)
        if getattr(self.model, "is_autonomous", False):
            return (0.0, span)
        phase = math.fmod(a, self.period)
        if phase < 0:
            phase += self.period
        phase = round(phase, _KEY_DIGITS)
        if phase == round(self.period, _KEY_DIGITS):
            phase = 0.0
        return (phase, span)

    def get(self, a: float, b: float) -> Propagator:
        key = self._key(a, b)
        if key not in self._cache:
            P = assemble(self.model, a, b, self.scheme)
            self._cache[key] = P.matrix
            self.assemblies += 1
            self.clamps += P.clamp_count
        return Propagator(self.grid, a, b, self._cache[key])

    def chain(self, times) -> Propagator:
        """M_{t_0, t_last} as the ordered product of the pieces between consecutive times."""
        times = list(times)
        P = self.get(times[0], times[1])
        for a, b in zip(times[1:-1], times[2:]):
            P = compose(P, self.get(a, b))
        return P


def sample_times(s0: float, T: float, n_samples: int) -> np.ndarray:
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    t = s0 + T * np.arange(n_samples) / (n_samples - 1)
    t[-1] = s0 + T
    return t


@dataclass(frozen=True, eq=False)
class PeriodMapEigen:
    Lambda: float
    h: DiscreteFunction
    gamma: DiscreteMeasure
    residual: float
    iterations: int
    gamma_residual: float = 0.0


def power_iterate(P: Propagator, V: DiscreteFunction, tol: float = 1e-10,
                  max_iter: int = 200_000) -> PeriodMapEigen:
    """Perron triplet of a nonnegative matrix, normalized by ||h||_{B(V)} = 1 and <gamma, h> = 1.

    The iteration stops once Lambda * ||f_{k+1} - f_k||_{B(V)} <= tol, which
    bounds the eigen-residual ||P h - Lambda h||_{B(V)} by tol.
    """
    if P.grid != V.grid:
        raise GridMismatchError("propagator and weight live on different grids")
    M = P.matrix
    Vv = np.asarray(V.values)
    if np.any(M < 0):
        raise NumericalFailure("power iteration needs a nonnegative matrix")

    f = Vv.copy()
    Lam = 0.0
    for it in range(1, max_iter + 1):
        g = M @ f
        Lam = float(np.max(np.abs(g) / Vv))
        if not Lam > 0:
            raise NumericalFailure("period map annihilated the positive start vector")
        g /= Lam
        change = float(np.max(np.abs(g - f) / Vv))
        f = g
        if Lam * change <= tol:
            break
    else:
        raise ConvergenceError(f"power iteration did not reach tol={tol:g} in {max_iter} steps")
    h = f
    residual = float(np.max(np.abs(M @ h - Lam * h) / Vv))
    if np.any(h <= 0):
        raise NumericalFailure(f"Perron vector not strictly positive, min = {h.min():.3e}")

    w = P.grid.trapezoid_weights()
    m = w / float(np.dot(w, Vv))
    gamma_lam = 0.0
    for _ in range(max_iter):
        q = m @ M
        gamma_lam = float(np.dot(np.abs(q), Vv))
        q /= gamma_lam
        change = float(np.dot(np.abs(q - m), Vv))
        m = q
        if gamma_lam * change <= tol:
            break
    else:
        raise ConvergenceError(f"transpose iteration did not reach tol={tol:g} in {max_iter} steps")
    m = m / float(np.dot(m, h))
    gamma_residual = float(np.dot(np.abs(m @ M - Lam * m), Vv))
    return PeriodMapEigen(
        Lam, DiscreteFunction(P.grid, h), DiscreteMeasure(P.grid, m), residual, it, gamma_residual
    )


@dataclass(frozen=True, eq=False)
class FloquetFamily:
    lambda_F: float
    times: np.ndarray
    h_samples: tuple
    gamma_samples: tuple
    V: DiscreteFunction
    s0: float
    T: float

    @property
    def spacing(self) -> float:
        return self.T / (len(self.times) - 1)

    def index(self, t: float) -> int:
        """Nearest sample index for time t, wrapping periodically."""
        n = len(self.times) - 1
        phase = ((t - self.s0) / self.spacing) % n
        k = int(round(phase)) % n
        return k

    def h_at(self, t: float) -> DiscreteFunction:
        return self.h_samples[self.index(t)]

    def gamma_at(self, t: float) -> DiscreteMeasure:
        return self.gamma_samples[self.index(t)]

    def endpoint_mismatch(self) -> tuple[float, float]:
        dh = DiscreteFunction(self.V.grid, self.h_samples[-1].values - self.h_samples[0].values)
        dg = DiscreteMeasure(self.V.grid, self.gamma_samples[-1].masses - self.gamma_samples[0].masses)
        return weighted_sup_norm(dh, self.V), weighted_tv_norm(dg, self.V)


def extend_family(provider, eig: PeriodMapEigen, s0: float, T: float, n_samples: int,
                  V: DiscreteFunction) -> FloquetFamily:
    """Transport (h, gamma) of the period map at s0 to every sample time with exponential discount.

    h is pulled back from s0 + T and gamma pushed forward from s0, then each pair is
    renormalized to ||h_t||_{B(V)} = <gamma_t, h_t> = 1.  The period map behind
    ``eig`` must be the product of the same pieces for the loop to close exactly.
    """
    times = sample_times(s0, T, n_samples)
    lam = math.log(eig.Lambda) / T
    pieces = [provider.get(a, b).matrix for a, b in zip(times[:-1], times[1:])]
    disc = [math.exp(-lam * (b - a)) for a, b in zip(times[:-1], times[1:])]

    h_raw = [None] * n_samples
    h_raw[-1] = np.asarray(eig.h.values)
    for k in range(n_samples - 2, -1, -1):
        h_raw[k] = disc[k] * (pieces[k] @ h_raw[k + 1])
    g_raw = [None] * n_samples
    g_raw[0] = np.asarray(eig.gamma.masses)
    for k in range(n_samples - 1):
        g_raw[k + 1] = disc[k] * (g_raw[k] @ pieces[k])

    Vv = np.asarray(V.values)
    grid = V.grid
    hs, gs = [], []
    for h, g in zip(h_raw, g_raw):
        if np.any(h <= 0):
            raise NumericalFailure("family sample h_t lost strict positivity")
        h = h / float(np.max(np.abs(h) / Vv))
        g = g / float(np.dot(g, h))
        hs.append(DiscreteFunction(grid, h))
        gs.append(DiscreteMeasure(grid, g))
    return FloquetFamily(lam, times, tuple(hs), tuple(gs), V, s0, T)


def floquet_family(provider, s0: float, n_samples: int, V: DiscreteFunction,
                   tol: float = 1e-10) -> tuple[FloquetFamily, PeriodMapEigen]:
    """Power-iterate the period map built from the family's own pieces, then extend."""
    T = provider.period
    times = sample_times(s0, T, n_samples)
    eig = power_iterate(provider.chain(times), V, tol=tol)
    return extend_family(provider, eig, s0, T, n_samples, V), eig


@dataclass(frozen=True)
class ConvergenceResult:
    C_hat: float
    omega_hat: float
    times: np.ndarray
    distances: np.ndarray
    rescaled: np.ndarray
    converged_flag: bool = False
    fit_window: tuple = ()
    final_profile: DiscreteMeasure | None = field(default=None, compare=False)

    def csv_rows(self):
        for t, d, r in zip(self.times, self.distances, self.rescaled):
            yield (float(t), float(d), float(r))


def convergence_rate(provider, family: FloquetFamily, mu0: DiscreteMeasure, s: float,
                     horizon: float, n_checkpoints: int, transient_fraction: float = 0.2,
                     floor: float = 1e-14) -> ConvergenceResult:
    """Distances d_k = ||exp(-lambda_F (t_k - s)) mu M_{s,t_k} - <mu, h_s> gamma_{t_k}||_{M(V)}.

    The measure advances piece by piece on the family's own sample lattice, so
    the checkpoint spacing must be a whole number of family spacings.  The rate
    is a least-squares fit of log d against t - s after dropping the transient.
    """
    T = family.T
    periods = horizon / T
    if abs(periods - round(periods)) > 1e-9 or round(periods) < 1:
        raise ValueError(f"horizon {horizon} must be a positive multiple of the period {T}")
    delta = family.spacing
    total = round(horizon / delta)
    if total % n_checkpoints:
        raise ValueError(
            f"{n_checkpoints} checkpoints do not split {total} family pieces evenly"
        )
    offset = (s - family.s0) / delta
    if abs(offset - round(offset)) > 1e-9:
        raise ValueError(f"start time {s} is not a family sample time")
    per = total // n_checkpoints
    V = family.V
    lam = family.lambda_F
    weight = pairing(mu0, family.h_at(s))
    norm0 = weighted_tv_norm(mu0, V)
    m = np.asarray(mu0.masses, float)
    times, dists = [], []
    a = s
    for k in range(1, n_checkpoints + 1):
        for _ in range(per):
            b = a + delta
            m = math.exp(-lam * delta) * (m @ provider.get(a, b).matrix)
            a = b
        t_k = s + k * per * delta
        target = weight * np.asarray(family.gamma_at(t_k).masses)
        times.append(t_k)
        dists.append(float(np.dot(np.abs(m - target), V.values)))
    times = np.array(times)
    dists = np.array(dists)
    rescaled = dists / norm0 if norm0 > 0 else dists
    final = DiscreteMeasure(V.grid, m)

    if np.all(dists < floor):
        return ConvergenceResult(0.0, math.inf, times, dists, rescaled, True, (), final)
    start = int(math.floor(transient_fraction * n_checkpoints))
    x = times[start:] - s
    y = dists[start:]
    keep = y >= floor
    if keep.sum() < 2:
        return ConvergenceResult(0.0, math.inf, times, dists, rescaled, True, (), final)
    slope, intercept = np.polyfit(x[keep], np.log(y[keep]), 1)
    return ConvergenceResult(
        float(math.exp(intercept)), float(-slope), times, dists, rescaled, False,
        (float(times[start]), float(times[-1])), final,
    )


def normalized_profile(mu: DiscreteMeasure, h: DiscreteFunction) -> DiscreteMeasure:
    """mu scaled so that <mu, h> = 1."""
    return mu.scaled(1.0 / pairing(mu, h))
