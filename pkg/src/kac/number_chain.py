"""
Number Chain Module

Deterministic oracles for particle-number and energy dynamics. Collisions
never change N or the kinetic sum, so these laws hold for every lambda.

Features:
    - Truncated birth-death ODE for the number law, integrated by fixed-step RK4
    - Closed-form N(t), E(t) = sum <v_i^2>, e(t) = E/N (Newton cooling)
    - Falling factorial moments and their exact exponential cascade
    - Product-state thermostat flow (eta(t), g(v, t)), exact for lambda = 0

Defaults:
    - Truncation N_max = ceil(mu/rho + 10 sqrt(mu/rho) + 20)
    - RK4 step dt = 0.1 / (mu + rho N_max)
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special

from src.kac.distributions import (
    FixedCountStart,
    InitialCondition,
    ProductStart,
    StationaryStart,
    VelocityLaw,
)
from src.kac.grid import VelocityGrid
from src.kac.model import MAXWELLIAN_VARIANCE, ModelParams, gc_number_weight, maxwellian_pdf
from src.utils.errors import TruncationError
from src.utils.logger import logger

TAIL_TOLERANCE = 1e-9
MASS_TOLERANCE = 1e-6


@dataclass
class NumberDistribution:
    """Probabilities p_0..p_{N_max} of the particle number."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.ndim != 1 or self.probs.size == 0:
            raise ValueError("probs must be a non-empty vector")
        if np.any(self.probs < -1e-15):
            raise ValueError("probabilities must be non-negative")

    @classmethod
    def poisson(cls, eta: float, n_max: int) -> "NumberDistribution":
        return cls(np.atleast_1d(gc_number_weight(np.arange(n_max + 1), ModelParams(mu=eta, rho=1.0))))

    @classmethod
    def delta(cls, n: int, n_max: int) -> "NumberDistribution":
        probs = np.zeros(n_max + 1)
        probs[n] = 1.0
        return cls(probs)

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    @property
    def total_mass(self) -> float:
        return math.fsum(self.probs)

    @property
    def tail_deficit(self) -> float:
        return 1.0 - self.total_mass

    def mean(self) -> float:
        return float(np.dot(np.arange(self.probs.size), self.probs))

    def variance(self) -> float:
        n = np.arange(self.probs.size)
        return float(np.dot(n * n, self.probs) - self.mean() ** 2)

    def factorial_moment(self, r: int) -> float:
        return factorial_moment(self, r)

    def total_variation(self, other: "NumberDistribution") -> float:
        size = max(self.probs.size, other.probs.size)
        a = np.pad(self.probs, (0, size - self.probs.size))
        b = np.pad(other.probs, (0, size - other.probs.size))
        return 0.5 * float(np.sum(np.abs(a - b)))


def default_truncation(params: ModelParams) -> int:
    eta = params.mean_n
    return int(math.ceil(eta + 10 * math.sqrt(eta) + 20))


def default_step(params: ModelParams, n_max: int) -> float:
    return 0.1 / (params.mu + params.rho * n_max)


def birth_death_rhs(p: NumberDistribution, params: ModelParams, extended: bool = False) -> np.ndarray:
    """Time derivative of the number law.

    dp_N/dt = -(N rho + mu) p_N + mu p_{N-1} + rho (N+1) p_{N+1}, with
    dp_0/dt = -mu p_0 + rho p_1 and p_{N_max+1} = 0.

    Args:
        p: Current law
        params: Model rates
        extended: Also return the inflow into N_max + 1, so the returned
            stencil sums to zero

    Returns:
        np.ndarray: Derivative of length N_max + 1 (N_max + 2 if extended)
    """
    probs = p.probs
    n = np.arange(probs.size)
    dp = -(params.rho * n + params.mu) * probs
    dp[1:] += params.mu * probs[:-1]
    dp[:-1] += params.rho * n[1:] * probs[1:]
    if extended:
        return np.append(dp, params.mu * probs[-1])
    return dp


def evolve_number_dist(
    p0: NumberDistribution,
    params: ModelParams,
    t: float,
    dt: Optional[float] = None,
    tolerance: float = TAIL_TOLERANCE,
) -> NumberDistribution:
    """Integrate the truncated chain to time t with classical RK4.

    Raises:
        ValueError: If dt times the largest rate is not below 0.5
        TruncationError: If the tail deficit ends above tolerance
    """
    return number_law_trajectory(p0, params, [t], dt, tolerance)[0]


def number_law_trajectory(
    p0: NumberDistribution,
    params: ModelParams,
    checkpoints: Sequence[float],
    dt: Optional[float] = None,
    tolerance: float = TAIL_TOLERANCE,
) -> list:
    """RK4 solution of the truncated chain at increasing checkpoints."""
    times = np.asarray(checkpoints, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("Checkpoints must be non-negative and non-decreasing")
    n_max = p0.n_max
    step = default_step(params, n_max) if dt is None else dt
    if step <= 0 or step * (params.mu + params.rho * n_max) >= 0.5:
        raise ValueError(f"Step {step} too large for N_max={n_max}")

    deficit0 = p0.tail_deficit
    current = NumberDistribution(p0.probs.copy())
    now = 0.0
    laws = []
    for target in times:
        remaining = target - now
        steps = int(math.ceil(remaining / step - 1e-12)) if remaining > 0 else 0
        h = remaining / steps if steps else 0.0
        probs = current.probs
        for _ in range(steps):
            k1 = birth_death_rhs(NumberDistribution(probs), params)
            k2 = birth_death_rhs(NumberDistribution(probs + 0.5 * h * k1), params)
            k3 = birth_death_rhs(NumberDistribution(probs + 0.5 * h * k2), params)
            k4 = birth_death_rhs(NumberDistribution(probs + h * k3), params)
            probs = probs + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        current = NumberDistribution(np.clip(probs, 0.0, None))
        now = float(target)
        leaked = current.tail_deficit - deficit0
        if leaked > tolerance:
            logger.error(f"[NumberChain] Tail deficit {leaked:.3e} at t={now:.4g}")
            raise TruncationError(leaked, tolerance, n_max)
        laws.append(current)
    logger.debug(f"[NumberChain] Evolved N_max={n_max} chain to t={now:.4g} with dt={step:.3e}")
    return laws


@dataclass(frozen=True)
class Moments:
    n: float
    energy: float
    energy_per_particle: float


def closed_form_moments(n0: float, e0: float, params: ModelParams, t: float) -> Moments:
    """N(t), E(t) and e(t) = E(t)/N(t) from the linear moment equations.

    N(t) = exp(-rho t) N0 + (1 - exp(-rho t)) mu/rho and
    E(t) = exp(-rho t) E0 + (1 - exp(-rho t)) mu/(2 pi rho), with E the
    expected kinetic sum sum <v_i^2>.

    Raises:
        ValueError: If N(t) = 0, where e(t) is undefined
    """
    decay = math.exp(-params.rho * t)
    n_t = decay * n0 + (1 - decay) * params.mean_n
    e_t = decay * e0 + (1 - decay) * params.mean_n * MAXWELLIAN_VARIANCE
    if n_t <= 0:
        raise ValueError("Energy per particle undefined: N(t) = 0")
    return Moments(n=n_t, energy=e_t, energy_per_particle=e_t / n_t)


def newton_rate(moments: Moments, params: ModelParams) -> float:
    """Right-hand side of de/dt = (mu/N)(1/(2 pi) - e)."""
    return params.mu / moments.n * (MAXWELLIAN_VARIANCE - moments.energy_per_particle)


def moments_table(n0: float, e0: float, params: ModelParams, times: Sequence[float]) -> list:
    """Rows (t, N_mean, E_mean, e) for the closed-form moments CSV; e is nan while N(t) = 0."""
    rows = []
    for t in times:
        try:
            m = closed_form_moments(n0, e0, params, float(t))
        except ValueError:
            rows.append([float(t), 0.0, 0.0, math.nan])
            continue
        rows.append([float(t), m.n, m.energy, m.energy_per_particle])
    return rows


def initial_number_law(
    initial: InitialCondition, params: ModelParams, n_max: Optional[int] = None
) -> NumberDistribution:
    """Number law of an initial condition.

    Without an explicit n_max the truncation is widened to cover both the
    initial law and the reservoir.
    """
    if n_max is not None:
        if isinstance(initial, FixedCountStart) and initial.n > n_max:
            raise ValueError(f"n_max={n_max} is below the initial count {initial.n}")
        if isinstance(initial, StationaryStart):
            return NumberDistribution.poisson(params.mean_n, n_max)
        if isinstance(initial, ProductStart):
            return NumberDistribution.poisson(initial.eta, n_max)
        if isinstance(initial, FixedCountStart):
            return NumberDistribution.delta(initial.n, n_max)
    n_max = default_truncation(params)
    if isinstance(initial, StationaryStart):
        return NumberDistribution.poisson(params.mean_n, n_max)
    if isinstance(initial, ProductStart):
        eta = initial.eta
        n_max = max(n_max, int(math.ceil(eta + 10 * math.sqrt(eta) + 20)))
        return NumberDistribution.poisson(eta, n_max)
    if isinstance(initial, FixedCountStart):
        return NumberDistribution.delta(initial.n, max(n_max, initial.n + 20))
    raise ValueError(f"No number law for {type(initial).__name__}")


def factorial_moment(p: NumberDistribution, r: int) -> float:
    """Falling factorial moment sum N!/(N-r)! p_N."""
    if r < 0:
        raise ValueError(f"order must be >= 0, got {r}")
    n = np.arange(p.probs.size)
    falling = special.poch(n - r + 1, r)
    falling[n < r] = 0.0
    return float(np.dot(falling, p.probs))


def factorial_moment_coefficients(nr0: Sequence[float], params: ModelParams) -> list:
    """Exponential-cascade coefficients of the factorial moments.

    N_r(t) = sum_j c[r][j] exp(-rho j t), j = 0..r, solving
    dN_r/dt = -rho r N_r + r mu N_{r-1} exactly.
    """
    if not nr0 or not math.isclose(nr0[0], 1.0, rel_tol=0, abs_tol=1e-12):
        raise ValueError("N_0(0) must equal 1")
    rho, mu = params.rho, params.mu
    coefficients = [[1.0]]
    for r in range(1, len(nr0)):
        previous = coefficients[-1]
        row = [r * mu * c / (rho * (r - j)) for j, c in enumerate(previous)]
        row.append(nr0[r] - math.fsum(row))
        coefficients.append(row)
    return coefficients


def factorial_moment_flow(nr0: Sequence[float], params: ModelParams, t: float) -> list:
    """N_r(t) for r = 0..len(nr0)-1 from initial factorial moments."""
    coefficients = factorial_moment_coefficients(list(nr0), params)
    return [
        math.fsum(c * math.exp(-params.rho * j * t) for j, c in enumerate(row))
        for row in coefficients
    ]


@dataclass
class ProductState:
    """Poisson(eta) particle number with i.i.d. velocities of density g.

    Attributes:
        eta: Mean particle number
        g: One-particle density sampled on grid
        grid: Shared velocity grid
    """

    eta: float
    g: np.ndarray
    grid: VelocityGrid

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.g.shape != (self.grid.size,):
            raise ValueError("g does not match the grid")
        if np.any(self.g < 0):
            raise ValueError("g must be non-negative")
        mass = self.grid.integrate(self.g)
        if abs(mass - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"g integrates to {mass:.8f}, expected 1")

    @classmethod
    def from_law(cls, eta: float, law: VelocityLaw, grid: Optional[VelocityGrid] = None) -> "ProductState":
        grid = grid or VelocityGrid()
        return cls(eta=eta, g=law.pdf(grid.points), grid=grid)

    def relative_density(self, params: ModelParams) -> np.ndarray:
        """l(v) = (rho/mu) eta g(v)."""
        return self.eta / params.mean_n * self.g


def product_state_flow(ps0: ProductState, params: ModelParams, t: float) -> ProductState:
    """Evolve a product state under the thermostat (exact when lambda = 0).

    eta(t) = exp(-rho t) eta + (1 - exp(-rho t)) mu/rho and
    eta(t) g(t) = exp(-rho t) eta g + (1 - exp(-rho t)) (mu/rho) gamma,
    i.e. l(t) = exp(-rho t) l + (1 - exp(-rho t)) gamma.
    """
    decay = math.exp(-params.rho * t)
    eta_t = decay * ps0.eta + (1 - decay) * params.mean_n
    if eta_t <= 0:
        # empty reservoir and empty start: g is irrelevant
        return ProductState(0.0, ps0.g.copy(), ps0.grid)
    gamma = maxwellian_pdf(ps0.grid.points)
    g_t = (decay * ps0.eta * ps0.g + (1 - decay) * params.mean_n * gamma) / eta_t
    return ProductState(eta_t, g_t, ps0.grid)
