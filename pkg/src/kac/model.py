"""
Model Core Module

Shared primitives of the grand-canonical Kac model: rate parameters, the
Maxwellian reference density, grand-canonical (Poisson) number weights and
the Kac collision rule.

Conventions:
    - Inverse temperature fixed at BETA = 2*pi, so the one-particle
      Maxwellian is gamma(v) = exp(-pi v^2) with variance 1/(2 pi).
    - Particles enter at rate mu, each leaves at rate rho, each unordered
      pair collides at rate lambda_tilde = lambda * rho / mu.
    - Poisson weights are evaluated in log space (gammaln) so that
      mu/rho in the hundreds does not overflow.

Dependencies:
    - numpy: vectorised densities and sampling
    - scipy.special / scipy.stats: log-gamma, normal CDF
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import special, stats

from src.utils.logger import logger

BETA = 2.0 * math.pi
MAXWELLIAN_VARIANCE = 1.0 / BETA
MAXWELLIAN_SD = math.sqrt(MAXWELLIAN_VARIANCE)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class ModelParams:
    """Rates of the master equation.

    Attributes:
        mu: In-rate (1/time), > 0. Zero is accepted only with lam == 0,
            which describes a pure-death process.
        rho: Per-particle out-rate (1/time), > 0
        lam: Per-particle collision intensity (1/time), >= 0
    """

    mu: float
    rho: float
    lam: float = 0.0

    def __post_init__(self):
        for name in ("mu", "rho", "lam"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if self.rho <= 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if self.mu == 0 and self.lam > 0:
            raise ValueError("mu = 0 requires lambda = 0 (lambda_tilde undefined)")

    @property
    def lambda_tilde(self) -> float:
        """Pair collision rate lambda * rho / mu."""
        if self.lam == 0:
            return 0.0
        return self.lam * self.rho / self.mu

    @property
    def mean_n(self) -> float:
        """Steady-state mean particle number mu / rho."""
        return self.mu / self.rho

    def with_mu(self, mu: float) -> "ModelParams":
        """Same rho and lambda at a different reservoir size."""
        return ModelParams(mu=mu, rho=self.rho, lam=self.lam)

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "rho": self.rho,
            "lambda": self.lam,
            "lambda_tilde": self.lambda_tilde,
        }


@dataclass
class ParticleState:
    """Current configuration: velocity list (length N) and time."""

    velocities: list = field(default_factory=list)
    time: float = 0.0

    def __post_init__(self):
        self.velocities = [float(v) for v in self.velocities]
        if not all(math.isfinite(v) for v in self.velocities):
            raise ValueError("All velocities must be finite")
        if self.time < 0:
            raise ValueError(f"time must be >= 0, got {self.time}")

    @property
    def n(self) -> int:
        return len(self.velocities)

    def kinetic_sum(self) -> float:
        """Sum of squared velocities."""
        return math.fsum(v * v for v in self.velocities)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.velocities, dtype=float)

    def copy(self) -> "ParticleState":
        return ParticleState(list(self.velocities), self.time)


def maxwellian_pdf(v: ArrayLike) -> ArrayLike:
    """Reference density gamma(v) = exp(-pi v^2)."""
    return np.exp(-math.pi * np.square(v))


def maxwellian_cdf(v: ArrayLike) -> ArrayLike:
    """Cumulative distribution of gamma."""
    return stats.norm.cdf(v, loc=0.0, scale=MAXWELLIAN_SD)


def sample_maxwellian(rng, size: Optional[int] = None) -> ArrayLike:
    """Draw velocities from gamma (mean 0, variance 1/(2 pi)).

    Args:
        rng: numpy Generator, or any stream exposing standard_normal()
        size: None for a single float, otherwise the number of draws
    """
    if size is None:
        return MAXWELLIAN_SD * float(rng.standard_normal())
    return MAXWELLIAN_SD * np.asarray(rng.standard_normal(size))


def kac_collide(v: ArrayLike, w: ArrayLike, theta: ArrayLike) -> tuple:
    """Rotate the pair (v, w) by angle theta.

    Returns:
        tuple: (v cos(theta) - w sin(theta), v sin(theta) + w cos(theta)),
            which preserves v^2 + w^2.
    """
    c = np.cos(theta)
    s = np.sin(theta)
    return v * c - w * s, v * s + w * c


def log_number_weight(n: ArrayLike, params: ModelParams) -> ArrayLike:
    """Logarithm of the Poisson(mu/rho) weight a_N."""
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValueError("Particle numbers must be >= 0")
    eta = params.mean_n
    if eta == 0:
        return np.where(n == 0, 0.0, -np.inf)
    return n * math.log(eta) - eta - special.gammaln(n + 1)


def gc_number_weight(n: ArrayLike, params: ModelParams) -> ArrayLike:
    """Grand-canonical weight a_N = (mu/rho)^N exp(-mu/rho) / N!."""
    result = np.exp(log_number_weight(n, params))
    if np.ndim(result) == 0:
        return float(result)
    return result


class GrandCanonicalRef:
    """Steady state Gamma: Poisson(mu/rho) particle number, i.i.d. gamma velocities.

    Args:
        params: Model rates
    """

    def __init__(self, params: ModelParams):
        self.params = params

    def weight(self, n: int) -> float:
        return gc_number_weight(n, self.params)

    def log_weight(self, n: ArrayLike) -> ArrayLike:
        return log_number_weight(n, self.params)

    def weights(self, n_max: int) -> np.ndarray:
        """Weights a_0..a_{n_max}."""
        return np.atleast_1d(gc_number_weight(np.arange(n_max + 1), self.params))

    def density(self, v: ArrayLike) -> ArrayLike:
        return maxwellian_pdf(v)

    def sample_state(self, rng) -> ParticleState:
        """Draw one configuration from Gamma."""
        n = int(rng.poisson(self.params.mean_n))
        velocities = sample_maxwellian(rng, n).tolist() if n else []
        return ParticleState(velocities)

    def recursion_residual(self, n_max: int) -> float:
        """Largest |rho N a_N - mu a_{N-1}| over N = 1..n_max."""
        a = self.weights(n_max)
        n = np.arange(1, n_max + 1)
        residual = self.params.rho * n * a[1:] - self.params.mu * a[:-1]
        worst = float(np.max(np.abs(residual)))
        logger.debug(f"[Model] Weight recursion residual up to N={n_max}: {worst:.2e}")
        return worst
