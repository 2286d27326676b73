"""
Velocity Laws and Initial Conditions

One-particle velocity laws (densities on the real line) and the initial
ensembles the simulator starts from.

Velocity laws:
    - maxwellian: gamma itself
    - gaussian: mean, var
    - bimodal: equal mixture of N(+offset, var) and N(-offset, var)

Initial conditions (the "initial" block of an experiment config):
    - {"kind": "stationary"}: a draw from Gamma
    - {"kind": "product", "eta": 5, "law": {...}}: Poisson(eta) particles,
      i.i.d. velocities from the law
    - {"kind": "fixed", "n": 1, "law": {...}}: exactly n particles
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from src.kac.model import (
    MAXWELLIAN_VARIANCE,
    GrandCanonicalRef,
    ModelParams,
    ParticleState,
    maxwellian_cdf,
    maxwellian_pdf,
    sample_maxwellian,
)


class VelocityLaw(ABC):
    """A probability density for a single velocity."""

    kind = "abstract"

    @abstractmethod
    def pdf(self, v: np.ndarray) -> np.ndarray:
        """Density at v."""

    @abstractmethod
    def cdf(self, v: np.ndarray) -> np.ndarray:
        """Cumulative distribution at v."""

    @abstractmethod
    def sample(self, rng, size: int) -> np.ndarray:
        """Draw size velocities."""

    @abstractmethod
    def second_moment(self) -> float:
        """Mean of v^2."""

    @abstractmethod
    def to_dict(self) -> dict:
        """JSON-ready description."""

    @staticmethod
    def from_dict(raw: Optional[dict]) -> "VelocityLaw":
        """Build a law from its config description (None means maxwellian)."""
        if raw is None:
            return Maxwellian()
        kind = raw.get("kind", "maxwellian")
        if kind == "maxwellian":
            return Maxwellian()
        if kind == "gaussian":
            return Gaussian(
                mean=float(raw.get("mean", 0.0)),
                var=float(raw.get("var", MAXWELLIAN_VARIANCE)),
            )
        if kind == "bimodal":
            return Bimodal(
                offset=float(raw.get("offset", 0.5)),
                var=float(raw.get("var", 0.05)),
            )
        raise ValueError(f"Unknown velocity law '{kind}'")


class Maxwellian(VelocityLaw):
    kind = "maxwellian"

    def pdf(self, v):
        return maxwellian_pdf(v)

    def cdf(self, v):
        return maxwellian_cdf(v)

    def sample(self, rng, size):
        return sample_maxwellian(rng, size)

    def second_moment(self):
        return MAXWELLIAN_VARIANCE

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class Gaussian(VelocityLaw):
    mean: float = 0.0
    var: float = MAXWELLIAN_VARIANCE

    kind = "gaussian"

    def __post_init__(self):
        if self.var <= 0:
            raise ValueError(f"Gaussian variance must be > 0, got {self.var}")

    def pdf(self, v):
        return stats.norm.pdf(v, loc=self.mean, scale=math.sqrt(self.var))

    def cdf(self, v):
        return stats.norm.cdf(v, loc=self.mean, scale=math.sqrt(self.var))

    def sample(self, rng, size):
        return self.mean + math.sqrt(self.var) * np.asarray(rng.standard_normal(size))

    def second_moment(self):
        return self.mean**2 + self.var

    def to_dict(self):
        return {"kind": self.kind, "mean": self.mean, "var": self.var}


@dataclass(frozen=True)
class Bimodal(VelocityLaw):
    offset: float = 0.5
    var: float = 0.05

    kind = "bimodal"

    def __post_init__(self):
        if self.var <= 0:
            raise ValueError(f"Bimodal variance must be > 0, got {self.var}")

    def pdf(self, v):
        sd = math.sqrt(self.var)
        return 0.5 * (
            stats.norm.pdf(v, loc=self.offset, scale=sd)
            + stats.norm.pdf(v, loc=-self.offset, scale=sd)
        )

    def cdf(self, v):
        sd = math.sqrt(self.var)
        return 0.5 * (
            stats.norm.cdf(v, loc=self.offset, scale=sd)
            + stats.norm.cdf(v, loc=-self.offset, scale=sd)
        )

    def sample(self, rng, size):
        signs = np.where(np.asarray(rng.random(size)) < 0.5, -1.0, 1.0)
        return signs * self.offset + math.sqrt(self.var) * np.asarray(
            rng.standard_normal(size)
        )

    def second_moment(self):
        return self.offset**2 + self.var

    def to_dict(self):
        return {"kind": self.kind, "offset": self.offset, "var": self.var}


class InitialCondition(ABC):
    """Sampler of initial configurations."""

    @abstractmethod
    def sample(self, rng) -> ParticleState:
        """Draw one configuration."""

    @abstractmethod
    def to_dict(self) -> dict:
        """JSON-ready description."""

    def expected_n(self) -> float:
        raise NotImplementedError

    def expected_energy(self) -> float:
        """Expected kinetic sum sum v_i^2."""
        raise NotImplementedError

    @staticmethod
    def from_dict(raw: Optional[dict], params: ModelParams) -> "InitialCondition":
        raw = raw or {"kind": "stationary"}
        kind = raw.get("kind", "stationary")
        if kind == "stationary":
            return StationaryStart(params)
        law = VelocityLaw.from_dict(raw.get("law"))
        if kind == "product":
            return ProductStart(eta=float(raw["eta"]), law=law)
        if kind == "fixed":
            return FixedCountStart(n=int(raw["n"]), law=law)
        raise ValueError(f"Unknown initial condition '{kind}'")


class StationaryStart(InitialCondition):
    def __init__(self, params: ModelParams):
        self.params = params
        self._reference = GrandCanonicalRef(params)

    def sample(self, rng):
        return self._reference.sample_state(rng)

    def expected_n(self):
        return self.params.mean_n

    def expected_energy(self):
        return self.params.mean_n * MAXWELLIAN_VARIANCE

    def to_dict(self):
        return {"kind": "stationary"}


@dataclass(frozen=True)
class ProductStart(InitialCondition):
    """Poisson(eta) particles with i.i.d. velocities from law."""

    eta: float
    law: VelocityLaw = Maxwellian()

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")

    def sample(self, rng):
        n = int(rng.poisson(self.eta))
        return ParticleState(self.law.sample(rng, n).tolist() if n else [])

    def expected_n(self):
        return self.eta

    def expected_energy(self):
        return self.eta * self.law.second_moment()

    def to_dict(self):
        return {"kind": "product", "eta": self.eta, "law": self.law.to_dict()}


@dataclass(frozen=True)
class FixedCountStart(InitialCondition):
    """Exactly n particles with i.i.d. velocities from law."""

    n: int
    law: VelocityLaw = Maxwellian()

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"n must be >= 0, got {self.n}")

    def sample(self, rng):
        return ParticleState(self.law.sample(rng, self.n).tolist() if self.n else [])

    def expected_n(self):
        return float(self.n)

    def expected_energy(self):
        return self.n * self.law.second_moment()

    def to_dict(self):
        return {"kind": "fixed", "n": self.n, "law": self.law.to_dict()}
