"""
Entropy Module

Relative entropy S(f | Gamma), its coarse-grained estimator and the discrete
log-Sobolev inequalities behind the entropy decay S(t) <= exp(-rho t) S(0).

Coarse graining:
    Velocity cells B_1..B_K with Gaussian masses omega_k turn a state into an
    occupation function F(n_1..n_K) on N^K, relative to independent
    Poisson(alpha_k) counts with alpha_k = mu omega_k / rho. Then
        E~ = sum F pi,  S~ = sum F log F pi,
        Psi~ = sum_q alpha_q sum (F(n + e_q) - F(n)) (log F(n + e_q) - log F(n)) pi
    and the K-cell Poisson inequality reads S~ <= E~ log E~ + Psi~.

Estimation:
    From R replica states, F^(n) is the empirical frequency of occupation
    vector n divided by its Poisson weight; the plug-in S_B sums p^ log F^ over
    observed vectors. The estimator is biased upward by roughly
    (observed vectors - 1) / (2R), which the Miller-Madow option subtracts.
    That first-order bias is also the undersampling diagnostic: once it
    exceeds the tolerance the tail of the occupation law is unresolved, the
    true bias is several times larger, and the Monte Carlo verdict fails.
    At K = 8 and R = 1e5 this happens for mu/rho well above 1.

Dependencies:
    - numpy: occupation vectors, bootstrap
    - scipy.stats: Poisson and binomial weights, Gaussian quantiles
    - scipy.integrate: cumulative cell masses of gridded densities
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate, stats

from src.kac.distributions import ProductStart
from src.kac.grid import VelocityGrid
from src.kac.model import MAXWELLIAN_SD, ModelParams, maxwellian_cdf
from src.kac.number_chain import NumberDistribution, ProductState, product_state_flow
from src.kac.simulator import simulate_replicas
from src.utils.errors import NumericalContractError
from src.utils.logger import logger

DEFAULT_CELLS = 8
POISSON_TAIL = 1e-14
INEQUALITY_SLACK = 1e-12
MIN_REPLICAS = 1000
BOOTSTRAP_RESAMPLES = 200
BOOTSTRAP_STREAM = 7919
STAT_SIGMAS = 3.0
BIAS_TOLERANCE = 0.01


class InequalityCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool
    dominated: Optional[bool] = None

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def _check(lhs: float, rhs: float, dominated: Optional[bool] = None) -> InequalityCheck:
    return InequalityCheck(lhs, rhs, bool(lhs <= rhs + INEQUALITY_SLACK), dominated)


def _xlogx(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


@dataclass(frozen=True)
class CellPartition:
    """Ordered velocity cells split at the finite inner edges.

    Cell k covers [edge_{k-1}, edge_k), the first and last cells are the
    two tails.
    """

    inner_edges: tuple = ()

    def __post_init__(self):
        edges = tuple(float(e) for e in self.inner_edges)
        if any(not math.isfinite(e) for e in edges):
            raise ValueError("inner edges must be finite")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("inner edges must be strictly increasing")
        object.__setattr__(self, "inner_edges", edges)

    @classmethod
    def equal_mass(cls, cells: int = DEFAULT_CELLS) -> "CellPartition":
        """K cells of Gaussian mass 1/K each."""
        if cells < 1:
            raise ValueError(f"need at least one cell, got {cells}")
        quantiles = np.arange(1, cells) / cells
        return cls(tuple(stats.norm.ppf(quantiles, loc=0.0, scale=MAXWELLIAN_SD)))

    @property
    def cells(self) -> int:
        return len(self.inner_edges) + 1

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate(([-np.inf], self.inner_edges, [np.inf]))

    @property
    def masses(self) -> np.ndarray:
        """omega_k, the gamma mass of each cell."""
        return np.diff(maxwellian_cdf(self.edges))

    def alphas(self, params: ModelParams) -> np.ndarray:
        return params.mean_n * self.masses

    def refines(self, other: "CellPartition") -> bool:
        return set(other.inner_edges) <= set(self.inner_edges)

    def assign(self, v) -> np.ndarray:
        return np.searchsorted(np.asarray(self.inner_edges), np.asarray(v, dtype=float), side="right")

    def occupation(self, v) -> np.ndarray:
        return np.bincount(self.assign(v), minlength=self.cells)

    def occupations(self, samples: Sequence[np.ndarray]) -> np.ndarray:
        """Occupation vectors of replica states, shape (R, K)."""
        if len(samples) == 0:
            raise ValueError("no replica states")
        return np.stack([self.occupation(v) for v in samples])

    def law_masses(self, law) -> np.ndarray:
        return np.diff(law.cdf(self.edges))

    def grid_masses(self, g: np.ndarray, grid: VelocityGrid) -> np.ndarray:
        """Cell masses of a gridded density from its interpolated cumulative integral."""
        cumulative = integrate.cumulative_trapezoid(g, grid.points, initial=0.0)
        at_edges = np.interp(np.clip(self.edges, grid.points[0], grid.points[-1]), grid.points, cumulative)
        return np.diff(at_edges) / cumulative[-1]


def _log_poisson(vectors: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    return np.sum(stats.poisson.logpmf(vectors, alphas[None, :]), axis=1)


@dataclass
class OccupationFunction:
    """F on a finite set of occupation vectors, relative to Poisson(alphas) cells.

    Attributes:
        vectors: Occupation vectors, shape (m, K)
        values: F at each vector, >= 0
        alphas: Poisson rate of each cell
        truncated: The vectors enumerate a truncated domain; neighbours
            outside it are dropped from Psi~. Otherwise a vector not listed
            has F = 0.
    """

    vectors: np.ndarray
    values: np.ndarray
    alphas: np.ndarray
    truncated: bool = False
    _log_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=np.int64))
        self.values = np.asarray(self.values, dtype=float)
        self.alphas = np.asarray(self.alphas, dtype=float)
        if self.vectors.shape != (self.values.size, self.alphas.size):
            raise ValueError("vectors, values and alphas do not match")
        if np.any(self.vectors < 0) or np.any(self.values < 0):
            raise ValueError("occupations and values must be non-negative")
        if np.unique(self.vectors, axis=0).shape[0] != self.vectors.shape[0]:
            raise ValueError("occupation vectors must be distinct")
        self._log_weights = _log_poisson(self.vectors, self.alphas)

    @classmethod
    def from_samples(cls, occupations: np.ndarray, alphas: np.ndarray) -> "OccupationFunction":
        """Empirical F^ = frequency / Poisson weight.

        Raises:
            NumericalContractError: If a cell with alpha = 0 is occupied
        """
        occupations = np.asarray(occupations, dtype=np.int64)
        rows, counts = np.unique(occupations, axis=0, return_counts=True)
        log_ref = _log_poisson(rows, np.asarray(alphas, dtype=float))
        if np.any(np.isneginf(log_ref)):
            raise NumericalContractError("a cell with alpha = 0 received samples")
        log_freq = np.log(counts / occupations.shape[0])
        return cls(rows, np.exp(log_freq - log_ref), alphas)

    @property
    def cells(self) -> int:
        return self.alphas.size

    def weights(self) -> np.ndarray:
        return np.exp(self._log_weights)

    def expectation(self) -> float:
        """E~ = sum F pi."""
        return math.fsum(self.values * self.weights())

    def entropy(self) -> float:
        """S~ = sum F log F pi, with 0 log 0 = 0."""
        return math.fsum(_xlogx(self.values) * self.weights())

    def psi(self, support_only: bool = False) -> float:
        """Dirichlet form Psi~.

        Args:
            support_only: Keep only terms whose two vectors are both listed

        Returns:
            float: Psi~ >= 0, +inf if F vanishes at exactly one end of a term
        """
        base = int(self.vectors.max(initial=0)) + 2
        if base ** self.cells >= 2**62:
            raise ValueError("occupation vectors too large to index")
        radix = base ** np.arange(self.cells, dtype=np.int64)
        keys = self.vectors @ radix
        order = np.argsort(keys)
        sorted_keys = keys[order]
        weights = self.weights()
        if not (support_only or self.truncated):
            # unlisted predecessors carry F = 0 next to a positive value
            for q in range(self.cells):
                source = (self.vectors[:, q] > 0) & (self.values > 0)
                target = keys[source] - radix[q]
                pos = np.minimum(np.searchsorted(sorted_keys, target), keys.size - 1)
                if np.any(sorted_keys[pos] != target):
                    return math.inf
        total = []
        for q in range(self.cells):
            target = keys + radix[q]
            pos = np.minimum(np.searchsorted(sorted_keys, target), keys.size - 1)
            found = sorted_keys[pos] == target
            here = self.values
            there = np.where(found, self.values[order[pos]], 0.0)
            use = found | (not (support_only or self.truncated))
            here, there, w = here[use], there[use], weights[use]
            mismatch = (here > 0) != (there > 0)
            if np.any(mismatch & (w > 0)):
                return math.inf
            both = (here > 0) & (there > 0)
            terms = (there[both] - here[both]) * (np.log(there[both]) - np.log(here[both])) * w[both]
            total.append(self.alphas[q] * math.fsum(terms))
        return math.fsum(total)

    def check_lemma(self, support_only: bool = False) -> InequalityCheck:
        """S~ <= E~ log E~ + Psi~."""
        mean = self.expectation()
        return _check(self.entropy(), float(_xlogx(mean)) + self.psi(support_only))


def number_law_relative_entropy(p: NumberDistribution, params: ModelParams) -> float:
    """sum p_N log(p_N / a_N), the relative entropy of a number law to Poisson(mu/rho)."""
    n = np.arange(p.probs.size)
    positive = p.probs > 0
    log_ref = stats.poisson.logpmf(n[positive], params.mean_n)
    return math.fsum(p.probs[positive] * (np.log(p.probs[positive]) - log_ref))


def _poisson_divergence(rate: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Relative entropy of Poisson(rate) to Poisson(reference), elementwise."""
    rate = np.asarray(rate, dtype=float)
    reference = np.asarray(reference, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.where(rate > 0, np.log(rate / reference), 0.0)
    return np.where(rate > 0, rate * log_ratio, 0.0) - rate + reference


def product_state_entropy(ps: ProductState, params: ModelParams) -> float:
    """S = mu/rho - eta + eta log(eta rho / mu) + eta int g log(g / gamma).

    Returns +inf when eta > 0 and mu = 0 (the reference has no particles).
    """
    eta, mean = ps.eta, params.mean_n
    if eta == 0:
        return mean
    if mean == 0:
        return math.inf
    poisson_part = mean - eta + eta * math.log(eta / mean)
    v = ps.grid.points
    positive = ps.g > 0
    log_gamma = -math.pi * v * v
    integrand = np.where(positive, ps.g * (np.log(np.where(positive, ps.g, 1.0)) - log_gamma), 0.0)
    return poisson_part + eta * ps.grid.integrate(integrand)


def product_state_coarse_entropy(ps: ProductState, partition: CellPartition, params: ModelParams) -> float:
    """Coarse-grained entropy of a product state.

    The cell counts are independent Poisson(eta omega'_k), so S_B is the sum
    of the cell-wise Poisson divergences:
    mu/rho - eta + eta log(eta rho / mu) + eta sum omega'_k log(omega'_k / omega_k).
    """
    rates = ps.eta * partition.grid_masses(ps.g, ps.grid)
    return math.fsum(_poisson_divergence(rates, partition.alphas(params)))


def product_occupation_function(
    ps: ProductState, partition: CellPartition, params: ModelParams, n_max: int
) -> OccupationFunction:
    """Exact F of a product state on the vectors with sum n_k <= n_max.

    F(n) = prod_k pi_{eta omega'_k}(n_k) / pi_{alpha_k}(n_k).
    """
    vectors = np.array(
        [c for c in itertools.product(range(n_max + 1), repeat=partition.cells) if sum(c) <= n_max],
        dtype=np.int64,
    )
    rates = ps.eta * partition.grid_masses(ps.g, ps.grid)
    alphas = partition.alphas(params)
    log_values = _log_poisson(vectors, rates) - _log_poisson(vectors, alphas)
    return OccupationFunction(vectors, np.exp(log_values), alphas, truncated=True)


def dirichlet_psi(F: OccupationFunction, alphas: Optional[Sequence[float]] = None) -> float:
    """Psi~ of F, optionally against different cell rates."""
    if alphas is not None:
        F = OccupationFunction(F.vectors, F.values, np.asarray(alphas, dtype=float), F.truncated)
    return F.psi()


class SamplingDiagnostic(NamedTuple):
    """How well R replicas resolve the occupation law."""

    replicas: int
    distinct: int
    tolerance: float = BIAS_TOLERANCE

    @property
    def bias(self) -> float:
        """First-order (Miller-Madow) bias (distinct - 1) / 2R of the plug-in S_B."""
        return (self.distinct - 1) / (2 * self.replicas)

    @property
    def coverage(self) -> float:
        return self.distinct / self.replicas

    @property
    def undersampled(self) -> bool:
        return self.bias > self.tolerance

    def to_dict(self) -> dict:
        return {
            "distinct_vectors": self.distinct,
            "miller_madow_bias": self.bias,
            "bias_tolerance": self.tolerance,
            "undersampled": self.undersampled,
        }


def sampling_diagnostic(occupations: np.ndarray, tolerance: float = BIAS_TOLERANCE) -> SamplingDiagnostic:
    """Count the distinct occupation vectors among the replicas."""
    occupations = np.asarray(occupations, dtype=np.int64)
    if occupations.shape[0] == 0:
        raise ValueError("no replica states")
    if tolerance <= 0:
        raise ValueError(f"bias tolerance must be > 0, got {tolerance}")
    distinct = np.unique(occupations, axis=0).shape[0]
    return SamplingDiagnostic(int(occupations.shape[0]), int(distinct), float(tolerance))


def plug_in_entropy(
    occupations: np.ndarray,
    alphas: np.ndarray,
    miller_madow: bool = False,
    min_replicas: int = MIN_REPLICAS,
) -> float:
    """Plug-in S_B from occupation vectors of R replicas."""
    replicas = len(occupations)
    if replicas < min_replicas:
        raise ValueError(f"need at least {min_replicas} replica states, got {replicas}")
    F = OccupationFunction.from_samples(occupations, alphas)
    estimate = F.entropy()
    if miller_madow:
        estimate -= (F.values.size - 1) / (2 * replicas)
    return estimate


def coarse_grained_entropy(
    samples: Sequence[np.ndarray],
    partition: CellPartition,
    params: ModelParams,
    miller_madow: bool = False,
) -> float:
    """Estimate S(h_B) from replica states (one velocity array per replica).

    Raises:
        ValueError: If fewer than 1000 replica states are given
        NumericalContractError: If a cell with alpha = 0 is occupied
    """
    return plug_in_entropy(partition.occupations(samples), partition.alphas(params), miller_madow)


def bootstrap_entropy(
    occupations: np.ndarray,
    alphas: np.ndarray,
    rng: np.random.Generator,
    resamples: int = BOOTSTRAP_RESAMPLES,
    miller_madow: bool = False,
) -> np.ndarray:
    """Plug-in entropies of replica resamples drawn with replacement."""
    occupations = np.asarray(occupations, dtype=np.int64)
    rows, inverse, _ = np.unique(occupations, axis=0, return_inverse=True, return_counts=True)
    inverse = np.ravel(inverse)
    log_ref = _log_poisson(rows, np.asarray(alphas, dtype=float))
    replicas = occupations.shape[0]
    estimates = np.empty(resamples)
    for b in range(resamples):
        counts = np.bincount(inverse[rng.integers(0, replicas, replicas)], minlength=rows.shape[0])
        seen = counts > 0
        p = counts[seen] / replicas
        estimates[b] = math.fsum(p * (np.log(p) - log_ref[seen]))
        if miller_madow:
            estimates[b] -= (np.count_nonzero(seen) - 1) / (2 * replicas)
    return estimates


def check_poisson_lsi(f: Sequence[float], alpha: float) -> InequalityCheck:
    """Poisson log-Sobolev inequality for f given on {0..n_max}.

    f is continued by its last value until the Poisson tail is below 1e-14;
    the remaining tail mass is folded into the last weight, where f is
    constant, so both sides are exact for the continued function.
    """
    values = np.asarray(f, dtype=float)
    if values.ndim != 1 or values.size == 0 or np.any(values <= 0):
        raise ValueError("f must be a positive vector")
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    n_hi = max(values.size - 1, int(stats.poisson.isf(POISSON_TAIL, alpha)) + 1)
    extended = np.concatenate([values, np.full(n_hi + 1 - values.size, values[-1])])
    weights = stats.poisson.pmf(np.arange(n_hi + 1), alpha)
    weights[-1] += stats.poisson.sf(n_hi, alpha)
    lhs = math.fsum(_xlogx(extended) * weights)
    mean = math.fsum(extended * weights)
    logs = np.log(extended)
    dirichlet = alpha * math.fsum(np.diff(extended) * np.diff(logs) * weights[:-1])
    return _check(lhs, float(_xlogx(mean)) + dirichlet)


def check_two_point(f0: float, f1: float, mu0: float) -> InequalityCheck:
    """Two-point inequality with weights mu0 and mu1 = 1 - mu0."""
    if f0 <= 0 or f1 <= 0:
        raise ValueError("f0 and f1 must be positive")
    if not 0 <= mu0 <= 1:
        raise ValueError(f"mu0 must lie in [0, 1], got {mu0}")
    mu1 = 1.0 - mu0
    lhs = mu0 * f0 * math.log(f0) + mu1 * f1 * math.log(f1)
    mean = mu0 * f0 + mu1 * f1
    rhs = mean * math.log(mean) + mu0 * mu1 * (f1 - f0) * (math.log(f1) - math.log(f0))
    return _check(lhs, rhs)


def check_binomial_lsi(f: Sequence[float], alpha: float, N: int) -> InequalityCheck:
    """Binomial(N, alpha/N) inequality, whose N -> infinity limit is the Poisson one.

    sum f log f pi <= E log E + sum_{n=1}^N n (f(n) - f(n-1)) (log f(n) - log f(n-1)) pi(n).

    The returned `dominated` flag reports pi_{alpha,N}(n) <= 4 pi_alpha(n)
    for alpha < n <= N; it is None while (1 - alpha/N)^N > 2 exp(-alpha).
    """
    values = np.asarray(f, dtype=float)
    if N < 1 or values.shape != (N + 1,):
        raise ValueError(f"f must be given on 0..{N}")
    if np.any(values <= 0):
        raise ValueError("f must be positive")
    if not 0 < alpha <= N:
        raise ValueError(f"need 0 < alpha <= N, got alpha={alpha}, N={N}")
    n = np.arange(N + 1)
    weights = stats.binom.pmf(n, N, alpha / N)
    lhs = math.fsum(_xlogx(values) * weights)
    mean = math.fsum(values * weights)
    dirichlet = math.fsum(n[1:] * np.diff(values) * np.diff(np.log(values)) * weights[1:])
    dominated = None
    if (1 - alpha / N) ** N <= 2 * math.exp(-alpha):
        upper = n > alpha
        dominated = bool(np.all(weights[upper] <= 4 * stats.poisson.pmf(n[upper], alpha)))
    return _check(lhs, float(_xlogx(mean)) + dirichlet, dominated)


@dataclass(frozen=True)
class DecayPoint:
    t: float
    entropy: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.entropy <= self.bound + INEQUALITY_SLACK


def analytic_entropy_decay(ps0: ProductState, params: ModelParams, checkpoints: Sequence[float]) -> list:
    """S(t) of the thermostat product-state flow against exp(-rho t) S(0)."""
    s0 = product_state_entropy(ps0, params)
    points = []
    for t in checkpoints:
        entropy = product_state_entropy(product_state_flow(ps0, params, float(t)), params)
        points.append(DecayPoint(float(t), entropy, math.exp(-params.rho * t) * s0))
    return points


def entropy_production_check(
    ps0: ProductState, params: ModelParams, times: Sequence[float], h: float = 1e-5
) -> float:
    """Largest violation of dS/dt <= -rho S along the product-state flow.

    The derivative is a forward difference with step h; a value <= O(h) means
    the differential form of the decay law holds.
    """
    worst = -math.inf
    for t in times:
        s_now = product_state_entropy(product_state_flow(ps0, params, float(t)), params)
        s_next = product_state_entropy(product_state_flow(ps0, params, float(t) + h), params)
        worst = max(worst, (s_next - s_now) / h + params.rho * s_now)
    return worst


@dataclass
class EntropyPoint:
    t: float
    s_analytic: float
    s_estimate: float
    bootstrap_sd: float
    bound: float
    psi: float
    lemma_ent_slack: float
    sampling: SamplingDiagnostic

    @property
    def holds(self) -> bool:
        """Estimate within STAT_SIGMAS bootstrap SDs of the bound (bias not included)."""
        return self.s_estimate <= self.bound + STAT_SIGMAS * self.bootstrap_sd

    @property
    def undersampled(self) -> bool:
        return self.sampling.undersampled

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "S_analytic": self.s_analytic,
            "S_estimate": self.s_estimate,
            "bootstrap_sd": self.bootstrap_sd,
            "bound": self.bound,
            "psi": self.psi,
            "lemma_ent_slack": self.lemma_ent_slack,
            "holds": self.holds,
            **self.sampling.to_dict(),
        }


@dataclass
class EntropyReport:
    s0: float
    points: list
    analytic: list
    replicas: int
    cells: int

    @property
    def analytic_holds(self) -> bool:
        return all(p.holds for p in self.analytic)

    @property
    def undersampled(self) -> bool:
        return any(p.undersampled for p in self.points)

    @property
    def monte_carlo_holds(self) -> bool:
        """Bound respected at every checkpoint and no checkpoint undersampled."""
        return all(p.holds for p in self.points) and not self.undersampled

    def to_dict(self) -> dict:
        return {
            "S0": self.s0,
            "replicas": self.replicas,
            "cells": self.cells,
            "analytic_holds": self.analytic_holds,
            "undersampled": self.undersampled,
            "monte_carlo_holds": self.monte_carlo_holds,
            "checkpoints": [p.to_dict() for p in self.points],
        }


def entropy_decay_experiment(
    initial: ProductStart,
    params: ModelParams,
    checkpoints: Sequence[float],
    replicas: int,
    seed: int,
    partition: Optional[CellPartition] = None,
    threads: int = 1,
    grid: Optional[VelocityGrid] = None,
    resamples: int = BOOTSTRAP_RESAMPLES,
    miller_madow: bool = False,
    bias_tolerance: float = BIAS_TOLERANCE,
) -> EntropyReport:
    """Entropy decay along the thermostat closed form and along simulation.

    Args:
        initial: Product-state start (eta, velocity law)
        params: Model rates; lambda only affects the Monte Carlo channel
        checkpoints: Strictly increasing times
        replicas: Simulated replicas R (>= 1000)
        seed: Master seed; bootstrap resamples use a separate stream
        partition: Cells of the estimator (default 8 equal-mass cells)
        threads: Simulation worker processes
        grid: Velocity grid of the analytic channel
        resamples: Bootstrap resamples for the statistical tolerance
        miller_madow: Subtract the first-order bias from each estimate
        bias_tolerance: Largest first-order bias (distinct - 1) / 2R before a
            checkpoint counts as undersampled

    Returns:
        EntropyReport: Per-checkpoint estimates against exp(-rho t) S(0),
            S(0) from the closed form of the initial product state. The
            Monte Carlo verdict fails when any checkpoint is undersampled.
    """
    if replicas < MIN_REPLICAS:
        raise ValueError(f"need at least {MIN_REPLICAS} replicas, got {replicas}")
    partition = partition or CellPartition.equal_mass()
    grid = grid or VelocityGrid()
    ps0 = ProductState.from_law(initial.eta, initial.law, grid)
    analytic = analytic_entropy_decay(ps0, params, checkpoints)
    s0 = product_state_entropy(ps0, params)
    logger.info(
        f"[Entropy] S(0)={s0:.6f}, eta={initial.eta}, K={partition.cells}, R={replicas}, seed={seed}"
    )

    series = simulate_replicas(initial, params, checkpoints, replicas, seed, threads=threads, keep_states=True)
    rng = np.random.default_rng([seed, BOOTSTRAP_STREAM])
    alphas = partition.alphas(params)
    points = []
    for t, reference in zip(series.times, analytic):
        occupations = partition.occupations(series.snapshot(t))
        F = OccupationFunction.from_samples(occupations, alphas)
        estimate = plug_in_entropy(occupations, alphas, miller_madow)
        spread = float(np.std(bootstrap_entropy(occupations, alphas, rng, resamples, miller_madow), ddof=1))
        lemma = F.check_lemma(support_only=True)
        point = EntropyPoint(
            t=float(t),
            s_analytic=reference.entropy,
            s_estimate=estimate,
            bootstrap_sd=spread,
            bound=math.exp(-params.rho * t) * s0,
            psi=F.psi(support_only=True),
            lemma_ent_slack=lemma.slack,
            sampling=sampling_diagnostic(occupations, bias_tolerance),
        )
        if point.undersampled:
            logger.warning(
                f"[Entropy] t={t:g}: {point.sampling.distinct} distinct occupation vectors in "
                f"{replicas} replicas, first-order bias {point.sampling.bias:.3e} > {bias_tolerance:g}; "
                "widen R or coarsen the partition"
            )
        elif STAT_SIGMAS * spread > 0.5 * max(point.bound, 1e-12):
            logger.warning(
                f"[Entropy] t={t:g}: bootstrap SD {spread:.3e} is large against the bound "
                f"{point.bound:.3e}; widen R or coarsen the partition"
            )
        logger.debug(f"[Entropy] t={t:g}: S_B={estimate:.5f} +- {spread:.5f}, bound {point.bound:.5f}")
        points.append(point)
    report = EntropyReport(s0=s0, points=points, analytic=analytic, replicas=replicas, cells=partition.cells)
    verdict = "holds" if report.monte_carlo_holds else "UNDERSAMPLED" if report.undersampled else "VIOLATED"
    logger.info(
        f"[Entropy] analytic channel {'holds' if report.analytic_holds else 'VIOLATED'}, "
        f"Monte Carlo channel {verdict}"
    )
    return report
