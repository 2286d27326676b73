"""
Boltzmann-Kac Module

Deterministic large-reservoir limit of the model: the relative particle
density F(v, t) solves

    dF/dt = -rho (F - gamma)
            + lambda int dw int dtheta/2pi [F(v c + w s) F(-v s + w c) - F(w) F(v)]

with c = cos(theta), s = sin(theta). The module also measures scaled
empirical marginals of simulated ensembles and runs the propagation-of-chaos
experiment against the PDE.

Numerics:
    - Uniform symmetric grid, trapezoidal theta rule (n_theta nodes)
    - For each theta the w-line is reparametrised so one factor sits on grid
      nodes and only the other is interpolated:
        |c| >= |s|: (1/|c|) sum_j dv F(y_j) F((v + s y_j) / c)
        |c| <  |s|: (1/|s|) sum_j dv F(x_j) F((c x_j - v) / s)
      Interpolation is a cubic spline (order=3) or linear (order=1) through
      scipy.ndimage.map_coordinates; arguments off the grid read as 0.
    - Loss term lambda m0 F with m0 = dv sum F
    - Classical RK4; negative values below -1e-8 abort, smaller ones are clipped

Dependencies:
    - numpy: grids and histograms
    - scipy.ndimage: spline interpolation of rotated arguments
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import ndimage

from src.kac.distributions import ProductStart, VelocityLaw
from src.kac.grid import VelocityGrid
from src.kac.model import ModelParams, maxwellian_pdf
from src.kac.simulator import simulate_replicas
from src.utils.errors import InstabilityError
from src.utils.logger import logger

DEFAULT_N_THETA = 64
DEFAULT_ORDER = 3
DEFAULT_DT = 0.01
NEGATIVITY_TOLERANCE = 1e-8
BOUNDARY_TOLERANCE = 1e-10
CHAOS_RESAMPLES = 50
NOISE_SIGMAS = 2.0


@dataclass
class DensityField:
    """Values of a one-particle density F on a velocity grid."""

    grid: VelocityGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got {self.values.shape}")

    @classmethod
    def from_law(cls, law: VelocityLaw, scale: float = 1.0, grid: Optional[VelocityGrid] = None) -> "DensityField":
        grid = grid or VelocityGrid()
        return cls(grid, scale * law.pdf(grid.points))

    @classmethod
    def maxwellian(cls, grid: Optional[VelocityGrid] = None) -> "DensityField":
        grid = grid or VelocityGrid()
        return cls(grid, maxwellian_pdf(grid.points))

    def mass(self) -> float:
        return self.grid.integrate(self.values)

    def second_moment(self) -> float:
        return self.grid.integrate(self.grid.points**2 * self.values)

    def l1_distance(self, other: "DensityField") -> float:
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        return self.grid.integrate(np.abs(self.values - other.values))

    def is_symmetric(self, tolerance: float = 1e-12) -> bool:
        return float(np.max(np.abs(self.values - self.values[::-1]))) <= tolerance

    def boundary_value(self) -> float:
        return float(max(abs(self.values[0]), abs(self.values[-1])))

    def copy(self) -> "DensityField":
        return DensityField(self.grid, self.values.copy())


def _interpolate(values: np.ndarray, grid: VelocityGrid, v: np.ndarray, order: int) -> np.ndarray:
    coords = grid.index_of(v)
    flat = ndimage.map_coordinates(values, [coords.ravel()], order=order, mode="grid-constant", cval=0.0)
    return flat.reshape(coords.shape)


def gain_term(F: DensityField, n_theta: int = DEFAULT_N_THETA, order: int = DEFAULT_ORDER) -> np.ndarray:
    """int dw int dtheta/2pi F(v c + w s) F(-v s + w c) on the grid (without lambda)."""
    if order not in (1, 3):
        raise ValueError(f"interpolation order must be 1 or 3, got {order}")
    grid = F.grid
    v = grid.points[:, None]
    y = grid.points[None, :]
    total = np.zeros(grid.size)
    for theta in 2 * math.pi * np.arange(n_theta) / n_theta:
        c, s = math.cos(theta), math.sin(theta)
        if abs(c) >= abs(s):
            shifted = _interpolate(F.values, grid, (v + s * y) / c, order)
            total += (shifted @ F.values) / abs(c)
        else:
            shifted = _interpolate(F.values, grid, (c * y - v) / s, order)
            total += (shifted @ F.values) / abs(s)
    return grid.dv * total / n_theta


def collision_term(
    F: DensityField, lam: float, n_theta: int = DEFAULT_N_THETA, order: int = DEFAULT_ORDER
) -> np.ndarray:
    """lambda (gain - m0 F); zero when lambda = 0."""
    if lam == 0:
        return np.zeros_like(F.values)
    return lam * (gain_term(F, n_theta, order) - F.mass() * F.values)


def thermostat_term(F: DensityField, params: ModelParams) -> np.ndarray:
    return -params.rho * (F.values - maxwellian_pdf(F.grid.points))


def bk_rhs(
    F: DensityField, params: ModelParams, n_theta: int = DEFAULT_N_THETA, order: int = DEFAULT_ORDER
) -> np.ndarray:
    """Time derivative of F under the Boltzmann-Kac equation."""
    return thermostat_term(F, params) + collision_term(F, params.lam, n_theta, order)


def conservation_residuals(F: DensityField, params: ModelParams, n_theta: int = DEFAULT_N_THETA, order: int = DEFAULT_ORDER) -> dict:
    """Mass and energy produced by the collision term, and the total mass balance."""
    collisions = collision_term(F, params.lam, n_theta, order)
    rhs = thermostat_term(F, params) + collisions
    grid = F.grid
    return {
        "collision_mass": abs(grid.integrate(collisions)),
        "collision_energy": abs(grid.integrate(grid.points**2 * collisions)),
        "mass_balance": abs(grid.integrate(rhs) + params.rho * (F.mass() - 1.0)),
    }


def thermostat_closed_form(F0: DensityField, params: ModelParams, t: float) -> DensityField:
    """exp(-rho t) F0 + (1 - exp(-rho t)) gamma, the exact solution for lambda = 0."""
    decay = math.exp(-params.rho * t)
    return DensityField(F0.grid, decay * F0.values + (1 - decay) * maxwellian_pdf(F0.grid.points))


@dataclass
class BKTrajectory:
    times: np.ndarray
    fields: list
    clipped_steps: int = 0
    steps: int = 0

    @property
    def final(self) -> DensityField:
        return self.fields[-1]

    def at(self, t: float) -> DensityField:
        matches = np.flatnonzero(np.isclose(self.times, t, rtol=0, atol=1e-12))
        if matches.size == 0:
            raise ValueError(f"t={t} is not a checkpoint")
        return self.fields[int(matches[0])]

    def rows(self):
        """Yield (t, v, F) in checkpoint-major order."""
        for t, F in zip(self.times, self.fields):
            for v, value in zip(F.grid.points, F.values):
                yield [float(t), float(v), float(value)]


def bk_solve(
    F0: DensityField,
    params: ModelParams,
    checkpoints: Union[float, Sequence[float]],
    dt: Optional[float] = None,
    n_theta: int = DEFAULT_N_THETA,
    order: int = DEFAULT_ORDER,
) -> BKTrajectory:
    """Integrate the Boltzmann-Kac equation with RK4.

    Args:
        F0: Initial density (not renormalised)
        params: rho and lambda are used; mu drops out of the limit equation
        checkpoints: Final time or increasing output times
        dt: Step, at most 0.1 / (rho + lambda m0) (default min(0.01, that))
        n_theta: Angular nodes
        order: Interpolation order, 1 or 3

    Returns:
        BKTrajectory: F at every checkpoint

    Raises:
        ValueError: If dt exceeds the stability limit
        InstabilityError: If a step produces values below -1e-8
    """
    times = np.atleast_1d(np.asarray(checkpoints, dtype=float))
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("checkpoints must be non-negative and non-decreasing")
    limit = 0.1 / (params.rho + params.lam * F0.mass())
    step = min(DEFAULT_DT, limit) if dt is None else dt
    if step <= 0 or step > limit * (1 + 1e-12):
        raise ValueError(f"dt={step} exceeds the stability limit {limit:.4g}")
    if F0.boundary_value() > BOUNDARY_TOLERANCE:
        logger.warning(f"[BK] Boundary value {F0.boundary_value():.2e} exceeds {BOUNDARY_TOLERANCE:g}; widen v_max")

    def rhs(values: np.ndarray) -> np.ndarray:
        return bk_rhs(DensityField(F0.grid, values), params, n_theta, order)

    current = F0.values.copy()
    now = 0.0
    fields = []
    clipped = 0
    total_steps = 0
    logger.info(
        f"[BK] Solving to t={times[-1]:g} with dt={step:g}, {F0.grid.size} nodes, "
        f"n_theta={n_theta}, order={order}, lambda={params.lam}"
    )
    for target in times:
        remaining = target - now
        steps = int(math.ceil(remaining / step - 1e-12)) if remaining > 0 else 0
        h = remaining / steps if steps else 0.0
        for _ in range(steps):
            k1 = rhs(current)
            k2 = rhs(current + 0.5 * h * k1)
            k3 = rhs(current + 0.5 * h * k2)
            k4 = rhs(current + h * k3)
            current = current + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            lowest = float(current.min())
            if lowest < -NEGATIVITY_TOLERANCE:
                raise InstabilityError(f"F reached {lowest:.3e} at t={now + h:.4g}")
            if lowest < 0:
                current = np.clip(current, 0.0, None)
                clipped += 1
            now += h
            total_steps += 1
        now = float(target)
        fields.append(DensityField(F0.grid, current.copy()))
        logger.debug(f"[BK] t={now:.4g}: mass={fields[-1].mass():.8f}, energy={fields[-1].second_moment():.8f}")
    if clipped:
        logger.debug(f"[BK] Clipped small negative values in {clipped} of {total_steps} steps")
    return BKTrajectory(times=times, fields=fields, clipped_steps=clipped, steps=total_steps)


@dataclass
class PairDensity:
    """Two-particle density F(v, w) on grid x grid."""

    grid: VelocityGrid
    values: np.ndarray

    def mass(self) -> float:
        return float(self.values.sum()) * self.grid.dv**2

    def factorization_defect(self, first: DensityField) -> float:
        """|| F2 - F1 (x) F1 ||_1."""
        if first.grid != self.grid:
            raise ValueError("marginals live on different grids")
        return float(np.abs(self.values - np.outer(first.values, first.values)).sum()) * self.grid.dv**2


def _cell_counts(samples: Sequence[np.ndarray], grid: VelocityGrid) -> np.ndarray:
    """Per-replica histogram on the grid cells, shape (R, grid.size); off-grid velocities dropped."""
    counts = np.zeros((len(samples), grid.size))
    for r, v in enumerate(samples):
        if v.size:
            counts[r] = np.histogram(v, bins=grid.edges)[0]
    return counts


def _first_from_counts(counts: np.ndarray, mu_n: float, params: ModelParams, grid: VelocityGrid) -> DensityField:
    weight = params.rho / (mu_n * counts.shape[0]) / grid.dv
    return DensityField(grid, weight * counts.sum(axis=0))


def _second_from_counts(counts: np.ndarray, mu_n: float, params: ModelParams, grid: VelocityGrid) -> PairDensity:
    ordered = counts.T @ counts - np.diag(counts.sum(axis=0))
    weight = (params.rho / mu_n) ** 2 / counts.shape[0] / grid.dv**2
    return PairDensity(grid, weight * ordered)


def empirical_marginal(
    samples: Sequence[np.ndarray], k: int, mu_n: float, params: ModelParams, grid: VelocityGrid
) -> Union[DensityField, PairDensity]:
    """Scaled empirical k-marginal of replica states.

    k = 1: histogram of all velocities weighted rho / (mu_n R);
    k = 2: histogram of ordered pairs of distinct particles of the same
    replica, weighted (rho / mu_n)^2 / R. Both are densities on the grid cells.

    Raises:
        ValueError: If k is not 1 or 2 or there are no samples
    """
    if k not in (1, 2):
        raise ValueError(f"marginal order must be 1 or 2, got {k}")
    if len(samples) == 0:
        raise ValueError("no replica states")
    counts = _cell_counts(samples, grid)
    if k == 1:
        return _first_from_counts(counts, mu_n, params, grid)
    return _second_from_counts(counts, mu_n, params, grid)


@dataclass
class ChaosReport:
    """Propagation-of-chaos defects per reservoir size mu_n."""

    mu_list: list
    first_defect: list
    first_sd: list
    pair_defect: list
    pair_sd: list
    t: float
    replicas: int
    seeds: list = field(default_factory=list)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.mu_list, self.mu_list[1:])):
            raise ValueError("mu_n must be strictly increasing")

    @staticmethod
    def _decreasing(values: list, spreads: list) -> bool:
        return all(
            a - b > NOISE_SIGMAS * math.hypot(sa, sb)
            for a, b, sa, sb in zip(values, values[1:], spreads, spreads[1:])
        )

    @property
    def first_decreasing(self) -> bool:
        return self._decreasing(self.first_defect, self.first_sd)

    @property
    def pair_decreasing(self) -> bool:
        return self._decreasing(self.pair_defect, self.pair_sd)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "replicas": self.replicas,
            "mu_n": self.mu_list,
            "seeds": self.seeds,
            "l1_first_marginal": self.first_defect,
            "l1_first_marginal_sd": self.first_sd,
            "factorization_defect": self.pair_defect,
            "factorization_defect_sd": self.pair_sd,
            "first_decreasing": self.first_decreasing,
            "pair_decreasing": self.pair_decreasing,
        }


def chaos_seed(seed: int, index: int) -> int:
    """Master seed of the index-th reservoir size."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def chaos_experiment(
    g0: VelocityLaw,
    eta_scale: float,
    mu_list: Sequence[float],
    params: ModelParams,
    t: float,
    replicas: int,
    seed: int,
    grid: Optional[VelocityGrid] = None,
    pair_grid: Optional[VelocityGrid] = None,
    dt: Optional[float] = None,
    n_theta: int = DEFAULT_N_THETA,
    threads: int = 1,
    resamples: int = CHAOS_RESAMPLES,
) -> ChaosReport:
    """Compare simulated ensembles at growing mu_n with the Boltzmann-Kac solution.

    Each ensemble starts from Poisson(eta_scale mu_n / rho) particles with
    i.i.d. velocities from g0, collides at lambda_tilde = lambda rho / mu_n,
    and is compared at time t with the PDE started from eta_scale g0.
    Spreads are bootstrap standard deviations over replicas.
    """
    if t <= 0:
        raise ValueError(f"t must be > 0, got {t}")
    grid = grid or VelocityGrid()
    pair_grid = pair_grid or VelocityGrid(dv=0.2)
    mu_list = [float(m) for m in mu_list]
    F0 = DensityField.from_law(g0, eta_scale, grid)
    reference = bk_solve(F0, params, [t], dt=dt, n_theta=n_theta).final
    rng = np.random.default_rng([seed, len(mu_list)])

    first, first_sd, pair, pair_sd, seeds = [], [], [], [], []
    for index, mu_n in enumerate(mu_list):
        scaled = params.with_mu(mu_n)
        run_seed = chaos_seed(seed, index)
        initial = ProductStart(eta=eta_scale * scaled.mean_n, law=g0)
        series = simulate_replicas(initial, scaled, [t], replicas, run_seed, threads=threads, keep_states=True)
        samples = series.snapshot(t)
        fine = _cell_counts(samples, grid)
        coarse = _cell_counts(samples, pair_grid)

        def defects(rows: np.ndarray) -> tuple:
            f1 = _first_from_counts(fine[rows], mu_n, params, grid)
            c1 = _first_from_counts(coarse[rows], mu_n, params, pair_grid)
            f2 = _second_from_counts(coarse[rows], mu_n, params, pair_grid)
            return f1.l1_distance(reference), f2.factorization_defect(c1)

        d1, d2 = defects(np.arange(replicas))
        boot = np.array([defects(rng.integers(0, replicas, replicas)) for _ in range(resamples)])
        first.append(d1)
        pair.append(d2)
        first_sd.append(float(boot[:, 0].std(ddof=1)))
        pair_sd.append(float(boot[:, 1].std(ddof=1)))
        seeds.append(run_seed)
        logger.info(
            f"[Chaos] mu_n={mu_n:g}: L1(F1, PDE)={d1:.4f} +- {first_sd[-1]:.4f}, "
            f"factorization={d2:.4f} +- {pair_sd[-1]:.4f}"
        )
    return ChaosReport(
        mu_list=mu_list,
        first_defect=first,
        first_sd=first_sd,
        pair_defect=pair,
        pair_sd=pair_sd,
        t=float(t),
        replicas=replicas,
        seeds=seeds,
    )
