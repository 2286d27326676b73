"""
Verification Suite

Runs the acceptance checks behind the `verify` subcommand and collects them
into a pass/fail table. Each check is numbered by the acceptance criterion
it covers:

    1  stationarity of the number law and velocity marginal
    2  closed-form moment laws
    3  Monte Carlo number law against the RK4 oracle
    4  spectral gap from the decay of the eigen-observables
    5  second gap of the truncated V4e block and Gershgorin bounds
    6  exact Hermite coefficients
    7  ladder commutation relations
    8  entropy inequalities on random functions
    9  entropy decay (closed form and Monte Carlo)
    10 Boltzmann-Kac solver accuracy and conservation
    11 propagation of chaos

The model parameters of every check are fixed; the experiment config
supplies the master seed and the spectrum, commutators and chaos blocks.
With quick=True replica counts drop tenfold (fourfold for chaos) and
statistical thresholds widen by sqrt(10), for smoke runs.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from src.kac.boltzmann import DensityField, bk_solve, chaos_experiment, conservation_residuals, thermostat_closed_form
from src.kac.commutators import verify_commutators
from src.kac.distributions import FixedCountStart, Gaussian, Maxwellian, ProductStart, VelocityLaw
from src.kac.entropy import (
    CellPartition,
    analytic_entropy_decay,
    check_binomial_lsi,
    check_poisson_lsi,
    check_two_point,
    entropy_decay_experiment,
    entropy_production_check,
    product_state_entropy,
)
from src.kac.grid import VelocityGrid
from src.kac.model import MAXWELLIAN_VARIANCE, ModelParams
from src.kac.number_chain import (
    NumberDistribution,
    ProductState,
    closed_form_moments,
    initial_number_law,
    number_law_trajectory,
)
from src.kac.simulator import eigen_observable_rates, empirical_number_law, simulate_replicas, velocity_ks_test
from src.kac.spectral import a_2n, sigma, spectral_gaps, tau
from src.utils.config import ExperimentConfig
from src.utils.logger import logger

QUICK_FACTOR = 10
STATIONARY_PARAMS = ModelParams(mu=20.0, rho=1.0, lam=1.0)
STATIONARY_CHECKPOINTS = (0.5, 1.0, 2.0, 5.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0)
POOL_FROM = 15.0
MOMENT_CHECKPOINTS = (0.5, 1.0, 2.0, 3.0, 5.0)
DECAY_CHECKPOINTS = tuple(0.5 * k for k in range(9))
SPECTRAL_PARAMS = ModelParams(mu=512.0, rho=1.0, lam=1.0)
ENTROPY_CHECKPOINTS = (0.0, 0.5, 1.0, 2.0)
ENTROPY_PARAMS = ModelParams(mu=1.0, rho=1.0, lam=1.0)
ANALYTIC_CHECKPOINTS = (0.0, 0.5, 1.0, 2.0, 5.0)
WIDE_GAUSSIAN = Gaussian(mean=0.0, var=2.0 * MAXWELLIAN_VARIANCE)


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "name": self.name,
            "passed": self.passed,
            "seconds": round(self.seconds, 3),
            "details": self.details,
        }


@dataclass
class VerificationReport:
    checks: list
    quick: bool = False

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> list:
        return [check for check in self.checks if not check.passed]

    def to_dict(self) -> dict:
        return {
            "quick": self.quick,
            "passed": self.passed,
            "checks": [check.to_dict() for check in self.checks],
        }

    def table(self) -> str:
        """Plain-text pass/fail table, one row per check."""
        width = max((len(check.name) for check in self.checks), default=4)
        lines = [f"{'#':>3}  {'check':<{width}}  result", f"{'-' * 3}  {'-' * width}  ------"]
        for check in self.checks:
            lines.append(f"{check.criterion:>3}  {check.name:<{width}}  {'PASS' if check.passed else 'FAIL'}")
        lines.append(f"{len(self.checks) - len(self.failures)}/{len(self.checks)} passed")
        return "\n".join(lines)


def _stream_seed(seed: int, criterion: int) -> int:
    return int(np.random.SeedSequence([seed, criterion]).generate_state(1, dtype=np.uint64)[0])


def _pooled_law(series, times) -> NumberDistribution:
    counts = np.bincount(np.concatenate([series.column("N", t) for t in times]).astype(int))
    return NumberDistribution(counts / counts.sum())


def check_stationarity(seed: int, threads: int, quick: bool) -> list:
    """Criteria 1 and 3 share one ensemble started from N = 0."""
    replicas = 10_000 // (QUICK_FACTOR if quick else 1)
    widen = math.sqrt(QUICK_FACTOR) if quick else 1.0
    params = STATIONARY_PARAMS
    series = simulate_replicas(
        FixedCountStart(0), params, STATIONARY_CHECKPOINTS, replicas, _stream_seed(seed, 1),
        threads=threads, keep_states=True,
    )
    p0 = initial_number_law(FixedCountStart(0), params)
    oracle = number_law_trajectory(p0, params, STATIONARY_CHECKPOINTS)

    pooled_times = [t for t in STATIONARY_CHECKPOINTS if t >= POOL_FROM]
    pooled = _pooled_law(series, pooled_times)
    oracle_probs = np.mean([law.probs for t, law in zip(STATIONARY_CHECKPOINTS, oracle) if t >= POOL_FROM], axis=0)
    tv_poisson = pooled.total_variation(NumberDistribution.poisson(params.mean_n, p0.n_max))
    tv_oracle = pooled.total_variation(NumberDistribution(oracle_probs))
    # reported alongside the pooled values, not thresholded
    at_pool_start = empirical_number_law(series, POOL_FROM)
    tv_poisson_t15 = at_pool_start.total_variation(NumberDistribution.poisson(params.mean_n, p0.n_max))
    tv_oracle_t15 = at_pool_start.total_variation(oracle[STATIONARY_CHECKPOINTS.index(POOL_FROM)])
    ks = velocity_ks_test(series, POOL_FROM)
    stationary = CheckResult(
        1,
        "stationary number law and velocities",
        tv_poisson < 0.02 * widen and tv_oracle < 0.01 * widen and ks.pvalue > 0.01,
        {
            "replicas": replicas,
            "pooled_times": pooled_times,
            "tv_poisson": tv_poisson,
            "tv_oracle": tv_oracle,
            "tv_poisson_t15": tv_poisson_t15,
            "tv_oracle_t15": tv_oracle_t15,
            "ks_statistic": float(ks.statistic),
            "ks_pvalue": float(ks.pvalue),
        },
    )

    threshold = 3 * math.sqrt(p0.n_max) / math.sqrt(replicas)
    distances = [
        empirical_number_law(series, t).total_variation(law) for t, law in zip(STATIONARY_CHECKPOINTS, oracle)
    ]
    oracle_check = CheckResult(
        3,
        "number law matches RK4 oracle",
        all(d <= threshold for d in distances),
        {"threshold": threshold, "n_max": p0.n_max, "tv": dict(zip(map(str, STATIONARY_CHECKPOINTS), distances))},
    )
    return [stationary, oracle_check]


def check_moment_laws(seed: int, threads: int, quick: bool) -> list:
    replicas = 10_000 // (QUICK_FACTOR if quick else 1)
    params = STATIONARY_PARAMS
    initial = ProductStart(eta=5.0, law=Maxwellian())
    series = simulate_replicas(initial, params, MOMENT_CHECKPOINTS, replicas, _stream_seed(seed, 2), threads=threads)
    exact = [
        closed_form_moments(initial.expected_n(), initial.expected_energy(), params, t) for t in MOMENT_CHECKPOINTS
    ]
    z_n = np.abs(series.mean("N") - [m.n for m in exact]) / series.standard_error("N")
    z_e = np.abs(series.mean("sum_v2") - [m.energy for m in exact]) / series.standard_error("sum_v2")
    return [
        CheckResult(
            2,
            "moment laws within 3 SE",
            bool(np.all(z_n <= 3) and np.all(z_e <= 3)),
            {"replicas": replicas, "z_N": z_n.tolist(), "z_energy": z_e.tolist()},
        )
    ]


def check_spectral_gap(seed: int, threads: int, quick: bool) -> list:
    replicas = 10_000 // (QUICK_FACTOR if quick else 1)
    tolerance = 0.05 * (math.sqrt(QUICK_FACTOR) if quick else 1.0)
    initial = FixedCountStart(60, WIDE_GAUSSIAN)
    details = {"replicas": replicas, "tolerance": tolerance}
    passed = True
    for index, lam in enumerate((0.0, 1.0)):
        params = ModelParams(mu=20.0, rho=1.0, lam=lam)
        series = simulate_replicas(
            initial, params, DECAY_CHECKPOINTS, replicas, _stream_seed(seed, 40 + index), threads=threads
        )
        fits = eigen_observable_rates(series, params)
        for name, fit in fits.items():
            error = abs(fit.rate - params.rho) / params.rho
            passed &= error <= tolerance
            details[f"lambda={lam:g}/{name}"] = {"rate": fit.rate, "stderr": fit.stderr, "relative_error": error}
    return [CheckResult(4, "eigen-observables decay at rate rho", bool(passed), details)]


def check_second_gap(config: ExperimentConfig) -> list:
    section = config.section("spectrum")
    report = spectral_gaps(SPECTRAL_PARAMS, k_max=section["k_max"], drift_window=section["drift_window"])
    delta4 = -report.delta2
    gershgorin = {str(m): bound > delta4 for m, bound in report.gershgorin.items()}
    return [
        CheckResult(
            5,
            "second gap and Gershgorin bounds",
            report.delta == -SPECTRAL_PARAMS.rho and report.within_bounds and report.converged
            and all(gershgorin.values()),
            {**report.to_dict(), "gershgorin_above_delta4": gershgorin},
        )
    ]


def check_coefficients() -> list:
    tau_exact = tau(2) == 3 / 8 and tau(3) == 5 / 16
    sigma_gap = max(
        abs(sigma(n, k, "sqrt") - sigma(n, k, "binomial")) for n in range(2, 21) for k in range(1, n)
    )
    a_max = max(a_2n(n) for n in range(1, 31))
    return [
        CheckResult(
            6,
            "exact Hermite coefficients",
            tau_exact and sigma_gap <= 1e-12 and a_max <= 2.0,
            {"tau2": tau(2), "tau3": tau(3), "sigma_form_gap": sigma_gap, "max_A2n": a_max},
        )
    ]


def check_commutators(config: ExperimentConfig) -> list:
    section = config.section("commutators")
    report = verify_commutators(section["modes"], STATIONARY_PARAMS, section["n_cut"])
    return [CheckResult(7, "ladder commutation relations", report.passed, report.to_dict())]


def check_entropy_inequalities(seed: int) -> list:
    rng = np.random.default_rng([seed, 8])
    two_point = 0
    for f0, f1, mu0 in zip(
        np.exp(rng.normal(0, 2, 10_000)), np.exp(rng.normal(0, 2, 10_000)), rng.random(10_000)
    ):
        two_point += not check_two_point(float(f0), float(f1), float(mu0)).holds
    poisson = {}
    for alpha in (0.5, 2.0, 20.0):
        poisson[str(alpha)] = sum(
            not check_poisson_lsi(np.exp(rng.normal(0, 1, 61)), alpha).holds for _ in range(1000)
        )
    binomial = {}
    for N in (1, 10, 50):
        alphas = rng.uniform(0, N, 1000)
        binomial[str(N)] = sum(
            not check_binomial_lsi(np.exp(rng.normal(0, 1, N + 1)), max(float(a), 1e-3), N).holds for a in alphas
        )
    violations = two_point + sum(poisson.values()) + sum(binomial.values())
    return [
        CheckResult(
            8,
            "entropy inequalities",
            violations == 0,
            {"two_point_violations": two_point, "poisson_violations": poisson, "binomial_violations": binomial},
        )
    ]


def check_entropy_decay(config: ExperimentConfig, threads: int, quick: bool) -> list:
    grid = VelocityGrid(v_max=config.section("grid")["v_max"], dv=config.section("grid")["dv"])
    analytic = {}
    analytic_ok = True
    for eta in (5.0, 80.0):
        params = ModelParams(mu=20.0, rho=1.0, lam=0.0)
        ps0 = ProductState.from_law(eta, WIDE_GAUSSIAN, grid)
        points = analytic_entropy_decay(ps0, params, ANALYTIC_CHECKPOINTS)
        s0 = product_state_entropy(ps0, params)
        production = entropy_production_check(ps0, params, ANALYTIC_CHECKPOINTS)
        ok = all(p.holds for p in points) and production <= 1e-3 * max(1.0, s0)
        analytic_ok &= ok
        analytic[f"eta/mean_n={eta / params.mean_n:g}"] = {
            "S": [p.entropy for p in points],
            "bound": [p.bound for p in points],
            "production_violation": production,
        }

    # K cells at R = 1e5 resolve the occupation law only for mu/rho near 1;
    # at mu/rho = 20 nearly every replica is a distinct vector
    replicas = 100_000 // (QUICK_FACTOR if quick else 1)
    section = config.section("entropy")
    start = ProductStart(eta=0.25 * ENTROPY_PARAMS.mean_n, law=WIDE_GAUSSIAN)
    report = entropy_decay_experiment(
        start,
        ENTROPY_PARAMS,
        ENTROPY_CHECKPOINTS,
        replicas,
        _stream_seed(config.seed, 9),
        partition=CellPartition.equal_mass(section["cells"]),
        threads=threads,
        grid=grid,
        resamples=section["resamples"],
        miller_madow=section["miller_madow"],
        bias_tolerance=section["bias_tolerance"] * (QUICK_FACTOR if quick else 1),
    )
    return [
        CheckResult(
            9,
            "entropy decays at rate rho",
            analytic_ok and report.monte_carlo_holds,
            {
                "analytic": analytic,
                "monte_carlo": {
                    "mu": ENTROPY_PARAMS.mu,
                    "rho": ENTROPY_PARAMS.rho,
                    "lambda": ENTROPY_PARAMS.lam,
                    "eta": start.eta,
                    **report.to_dict(),
                },
            },
        )
    ]


def check_bk_solver(config: ExperimentConfig) -> list:
    grid_section = config.section("grid")
    bk = config.section("bk")
    grid = VelocityGrid(v_max=grid_section["v_max"], dv=grid_section["dv"])
    F0 = DensityField.from_law(VelocityLaw.from_dict(bk["law"]), bk["eta_scale"], grid)
    free = ModelParams(mu=20.0, rho=1.0, lam=0.0)
    solved = bk_solve(F0, free, [1.0], dt=bk["dt"], n_theta=bk["n_theta"], order=bk["order"]).final
    l1_error = solved.l1_distance(thermostat_closed_form(F0, free, 1.0))
    residuals = conservation_residuals(F0, STATIONARY_PARAMS, bk["n_theta"], bk["order"])
    return [
        CheckResult(
            10,
            "Boltzmann-Kac closed form and conservation",
            l1_error <= 1e-4 and residuals["collision_mass"] <= 1e-6 and residuals["collision_energy"] <= 1e-6,
            {"l1_error": l1_error, **residuals},
        )
    ]


def check_chaos(config: ExperimentConfig, threads: int, quick: bool) -> list:
    section = config.section("chaos")
    v_max = config.section("grid")["v_max"]
    replicas = max(100, section["replicas"] // 4) if quick else section["replicas"]
    report = chaos_experiment(
        VelocityLaw.from_dict(section["law"]),
        section["eta_scale"],
        section["mu_list"],
        STATIONARY_PARAMS,
        section["t"],
        replicas,
        _stream_seed(config.seed, 11),
        grid=VelocityGrid(v_max=v_max, dv=section["dv"]),
        pair_grid=VelocityGrid(v_max=v_max, dv=section["pair_dv"]),
        dt=section["dt"],
        n_theta=section["n_theta"],
        threads=threads,
        resamples=section["resamples"],
    )
    return [
        CheckResult(
            11,
            "propagation of chaos",
            report.first_decreasing and report.pair_decreasing,
            report.to_dict(),
        )
    ]


def _timed(run: Callable[[], list]) -> list:
    start = time.perf_counter()
    results = run()
    elapsed = time.perf_counter() - start
    for result in results:
        result.seconds = elapsed / len(results)
        logger.info(f"[Verify] {result.criterion}: {result.name} -> {'PASS' if result.passed else 'FAIL'}")
    return results


def run_verification(config: ExperimentConfig, threads: int = 1, quick: bool = False) -> VerificationReport:
    """Run every acceptance check and return them ordered by criterion."""
    logger.info(f"[Verify] Starting suite (seed={config.seed}, threads={threads}, quick={quick})")
    seed = config.seed
    runs = [
        lambda: check_stationarity(seed, threads, quick),
        lambda: check_moment_laws(seed, threads, quick),
        lambda: check_spectral_gap(seed, threads, quick),
        lambda: check_second_gap(config),
        check_coefficients,
        lambda: check_commutators(config),
        lambda: check_entropy_inequalities(seed),
        lambda: check_entropy_decay(config, threads, quick),
        lambda: check_bk_solver(config),
        lambda: check_chaos(config, threads, quick),
    ]
    checks = [result for run in runs for result in _timed(run)]
    checks.sort(key=lambda check: check.criterion)
    return VerificationReport(checks=checks, quick=quick)
