"""
Subcommand Runners

One function per command-line subcommand. Each takes the validated
experiment config, the output directory, a worker count and the quick flag,
writes its artifacts and returns the process exit code.

Artifacts:
    simulate  -> simulate.csv (t,replica,N,sum_v2,obs_*), simulate_summary.json
    moments   -> moments.csv (t,N_mean,E_mean,e), number_law.csv (t,N,p_N)
    spectrum  -> spectrum.json
    entropy   -> entropy.json
    bk-solve  -> bk.csv (t,v,F)
    chaos     -> chaos.json
    verify    -> verify.json
"""

import os

from src.kac.boltzmann import DensityField, bk_solve, chaos_experiment
from src.kac.distributions import ProductStart, VelocityLaw
from src.kac.grid import VelocityGrid
from src.kac.number_chain import initial_number_law, moments_table, number_law_trajectory
from src.kac.simulator import simulate_replicas
from src.kac.spectral import spectral_gaps
from src.kac.entropy import CellPartition, entropy_decay_experiment
from src.kac.verification import run_verification
from src.utils.config import ExperimentConfig, config_hash
from src.utils.errors import ConfigError
from src.utils.logger import logger
from src.utils.output import write_csv, write_json


def _grid(config: ExperimentConfig) -> VelocityGrid:
    section = config.section("grid")
    return VelocityGrid(v_max=section["v_max"], dv=section["dv"])


def run_simulate(config: ExperimentConfig, out_dir: str, threads: int, quick: bool = False) -> int:
    digest = config_hash(config)
    series = simulate_replicas(
        config.initial_condition(),
        config.params,
        config.checkpoints,
        config.replicas,
        config.seed,
        threads=threads,
        modes=config.modes,
    )
    write_csv(os.path.join(out_dir, "simulate.csv"), series.header(), series.rows(), digest, config.seed)
    write_json(os.path.join(out_dir, "simulate_summary.json"), series.summary(), digest, config.seed)
    return 0


def run_moments(config: ExperimentConfig, out_dir: str, threads: int, quick: bool = False) -> int:
    digest = config_hash(config)
    initial = config.initial_condition()
    rows = moments_table(initial.expected_n(), initial.expected_energy(), config.params, config.checkpoints)
    write_csv(os.path.join(out_dir, "moments.csv"), ["t", "N_mean", "E_mean", "e"], rows, digest, config.seed)

    truncation = config.section("truncation")
    p0 = initial_number_law(initial, config.params, truncation["n_max"])
    logger.info(f"[Moments] Number law truncated at N_max={p0.n_max}")
    laws = number_law_trajectory(p0, config.params, config.checkpoints, dt=truncation["dt"])
    law_rows = (
        [t, n, float(p)] for t, law in zip(config.checkpoints, laws) for n, p in enumerate(law.probs)
    )
    write_csv(os.path.join(out_dir, "number_law.csv"), ["t", "N", "p_N"], law_rows, digest, config.seed)
    return 0


def run_spectrum(config: ExperimentConfig, out_dir: str, threads: int, quick: bool = False) -> int:
    section = config.section("spectrum")
    report = spectral_gaps(config.params, k_max=section["k_max"], drift_window=section["drift_window"])
    write_json(os.path.join(out_dir, "spectrum.json"), report.to_dict(), config_hash(config), config.seed)
    return 0


def run_entropy(config: ExperimentConfig, out_dir: str, threads: int, quick: bool = False) -> int:
    initial = config.initial_condition()
    if not isinstance(initial, ProductStart):
        raise ConfigError(["initial.kind: the entropy command needs a product start"], "entropy")
    section = config.section("entropy")
    report = entropy_decay_experiment(
        initial,
        config.params,
        config.checkpoints,
        config.replicas,
        config.seed,
        partition=CellPartition.equal_mass(section["cells"]),
        threads=threads,
        grid=_grid(config),
        resamples=section["resamples"],
        miller_madow=section["miller_madow"],
        bias_tolerance=section["bias_tolerance"],
    )
    write_json(os.path.join(out_dir, "entropy.json"), report.to_dict(), config_hash(config), config.seed)
    return 0


def run_bk_solve(config: ExperimentConfig, out_dir: str, threads: int, quick: bool = False) -> int:
    section = config.section("bk")
    F0 = DensityField.from_law(VelocityLaw.from_dict(section["law"]), section["eta_scale"], _grid(config))
    trajectory = bk_solve(
        F0, config.params, config.checkpoints, dt=section["dt"], n_theta=section["n_theta"], order=section["order"]
    )
    write_csv(
        os.path.join(out_dir, "bk.csv"), ["t", "v", "F"], trajectory.rows(), config_hash(config), config.seed
    )
    return 0


def run_chaos(config: ExperimentConfig, out_dir: str, threads: int, quick: bool = False) -> int:
    section = config.section("chaos")
    v_max = config.section("grid")["v_max"]
    report = chaos_experiment(
        VelocityLaw.from_dict(section["law"]),
        section["eta_scale"],
        section["mu_list"],
        config.params,
        section["t"],
        max(100, section["replicas"] // 4) if quick else section["replicas"],
        config.seed,
        grid=VelocityGrid(v_max=v_max, dv=section["dv"]),
        pair_grid=VelocityGrid(v_max=v_max, dv=section["pair_dv"]),
        dt=section["dt"],
        n_theta=section["n_theta"],
        threads=threads,
        resamples=section["resamples"],
    )
    write_json(os.path.join(out_dir, "chaos.json"), report.to_dict(), config_hash(config), config.seed)
    return 0


def run_verify(config: ExperimentConfig, out_dir: str, threads: int, quick: bool = False) -> int:
    report = run_verification(config, threads=threads, quick=quick)
    write_json(os.path.join(out_dir, "verify.json"), report.to_dict(), config_hash(config), config.seed)
    print(report.table())
    if report.passed:
        logger.info(f"[Verify] All {len(report.checks)} checks passed")
        return 0
    logger.error(f"[Verify] {len(report.failures)} of {len(report.checks)} checks failed")
    return 4


COMMANDS = {
    "simulate": run_simulate,
    "moments": run_moments,
    "spectrum": run_spectrum,
    "entropy": run_entropy,
    "bk-solve": run_bk_solve,
    "chaos": run_chaos,
    "verify": run_verify,
}
