import math

import numpy as np
import pytest

from src.kac.boltzmann import (
    BKTrajectory,
    ChaosReport,
    DensityField,
    PairDensity,
    bk_rhs,
    bk_solve,
    chaos_experiment,
    chaos_seed,
    collision_term,
    conservation_residuals,
    empirical_marginal,
    gain_term,
    thermostat_closed_form,
)
from src.kac.distributions import Gaussian, Maxwellian
from src.kac.grid import VelocityGrid
from src.kac.model import MAXWELLIAN_VARIANCE, ModelParams
from src.utils.errors import InstabilityError

N_THETA = 32


@pytest.fixture
def hot_field(coarse_grid):
    return DensityField.from_law(Gaussian(0.0, 2 * MAXWELLIAN_VARIANCE), grid=coarse_grid)


def test_density_field_basics(coarse_grid):
    F = DensityField.maxwellian(coarse_grid)
    assert F.mass() == pytest.approx(1.0, abs=1e-10)
    assert F.second_moment() == pytest.approx(MAXWELLIAN_VARIANCE, abs=1e-10)
    assert F.is_symmetric()
    assert F.boundary_value() < 1e-20
    assert F.l1_distance(F.copy()) == 0.0
    with pytest.raises(ValueError):
        DensityField(coarse_grid, np.zeros(3))
    with pytest.raises(ValueError):
        F.l1_distance(DensityField.maxwellian(VelocityGrid(4.0, 0.1)))


def test_maxwellian_is_a_fixed_point(params, coarse_grid):
    F = DensityField.maxwellian(coarse_grid)
    assert np.max(np.abs(bk_rhs(F, params, n_theta=N_THETA))) < 1e-3
    assert np.max(np.abs(collision_term(F, 1.0, n_theta=N_THETA, order=1))) < 1e-2


def test_gain_term_validates_order(coarse_grid):
    with pytest.raises(ValueError):
        gain_term(DensityField.maxwellian(coarse_grid), order=2)


def test_collision_term_conserves_mass_and_energy(params, hot_field):
    residuals = conservation_residuals(hot_field, params, n_theta=N_THETA)
    assert residuals["collision_mass"] < 1e-4
    assert residuals["collision_energy"] < 1e-4
    assert residuals["mass_balance"] < 1e-4
    assert not np.any(collision_term(hot_field, 0.0))


def test_collisions_keep_symmetry(params, hot_field):
    gain = gain_term(hot_field, n_theta=N_THETA)
    assert np.max(np.abs(gain - gain[::-1])) < 1e-10


def test_free_solution_matches_closed_form(free_params, hot_field):
    trajectory = bk_solve(hot_field, free_params, [0.5, 1.0])
    for t in (0.5, 1.0):
        exact = thermostat_closed_form(hot_field, free_params, t)
        assert trajectory.at(t).l1_distance(exact) < 1e-8
    assert trajectory.steps == 100


def test_default_step_agrees_with_fine_step(params, hot_field):
    coarse = bk_solve(hot_field, params, 0.1, n_theta=N_THETA)
    fine = bk_solve(hot_field, params, 0.1, dt=1e-3, n_theta=N_THETA)
    assert coarse.steps == 10
    assert fine.steps == 100
    assert coarse.final.l1_distance(fine.final) < 1e-6


def test_mass_relaxes_with_collisions(params, coarse_grid):
    F0 = DensityField.from_law(Maxwellian(), scale=2.0, grid=coarse_grid)
    trajectory = bk_solve(F0, params, 0.5, n_theta=N_THETA)
    assert trajectory.final.mass() == pytest.approx(1.0 + math.exp(-0.5), abs=1e-3)
    assert trajectory.final.is_symmetric(1e-10)


def test_hot_start_relaxes_towards_maxwellian(params, hot_field):
    trajectory = bk_solve(hot_field, params, [0.5, 1.0], n_theta=N_THETA)
    gamma = DensityField.maxwellian(hot_field.grid)
    distances = [F.l1_distance(gamma) for F in trajectory.fields]
    assert distances[1] < distances[0] < hot_field.l1_distance(gamma)


def test_bk_solve_rejects_bad_arguments(params, coarse_grid):
    F0 = DensityField.maxwellian(coarse_grid)
    with pytest.raises(ValueError):
        bk_solve(F0, params, [1.0], dt=0.5)
    with pytest.raises(ValueError):
        bk_solve(F0, params, [1.0, 0.5])
    with pytest.raises(ValueError):
        bk_solve(F0, params, [-1.0])


def test_bk_solve_detects_negative_values(free_params, coarse_grid):
    values = DensityField.maxwellian(coarse_grid).values.copy()
    values[80] = -1.0
    with pytest.raises(InstabilityError):
        bk_solve(DensityField(coarse_grid, values), free_params, [0.1])


def test_bk_solve_warns_on_wide_initial_data(mocker, free_params, coarse_grid):
    mock_logger = mocker.patch("src.kac.boltzmann.logger")
    bk_solve(DensityField(coarse_grid, np.full(coarse_grid.size, 0.1)), free_params, [0.0])
    mock_logger.warning.assert_called_once()


def test_trajectory_lookup_and_rows(coarse_grid):
    F = DensityField.maxwellian(coarse_grid)
    trajectory = BKTrajectory(times=np.array([0.0, 1.0]), fields=[F, F.copy()])
    assert trajectory.at(1.0) is trajectory.fields[1]
    with pytest.raises(ValueError):
        trajectory.at(0.5)
    rows = list(trajectory.rows())
    assert len(rows) == 2 * coarse_grid.size
    assert rows[0] == [0.0, -4.0, float(F.values[0])]


def test_empirical_marginals():
    grid = VelocityGrid(v_max=1.0, dv=0.25)
    params = ModelParams(mu=1.0, rho=1.0, lam=1.0)
    samples = [np.array([0.0, 0.1]), np.array([])]
    first = empirical_marginal(samples, 1, 1.0, params, grid)
    assert isinstance(first, DensityField)
    assert first.values[4] == 4.0
    assert first.values.sum() == 4.0
    second = empirical_marginal(samples, 2, 1.0, params, grid)
    assert isinstance(second, PairDensity)
    assert second.values[4, 4] == 16.0
    assert second.mass() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        empirical_marginal(samples, 3, 1.0, params, grid)
    with pytest.raises(ValueError):
        empirical_marginal([], 1, 1.0, params, grid)


def test_factorization_defect_of_product_is_zero(coarse_grid):
    F = DensityField.maxwellian(coarse_grid)
    pair = PairDensity(coarse_grid, np.outer(F.values, F.values))
    assert pair.factorization_defect(F) == 0.0


def test_chaos_report_verdicts():
    with pytest.raises(ValueError):
        ChaosReport([10, 10], [0.1, 0.1], [0.0, 0.0], [0.1, 0.1], [0.0, 0.0], t=1.0, replicas=10)
    report = ChaosReport([10, 20, 40], [0.3, 0.2, 0.1], [0.01] * 3, [0.3, 0.29, 0.1], [0.01] * 3, t=1.0, replicas=10)
    assert report.first_decreasing
    assert not report.pair_decreasing
    assert report.to_dict()["mu_n"] == [10, 20, 40]


def test_chaos_seed_streams():
    assert chaos_seed(1, 0) == chaos_seed(1, 0)
    assert chaos_seed(1, 0) != chaos_seed(1, 1)


def test_chaos_experiment_small(params, coarse_grid):
    report = chaos_experiment(
        Gaussian(0.0, 2 * MAXWELLIAN_VARIANCE),
        1.0,
        [5, 20],
        params,
        t=0.2,
        replicas=100,
        seed=3,
        grid=coarse_grid,
        pair_grid=VelocityGrid(4.0, 0.5),
        n_theta=16,
        resamples=5,
    )
    assert report.mu_list == [5.0, 20.0]
    assert len(report.first_defect) == len(report.pair_defect) == 2
    assert all(d > 0 for d in report.first_defect)
    assert all(sd >= 0 for sd in report.first_sd + report.pair_sd)
    assert len(set(report.seeds)) == 2
    with pytest.raises(ValueError):
        chaos_experiment(Maxwellian(), 1.0, [5], params, t=0.0, replicas=10, seed=0)
