import math

import numpy as np
import pytest

from src.kac.distributions import Gaussian, Maxwellian, ProductStart
from src.kac.entropy import (
    CellPartition,
    OccupationFunction,
    SamplingDiagnostic,
    analytic_entropy_decay,
    bootstrap_entropy,
    check_binomial_lsi,
    check_poisson_lsi,
    check_two_point,
    coarse_grained_entropy,
    dirichlet_psi,
    entropy_decay_experiment,
    entropy_production_check,
    number_law_relative_entropy,
    plug_in_entropy,
    product_occupation_function,
    product_state_coarse_entropy,
    product_state_entropy,
    sampling_diagnostic,
)
from src.kac.model import MAXWELLIAN_VARIANCE, ModelParams
from src.kac.number_chain import NumberDistribution, ProductState
from src.utils.errors import NumericalContractError


@pytest.fixture
def hot_state(coarse_grid):
    return ProductState.from_law(5.0, Gaussian(0.0, 2 * MAXWELLIAN_VARIANCE), coarse_grid)


@pytest.mark.parametrize("f0, f1, mu0", [(2.0, 0.5, 0.3), (1.0, 1.0, 0.5), (1e-3, 40.0, 0.9), (3.0, 7.0, 0.0)])
def test_two_point_inequality(f0, f1, mu0):
    assert check_two_point(f0, f1, mu0).holds


def test_two_point_rejects_bad_input():
    with pytest.raises(ValueError):
        check_two_point(0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        check_two_point(1.0, 1.0, 1.5)


@pytest.mark.parametrize("alpha", [0.5, 3.0, 10.0])
def test_poisson_lsi_random_functions(alpha, rng):
    for _ in range(20):
        f = np.exp(rng.normal(0.0, 1.0, 30))
        assert check_poisson_lsi(f, alpha).holds


def test_poisson_lsi_constant_is_tight():
    check = check_poisson_lsi(np.full(10, 2.0), 4.0)
    assert check.slack == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        check_poisson_lsi([1.0, -1.0], 1.0)
    with pytest.raises(ValueError):
        check_poisson_lsi([1.0], 0.0)


def test_binomial_lsi_random_functions(rng):
    for _ in range(20):
        f = np.exp(rng.normal(0.0, 1.0, 21))
        check = check_binomial_lsi(f, 5.0, 20)
        assert check.holds
        assert check.dominated is True


def test_binomial_lsi_rejects_bad_input():
    with pytest.raises(ValueError):
        check_binomial_lsi(np.ones(5), 1.0, 5)
    with pytest.raises(ValueError):
        check_binomial_lsi(np.ones(6), 6.0, 5)


def test_equal_mass_partition():
    partition = CellPartition.equal_mass(8)
    assert partition.cells == 8
    assert np.allclose(partition.masses, 1 / 8, atol=1e-12)
    assert partition.alphas(ModelParams(mu=4.0, rho=1.0)) == pytest.approx([0.5] * 8)
    assert partition.refines(CellPartition.equal_mass(4))
    assert not CellPartition.equal_mass(4).refines(partition)
    assert partition.occupation([-10.0, 0.01, 10.0, 10.0]).tolist() == [1, 0, 0, 0, 1, 0, 0, 2]
    with pytest.raises(ValueError):
        CellPartition((0.5, 0.1))
    with pytest.raises(ValueError):
        CellPartition.equal_mass(0)


def test_grid_masses_match_law_masses(coarse_grid):
    partition = CellPartition.equal_mass(4)
    law = Gaussian(0.1, 0.2)
    assert partition.grid_masses(law.pdf(coarse_grid.points), coarse_grid) == pytest.approx(
        partition.law_masses(law), abs=2e-3
    )


def test_product_entropy_vanishes_at_reference(params, coarse_grid):
    reference = ProductState.from_law(params.mean_n, Maxwellian(), coarse_grid)
    assert product_state_entropy(reference, params) == pytest.approx(0.0, abs=1e-9)
    empty = ProductState.from_law(0.0, Maxwellian(), coarse_grid)
    assert product_state_entropy(empty, params) == params.mean_n


def test_coarse_graining_lowers_entropy(params, hot_state):
    full = product_state_entropy(hot_state, params)
    coarse = product_state_coarse_entropy(hot_state, CellPartition.equal_mass(8), params)
    assert 0.0 < coarse <= full
    number_only = product_state_coarse_entropy(hot_state, CellPartition(), params)
    eta, mean = hot_state.eta, params.mean_n
    assert number_only == pytest.approx(mean - eta + eta * math.log(eta / mean), rel=1e-10)


def test_number_law_relative_entropy(params):
    assert number_law_relative_entropy(NumberDistribution.poisson(20.0, 200), params) == pytest.approx(0.0, abs=1e-10)
    assert number_law_relative_entropy(NumberDistribution.delta(0, 10), params) == pytest.approx(20.0)


def test_occupation_function_lemma(coarse_grid):
    params = ModelParams(mu=4.0, rho=1.0, lam=1.0)
    ps = ProductState.from_law(3.0, Gaussian(0.0, 2 * MAXWELLIAN_VARIANCE), coarse_grid)
    F = product_occupation_function(ps, CellPartition((0.0,)), params, n_max=30)
    assert F.truncated
    assert F.expectation() == pytest.approx(1.0, abs=1e-8)
    lemma = F.check_lemma()
    assert lemma.holds
    assert lemma.slack > 0


def test_occupation_function_validation():
    with pytest.raises(ValueError):
        OccupationFunction([[0], [0]], [1.0, 1.0], [1.0])
    with pytest.raises(ValueError):
        OccupationFunction([[0]], [-1.0], [1.0])
    with pytest.raises(ValueError):
        OccupationFunction([[0, 1]], [1.0], [1.0])


def test_psi_infinite_when_support_is_broken():
    F = OccupationFunction([[1]], [2.0], [1.0])
    assert F.psi() == math.inf
    assert F.psi(support_only=True) == 0.0


def test_psi_of_constant_function_is_zero():
    vectors = [[a, b] for a in range(4) for b in range(4)]
    F = OccupationFunction(vectors, np.ones(16), [0.5, 0.5], truncated=True)
    assert F.psi() == 0.0


def test_empirical_occupation_function(rng):
    occupations = rng.poisson(1.0, size=(2000, 2))
    F = OccupationFunction.from_samples(occupations, np.array([1.0, 1.0]))
    assert F.expectation() == pytest.approx(1.0, abs=1e-12)
    assert plug_in_entropy(occupations, np.array([1.0, 1.0])) >= 0.0
    corrected = plug_in_entropy(occupations, np.array([1.0, 1.0]), miller_madow=True)
    assert corrected < plug_in_entropy(occupations, np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        plug_in_entropy(occupations[:10], np.array([1.0, 1.0]))
    with pytest.raises(NumericalContractError):
        OccupationFunction.from_samples(np.array([[1, 0]]), np.array([0.0, 1.0]))


def test_bootstrap_entropy_spread(rng):
    occupations = rng.poisson(1.0, size=(2000, 2))
    alphas = np.array([1.0, 1.0])
    estimates = bootstrap_entropy(occupations, alphas, np.random.default_rng(1), resamples=40)
    assert estimates.shape == (40,)
    assert np.std(estimates) > 0
    assert np.mean(estimates) == pytest.approx(plug_in_entropy(occupations, alphas), abs=0.05)


def test_analytic_decay_holds(params, hot_state):
    points = analytic_entropy_decay(hot_state, params, [0.0, 0.5, 1.0, 2.0, 5.0])
    assert all(p.holds for p in points)
    assert points[0].entropy == pytest.approx(points[0].bound)
    assert points[-1].entropy < points[0].entropy
    s0 = product_state_entropy(hot_state, params)
    assert entropy_production_check(hot_state, params, [0.0, 1.0, 3.0]) <= 1e-3 * max(1.0, s0)


def test_entropy_decay_experiment(coarse_grid):
    params = ModelParams(mu=4.0, rho=1.0, lam=1.0)
    report = entropy_decay_experiment(
        ProductStart(8.0),
        params,
        [0.0, 1.0],
        1000,
        seed=3,
        partition=CellPartition.equal_mass(2),
        grid=coarse_grid,
        resamples=50,
    )
    assert report.analytic_holds
    assert report.points[-1].holds
    assert report.points[0].s_estimate == pytest.approx(report.s0, abs=0.3)
    assert report.s0 == pytest.approx(4 - 8 + 8 * math.log(2), rel=1e-8)
    payload = report.to_dict()
    assert payload["replicas"] == 1000
    assert [p["t"] for p in payload["checkpoints"]] == [0.0, 1.0]
    assert payload["undersampled"] == report.undersampled
    assert all("distinct_vectors" in p and "miller_madow_bias" in p for p in payload["checkpoints"])


def test_entropy_decay_experiment_needs_replicas(params):
    with pytest.raises(ValueError):
        entropy_decay_experiment(ProductStart(2.0), params, [0.0], 10, seed=0)


def _reservoir_samples(rng, eta, replicas):
    """Replica states with Poisson(eta) particles and Maxwellian velocities."""
    counts = rng.poisson(eta, replicas)
    velocities = Maxwellian().sample(rng, int(counts.sum()))
    return np.split(velocities, np.cumsum(counts)[:-1])


def test_single_cell_reduces_to_number_law(rng):
    params = ModelParams(mu=4.0, rho=1.0, lam=1.0)
    counts = rng.poisson(3.0, 2000)
    samples = [np.zeros(c) for c in counts]
    expected = number_law_relative_entropy(NumberDistribution(np.bincount(counts) / counts.size), params)
    assert coarse_grained_entropy(samples, CellPartition.equal_mass(1), params) == pytest.approx(expected, abs=1e-12)


def test_reservoir_samples_have_near_zero_entropy(rng):
    params = ModelParams(mu=2.0, rho=1.0, lam=1.0)
    partition = CellPartition.equal_mass(4)
    samples = _reservoir_samples(rng, params.mean_n, 100_000)
    assert abs(coarse_grained_entropy(samples, partition, params)) < 0.05
    assert not sampling_diagnostic(partition.occupations(samples)).undersampled


def test_hot_reservoir_product_entropy(rng, params, coarse_grid):
    partition = CellPartition.equal_mass(2)
    expected = 15.0 - 5.0 * math.log(4.0)
    samples = _reservoir_samples(rng, 5.0, 100_000)
    assert coarse_grained_entropy(samples, partition, params) == pytest.approx(expected, abs=0.05)
    ps = ProductState.from_law(5.0, Maxwellian(), coarse_grid)
    assert product_state_coarse_entropy(ps, partition, params) == pytest.approx(expected, abs=1e-8)


def test_psi_of_exponential_function():
    c, alpha = 0.5, 2.0
    n = np.arange(61)
    F = OccupationFunction(n[:, None], np.exp(c * n), [alpha], truncated=True)
    expected = alpha * c * math.expm1(c) * math.exp(alpha * math.expm1(c))
    assert dirichlet_psi(F) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("f0, f1, alpha", [(2.0, 0.5, 0.3), (0.2, 5.0, 0.9), (1.0, 1.0, 0.5)])
def test_binomial_single_trial_against_two_point(f0, f1, alpha):
    binomial = check_binomial_lsi([f0, f1], alpha, 1)
    two_point = check_two_point(f0, f1, 1.0 - alpha)
    assert binomial.lhs == pytest.approx(two_point.lhs, abs=1e-12)
    # the binomial Dirichlet term carries alpha where the two-point one has alpha (1 - alpha)
    gap = alpha**2 * (f1 - f0) * (math.log(f1) - math.log(f0))
    assert binomial.rhs - two_point.rhs == pytest.approx(gap, abs=1e-12)


def test_sampling_diagnostic_bias():
    diagnostic = SamplingDiagnostic(replicas=1000, distinct=11)
    assert diagnostic.bias == pytest.approx(0.005)
    assert diagnostic.coverage == pytest.approx(0.011)
    assert not diagnostic.undersampled
    assert SamplingDiagnostic(1000, 11, tolerance=0.001).undersampled
    counted = sampling_diagnostic(np.array([[0, 1], [0, 1], [2, 0]]))
    assert (counted.replicas, counted.distinct) == (3, 2)
    assert counted.to_dict()["distinct_vectors"] == 2
    with pytest.raises(ValueError):
        sampling_diagnostic(np.empty((0, 2)))
    with pytest.raises(ValueError):
        sampling_diagnostic(np.array([[1]]), tolerance=0.0)


def test_many_cells_at_large_reservoir_are_undersampled(rng):
    partition = CellPartition.equal_mass(8)
    samples = _reservoir_samples(rng, 20.0, 1000)
    diagnostic = sampling_diagnostic(partition.occupations(samples))
    assert diagnostic.undersampled
    assert diagnostic.bias > 0.4


def test_entropy_decay_experiment_flags_undersampling(mocker, coarse_grid):
    mock_logger = mocker.patch("src.kac.entropy.logger")
    report = entropy_decay_experiment(
        ProductStart(2.0),
        ModelParams(mu=2.0, rho=1.0, lam=1.0),
        [0.0, 1.0],
        1000,
        seed=5,
        partition=CellPartition.equal_mass(4),
        grid=coarse_grid,
        resamples=20,
        bias_tolerance=1e-6,
    )
    assert report.undersampled
    assert not report.monte_carlo_holds
    assert report.to_dict()["undersampled"] is True
    warnings = [call.args[0] for call in mock_logger.warning.call_args_list]
    assert len(warnings) == 2
    assert all("widen R or coarsen the partition" in w for w in warnings)
