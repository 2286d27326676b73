import math

import numpy as np
import pytest
from scipy import stats

from src.kac.distributions import FixedCountStart, Gaussian, Maxwellian, ProductStart, StationaryStart
from src.kac.grid import VelocityGrid
from src.kac.model import MAXWELLIAN_VARIANCE, ModelParams, maxwellian_pdf
from src.kac.number_chain import (
    NumberDistribution,
    ProductState,
    birth_death_rhs,
    closed_form_moments,
    default_truncation,
    evolve_number_dist,
    factorial_moment,
    factorial_moment_coefficients,
    factorial_moment_flow,
    initial_number_law,
    moments_table,
    newton_rate,
    number_law_trajectory,
    product_state_flow,
)
from src.utils.errors import TruncationError


def test_number_distribution_basics():
    p = NumberDistribution.poisson(3.0, 60)
    assert p.n_max == 60
    assert p.total_mass == pytest.approx(1.0, abs=1e-14)
    assert p.mean() == pytest.approx(3.0, rel=1e-12)
    assert p.variance() == pytest.approx(3.0, rel=1e-10)
    delta = NumberDistribution.delta(2, 5)
    assert delta.mean() == 2.0
    assert delta.total_variation(NumberDistribution.delta(3, 8)) == 1.0
    with pytest.raises(ValueError):
        NumberDistribution(np.array([0.5, -0.1]))


def test_rhs_conserves_mass_with_extension(params):
    p = NumberDistribution.poisson(5.0, 30)
    assert math.fsum(birth_death_rhs(p, params, extended=True)) == pytest.approx(0.0, abs=1e-14)
    assert birth_death_rhs(p, params).size == 31


def test_rhs_vanishes_at_poisson(params):
    p = NumberDistribution.poisson(params.mean_n, default_truncation(params))
    assert np.max(np.abs(birth_death_rhs(p, params)[:-1])) < 1e-12


def test_stationary_point_is_preserved(params):
    p0 = NumberDistribution.poisson(params.mean_n, default_truncation(params))
    p = evolve_number_dist(p0, params, 5.0)
    assert p.total_variation(p0) < 1e-9


def test_pure_death_from_delta():
    params = ModelParams(mu=0.0, rho=1.0)
    p = evolve_number_dist(NumberDistribution.delta(1, 5), params, 1.0)
    assert p.probs[1] == pytest.approx(math.exp(-1), rel=1e-8)
    assert p.probs[0] == pytest.approx(1 - math.exp(-1), rel=1e-8)


def test_pure_birth_death_matches_binomial_poisson():
    # from N=0 the law stays Poisson with mean eta(t)
    params = ModelParams(mu=20.0, rho=1.0)
    p0 = NumberDistribution.delta(0, default_truncation(params))
    laws = number_law_trajectory(p0, params, [0.5, 2.0])
    for t, law in zip([0.5, 2.0], laws):
        expected = NumberDistribution.poisson(20 * (1 - math.exp(-t)), p0.n_max)
        assert law.total_variation(expected) < 1e-8


def test_step_refinement_reduces_error(params):
    p0 = NumberDistribution.delta(0, default_truncation(params))
    exact = NumberDistribution.poisson(20 * (1 - math.exp(-1.0)), p0.n_max)
    coarse = evolve_number_dist(p0, params, 1.0, dt=4e-3)
    fine = evolve_number_dist(p0, params, 1.0, dt=2e-3)
    coarse_error = coarse.total_variation(exact)
    assert fine.total_variation(exact) < coarse_error or coarse_error < 1e-12


def test_truncation_error_raised():
    params = ModelParams(mu=20.0, rho=1.0)
    with pytest.raises(TruncationError):
        evolve_number_dist(NumberDistribution.delta(0, 10), params, 5.0)


def test_step_too_large_rejected(params):
    with pytest.raises(ValueError):
        evolve_number_dist(NumberDistribution.delta(0, 80), params, 1.0, dt=0.1)


def test_closed_form_moments():
    params = ModelParams(mu=20.0, rho=1.0, lam=1.0)
    m = closed_form_moments(0.0, 0.0, params, 1.0)
    assert m.n == pytest.approx(20 * (1 - math.exp(-1)))
    assert m.energy_per_particle == pytest.approx(MAXWELLIAN_VARIANCE)
    assert newton_rate(m, params) == pytest.approx(0.0, abs=1e-15)
    hot = closed_form_moments(5.0, 5.0, params, 0.0)
    assert newton_rate(hot, params) < 0
    with pytest.raises(ValueError):
        closed_form_moments(0.0, 0.0, params, 0.0)


def test_moments_table_marks_empty_state():
    rows = moments_table(0.0, 0.0, ModelParams(mu=2.0, rho=1.0), [0.0, 1.0])
    assert rows[0][:3] == [0.0, 0.0, 0.0]
    assert math.isnan(rows[0][3])
    assert rows[1][3] == pytest.approx(MAXWELLIAN_VARIANCE)


def test_initial_number_law(params):
    assert initial_number_law(StationaryStart(params), params).mean() == pytest.approx(20.0, rel=1e-10)
    wide = initial_number_law(ProductStart(100.0), params)
    assert wide.mean() == pytest.approx(100.0, rel=1e-10)
    fixed = initial_number_law(FixedCountStart(90), params)
    assert fixed.n_max >= 110 and fixed.probs[90] == 1.0
    assert initial_number_law(FixedCountStart(3), params, n_max=40).n_max == 40
    with pytest.raises(ValueError):
        initial_number_law(FixedCountStart(50), params, n_max=40)


def test_factorial_moments_of_poisson():
    p = NumberDistribution.poisson(4.0, 80)
    for r in range(5):
        assert factorial_moment(p, r) == pytest.approx(4.0**r, rel=1e-10)
    with pytest.raises(ValueError):
        factorial_moment(p, -1)


def test_factorial_moment_flow_matches_chain(params):
    p0 = NumberDistribution.delta(6, default_truncation(params))
    nr0 = [factorial_moment(p0, r) for r in range(4)]
    flow = factorial_moment_flow(nr0, params, 0.7)
    law = evolve_number_dist(p0, params, 0.7)
    for r in range(4):
        assert flow[r] == pytest.approx(factorial_moment(law, r), rel=1e-7)
    coefficients = factorial_moment_coefficients(nr0, params)
    assert math.fsum(coefficients[2]) == pytest.approx(nr0[2])
    with pytest.raises(ValueError):
        factorial_moment_coefficients([0.5, 1.0], params)


def test_product_state_validation():
    grid = VelocityGrid(v_max=4.0, dv=0.05)
    with pytest.raises(ValueError):
        ProductState(1.0, 2 * maxwellian_pdf(grid.points), grid)
    with pytest.raises(ValueError):
        ProductState(-1.0, maxwellian_pdf(grid.points), grid)


def test_product_state_flow(params, coarse_grid):
    ps0 = ProductState.from_law(5.0, Gaussian(0.0, 2 * MAXWELLIAN_VARIANCE), coarse_grid)
    ps = product_state_flow(ps0, params, 1.0)
    decay = math.exp(-1.0)
    assert ps.eta == pytest.approx(decay * 5 + (1 - decay) * 20)
    assert coarse_grid.integrate(ps.g) == pytest.approx(1.0, abs=1e-6)
    expected_l = decay * ps0.relative_density(params) + (1 - decay) * maxwellian_pdf(coarse_grid.points)
    assert np.allclose(ps.relative_density(params), expected_l, atol=1e-12)


def test_product_state_flow_reaches_reference(params, coarse_grid):
    ps0 = ProductState.from_law(80.0, Maxwellian(), coarse_grid)
    ps = product_state_flow(ps0, params, 40.0)
    assert ps.eta == pytest.approx(20.0, rel=1e-12)
    assert np.allclose(ps.g, maxwellian_pdf(coarse_grid.points), atol=1e-12)


def test_poisson_truncation_default_is_wide(params):
    n_max = default_truncation(params)
    assert stats.poisson.sf(n_max, params.mean_n) < 1e-12
