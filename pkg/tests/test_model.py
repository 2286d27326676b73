import math

import numpy as np
import pytest
from scipy import integrate, stats

from src.kac.distributions import (
    Bimodal,
    FixedCountStart,
    Gaussian,
    InitialCondition,
    Maxwellian,
    ProductStart,
    StationaryStart,
    VelocityLaw,
)
from src.kac.grid import VelocityGrid
from src.kac.model import (
    MAXWELLIAN_VARIANCE,
    GrandCanonicalRef,
    ModelParams,
    ParticleState,
    gc_number_weight,
    kac_collide,
    log_number_weight,
    maxwellian_cdf,
    maxwellian_pdf,
    sample_maxwellian,
)


def test_params_derived_rates():
    params = ModelParams(mu=20.0, rho=2.0, lam=3.0)
    assert params.mean_n == 10.0
    assert params.lambda_tilde == pytest.approx(0.3)
    assert params.lambda_tilde * params.mu == pytest.approx(params.lam * params.rho)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"mu": 1.0, "rho": 0.0, "lam": 1.0},
        {"mu": 1.0, "rho": 1.0, "lam": -1.0},
        {"mu": -1.0, "rho": 1.0},
        {"mu": 0.0, "rho": 1.0, "lam": 1.0},
        {"mu": math.inf, "rho": 1.0},
    ],
)
def test_params_rejects_invalid_rates(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


def test_pure_death_params_allowed():
    params = ModelParams(mu=0.0, rho=1.0, lam=0.0)
    assert params.lambda_tilde == 0.0
    assert params.mean_n == 0.0


def test_particle_state_validates():
    with pytest.raises(ValueError):
        ParticleState([0.1, math.nan])
    with pytest.raises(ValueError):
        ParticleState([0.1], time=-1.0)
    state = ParticleState([1.0, 2.0])
    assert state.n == 2
    assert state.kinetic_sum() == 5.0


def test_maxwellian_pdf_values():
    assert maxwellian_pdf(0.0) == 1.0
    v = np.linspace(-3, 3, 101)
    assert np.array_equal(maxwellian_pdf(v), maxwellian_pdf(-v))
    mass, _ = integrate.quad(maxwellian_pdf, -6, 6, epsabs=1e-13)
    assert mass == pytest.approx(1.0, abs=1e-10)
    second, _ = integrate.quad(lambda x: x * x * maxwellian_pdf(x), -6, 6, epsabs=1e-13)
    assert second == pytest.approx(1 / (2 * math.pi), abs=1e-10)


def test_maxwellian_cdf_matches_density():
    value, _ = integrate.quad(maxwellian_pdf, -8, 0.3)
    assert maxwellian_cdf(0.3) == pytest.approx(value, abs=1e-10)


def test_sample_maxwellian_moments(rng):
    samples = sample_maxwellian(rng, 1_000_000)
    sd = math.sqrt(MAXWELLIAN_VARIANCE)
    assert abs(samples.mean()) < 3 * sd / 1000
    var_se = MAXWELLIAN_VARIANCE * math.sqrt(2 / 1_000_000)
    assert abs(samples.var() - MAXWELLIAN_VARIANCE) < 3 * var_se
    assert stats.kstest(samples[:20_000], maxwellian_cdf).pvalue > 0.001


def test_sample_maxwellian_scalar(rng):
    assert isinstance(sample_maxwellian(rng), float)


def test_kac_collide_rotations():
    assert kac_collide(0.3, -1.2, 0.0) == pytest.approx((0.3, -1.2))
    v, w = kac_collide(0.3, -1.2, math.pi / 2)
    assert v == pytest.approx(1.2)
    assert w == pytest.approx(0.3)


def test_kac_collide_conserves_energy(rng):
    theta = rng.uniform(0, 2 * math.pi, 100)
    v, w = kac_collide(1.0, 2.0, theta)
    assert np.max(np.abs(v**2 + w**2 - 5.0)) < 1e-12
    pairs = rng.normal(0, 10, (2, 1000))
    v, w = kac_collide(pairs[0], pairs[1], rng.uniform(0, 2 * math.pi, 1000))
    before = pairs[0] ** 2 + pairs[1] ** 2
    assert np.all(np.abs(v**2 + w**2 - before) <= 1e-14 * before)


def test_gc_number_weight_values():
    assert gc_number_weight(0, ModelParams(mu=1.0, rho=1.0)) == pytest.approx(math.exp(-1), rel=1e-12)
    params = ModelParams(mu=20.0, rho=1.0)
    weights = gc_number_weight(np.arange(201), params)
    assert math.fsum(weights) == pytest.approx(1.0, abs=1e-12)
    n = np.arange(1, 51)
    residual = params.rho * n * weights[1:51] - params.mu * weights[:50]
    assert np.max(np.abs(residual) / (params.mu * weights[:50])) < 1e-12


def test_gc_number_weight_matches_poisson_pmf():
    params = ModelParams(mu=512.0, rho=1.0)
    n = np.arange(0, 5121)
    expected = stats.poisson.pmf(n, 512.0)
    ours = gc_number_weight(n, params)
    mask = expected > 1e-300
    assert np.allclose(ours[mask], expected[mask], rtol=1e-10, atol=0)


def test_log_number_weight_rejects_negative():
    with pytest.raises(ValueError):
        log_number_weight(-1, ModelParams(mu=1.0, rho=1.0))


def test_grand_canonical_reference(rng):
    reference = GrandCanonicalRef(ModelParams(mu=20.0, rho=1.0))
    assert reference.recursion_residual(50) < 1e-12
    assert reference.weights(5).shape == (6,)
    counts = [reference.sample_state(rng).n for _ in range(2000)]
    assert np.mean(counts) == pytest.approx(20.0, abs=5 * math.sqrt(20 / 2000))


def test_velocity_law_from_dict():
    assert isinstance(VelocityLaw.from_dict(None), Maxwellian)
    law = VelocityLaw.from_dict({"kind": "gaussian", "mean": 0.1, "var": 0.2})
    assert law == Gaussian(0.1, 0.2)
    assert law.second_moment() == pytest.approx(0.21)
    assert VelocityLaw.from_dict({"kind": "bimodal"}).second_moment() == pytest.approx(0.3)
    with pytest.raises(ValueError):
        VelocityLaw.from_dict({"kind": "cauchy"})
    with pytest.raises(ValueError):
        Gaussian(var=0.0)


@pytest.mark.parametrize("law", [Maxwellian(), Gaussian(0.2, 0.1), Bimodal(0.5, 0.05)])
def test_velocity_laws_are_normalised(law):
    grid = VelocityGrid()
    assert grid.integrate(law.pdf(grid.points)) == pytest.approx(1.0, abs=1e-8)
    assert law.cdf(np.array([-10.0, 10.0])) == pytest.approx([0.0, 1.0], abs=1e-12)
    assert grid.integrate(grid.points**2 * law.pdf(grid.points)) == pytest.approx(law.second_moment(), rel=1e-6)


def test_initial_conditions(rng, params):
    assert isinstance(InitialCondition.from_dict(None, params), StationaryStart)
    product = InitialCondition.from_dict({"kind": "product", "eta": 3.0}, params)
    assert isinstance(product, ProductStart) and isinstance(product.law, Maxwellian)
    assert product.expected_energy() == pytest.approx(3.0 * MAXWELLIAN_VARIANCE)
    fixed = InitialCondition.from_dict({"kind": "fixed", "n": 4, "law": {"kind": "gaussian", "var": 0.5}}, params)
    assert fixed.sample(rng).n == 4
    assert fixed.expected_energy() == pytest.approx(2.0)
    assert FixedCountStart(0).sample(rng).n == 0
    with pytest.raises(ValueError):
        InitialCondition.from_dict({"kind": "uniform"}, params)
    with pytest.raises(ValueError):
        ProductStart(-1.0)


def test_velocity_grid():
    grid = VelocityGrid(v_max=1.0, dv=0.25)
    assert grid.size == 9
    assert grid.points[0] == -1.0 and grid.points[-1] == 1.0
    assert grid.edges.size == 10
    assert grid.index_of(0.0) == pytest.approx(4.0)
    assert grid.coarsen(2).size == 5
    with pytest.raises(ValueError):
        VelocityGrid(v_max=1.0, dv=0.3)
