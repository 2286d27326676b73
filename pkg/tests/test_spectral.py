import math

import numpy as np
import pytest

from src.kac.model import ModelParams
from src.kac.spectral import (
    V4E_SECTORS,
    ExcitationIndex,
    TruncatedOperator,
    a_2n,
    build_collision_block,
    build_collision_block_V4e,
    build_generator_block,
    build_thermostat_matrix,
    gap2_bounds,
    gap2_condition,
    gershgorin_level_bound,
    gershgorin_lower_bounds,
    hermite_L,
    hermite_table,
    maxwellian_gauss_hermite,
    pair_rotation_tensor,
    second_gap_estimate,
    sigma,
    sigma_square_sum,
    spectral_gaps,
    tau,
)
from src.utils.errors import QuadratureError

LARGE_RESERVOIR = ModelParams(mu=512.0, rho=1.0, lam=1.0)


def test_hermite_basis_is_orthonormal():
    nodes, weights = maxwellian_gauss_hermite()
    assert math.fsum(weights) == pytest.approx(1.0, abs=1e-14)
    table = hermite_table(8, nodes)
    gram = (table * weights) @ table.T
    assert np.allclose(gram, np.eye(9), atol=1e-12)


def test_hermite_L_low_orders():
    v = np.array([-0.3, 0.0, 0.7])
    x = math.sqrt(2 * math.pi) * v
    assert np.allclose(hermite_L(0, v), 1.0)
    assert np.allclose(hermite_L(1, v), x)
    assert np.allclose(hermite_L(2, v), (x**2 - 1) / math.sqrt(2))
    assert isinstance(hermite_L(3, 0.2), float)
    assert np.allclose(hermite_table(4, v)[4], hermite_L(4, v))
    with pytest.raises(ValueError):
        hermite_L(-1, 0.0)


def test_tau_exact_values():
    assert tau(0) == 1.0
    assert tau(1) == 0.5
    assert tau(2) == 3 / 8
    assert tau(3) == 5 / 16


def test_sigma_forms_agree():
    for n in range(2, 21):
        for k in range(1, n):
            assert abs(sigma(n, k, "sqrt") - sigma(n, k, "binomial")) <= 1e-12
    with pytest.raises(ValueError):
        sigma(3, 0)
    with pytest.raises(ValueError):
        sigma(3, 1, form="other")


def test_a_2n_bounded_by_two():
    assert all(a_2n(n) <= 2.0 for n in range(1, 31))
    assert all(sigma_square_sum(n) <= math.pi / 2 * tau(n) for n in range(2, 21))


def test_excitation_index():
    alpha = ExcitationIndex.from_sector(2, (4,))
    assert alpha.counts == (2, 0, 0, 0, 1)
    assert alpha.total == 3
    assert alpha.excited == 1
    assert alpha.degree == 4
    assert ExcitationIndex((1, 0, 0)) == ExcitationIndex((1,))
    assert ExcitationIndex(()).label() == "e0"
    assert ExcitationIndex.from_sector(0, (2, 2)).label() == "e(2^2)"
    with pytest.raises(ValueError):
        ExcitationIndex((-1,))


def test_truncated_operator_requires_symmetry():
    labels = [ExcitationIndex((1,)), ExcitationIndex((2,))]
    with pytest.raises(ValueError):
        TruncatedOperator(np.array([[0.0, 1.0], [0.0, 0.0]]), labels)
    op = TruncatedOperator(np.array([[-1.0, 0.5], [0.5, -2.0]]), labels)
    assert op.element(labels[0], labels[1]) == 0.5
    values = op.eigenvalues()
    assert values[0] > values[1]


def test_pair_rotation_tensor_structure():
    table = pair_rotation_tensor(4)
    for (a, b), row in table.items():
        assert all(p + q == a + b for p, q in row)
    assert table[(2, 0)][(2, 0)] == pytest.approx(tau(1), abs=1e-12)
    assert table[(4, 0)][(4, 0)] == pytest.approx(tau(2), abs=1e-12)
    assert (1, 0) not in table or not table[(1, 0)]


def test_pair_rotation_tensor_checks_quadrature():
    with pytest.raises(QuadratureError):
        pair_rotation_tensor(30, n_nodes=10)


def test_thermostat_matrix_is_diagonal(params):
    labels = [ExcitationIndex.from_sector(k, (2,)) for k in range(3)]
    G = build_thermostat_matrix(labels, params)
    assert np.allclose(np.diag(G.matrix), [-1.0, -2.0, -3.0])
    with pytest.raises(ValueError):
        build_thermostat_matrix(labels + labels[:1], params)


def test_collision_block_vanishes_without_collisions(free_params):
    block = build_collision_block([(4,), (2, 2)], 5, free_params)
    assert not np.any(block.matrix)


def test_collision_block_requires_closed_sectors(params):
    with pytest.raises(ValueError):
        build_collision_block([(4,)], 3, params)
    with pytest.raises(ValueError):
        build_collision_block([(0, 2)], 3, params)


def test_energy_mode_is_an_eigenvector(params):
    block = build_generator_block([(2,), (1, 1)], 6, params)
    energy = ExcitationIndex.from_sector(0, (2,))
    column = block.matrix[:, block.labels.index(energy)]
    expected = np.zeros(len(block.labels))
    expected[block.labels.index(energy)] = -params.rho
    assert np.allclose(column, expected, atol=1e-10)
    assert block.eigenvalues()[0] == pytest.approx(-params.rho, abs=1e-10)


def test_collisions_are_dissipative(params):
    block = build_collision_block([(3,), (2, 1), (1, 1, 1)], 4, params)
    assert block.eigenvalues()[0] <= 1e-10


def test_v4e_requires_room(params):
    with pytest.raises(ValueError):
        build_collision_block_V4e(1, params)


def test_gap2_condition_and_bounds():
    assert gap2_condition(LARGE_RESERVOIR)
    assert not gap2_condition(ModelParams(mu=20.0, rho=1.0, lam=1.0))
    lower, upper = gap2_bounds(LARGE_RESERVOIR)
    assert lower == -1.25
    assert upper == pytest.approx(-1.25 + 2 / math.sqrt(512))


def test_second_gap_inside_bounds_and_monotone():
    coarse = second_gap_estimate(LARGE_RESERVOIR, 8)
    fine = second_gap_estimate(LARGE_RESERVOIR, 14)
    lower, upper = gap2_bounds(LARGE_RESERVOIR)
    assert lower - 1e-12 <= fine <= upper
    assert coarse <= fine + 1e-12


def test_gershgorin_bounds():
    odd, even = gershgorin_lower_bounds(1, LARGE_RESERVOIR)
    root = math.sqrt(1 / 512)
    assert odd == pytest.approx(min(2 - root, 2 - root))
    assert even == pytest.approx(min(1 + (1 - 2 * tau(1)) - 2 * root, 2 - 2 * root))
    assert gershgorin_level_bound(1, LARGE_RESERVOIR) == odd
    with pytest.raises(ValueError):
        gershgorin_level_bound(2, LARGE_RESERVOIR)
    with pytest.raises(ValueError):
        gershgorin_lower_bounds(0, LARGE_RESERVOIR)


def test_spectral_gaps_report():
    report = spectral_gaps(LARGE_RESERVOIR, k_max=12, drift_window=4)
    assert report.delta == -1.0
    assert report.condition_satisfied
    assert report.within_bounds
    assert report.drift >= 0
    payload = report.to_dict()
    assert set(payload) >= {"delta", "delta2", "bounds", "gershgorin", "truncation"}
    assert payload["truncation"]["k_max"] == 12
    assert all(bound > -report.delta2 for bound in report.gershgorin.values())


def test_spectral_gaps_warns_outside_condition(mocker, params):
    mock_logger = mocker.patch("src.kac.spectral.logger")
    report = spectral_gaps(params, k_max=4, drift_window=2)
    assert not report.condition_satisfied
    mock_logger.warning.assert_called_once()


@pytest.mark.parametrize("mu", [20.0, 512.0])
@pytest.mark.parametrize("lam", [1.0, 2.0])
def test_collision_block_single_mode_diagonal(mu, lam):
    params = ModelParams(mu=mu, rho=1.0, lam=lam)
    even = build_collision_block(V4E_SECTORS, 3, params)
    four = ExcitationIndex.from_sector(0, (4,))
    assert even.element(four, four) == pytest.approx(-lam / 4, abs=1e-10)
    odd = build_collision_block([(3,), (2, 1), (1, 1, 1)], 3, params)
    three = ExcitationIndex.from_sector(0, (3,))
    assert odd.element(three, three) == pytest.approx(-lam, abs=1e-10)


def test_second_gap_without_collisions_is_two_rho():
    assert second_gap_estimate(ModelParams(mu=512.0, rho=1.0, lam=0.0), 6) == pytest.approx(-2.0, abs=1e-12)


def test_gershgorin_level_values():
    assert gershgorin_level_bound(1, LARGE_RESERVOIR) == pytest.approx(1.95581, abs=1e-5)
    assert gershgorin_level_bound(6, LARGE_RESERVOIR) == pytest.approx(1.28661, abs=1e-5)
