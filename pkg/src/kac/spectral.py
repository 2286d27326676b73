"""
Spectral Module

Fock-space machinery for the ground-state-transformed generator
L = G + lambda_tilde K on the Gamma-weighted space.

Basis:
    Normalised Hermite polynomials L_n(v) = He_n(sqrt(2 pi) v) / sqrt(n!)
    are orthonormal under gamma. An excitation index alpha counts alpha_0
    "number" excitations and alpha_i Hermite excitations of mode i >= 1;
    G e_alpha = -rho lambda(alpha) e_alpha with lambda(alpha) = sum alpha_i.

Generator blocks:
    A block is a list of sectors, each a multiset A of nonzero modes. The
    vector |A, k> has N-particle component c(N) S_A(v_1..v_N), where S_A sums
    prod_m L_{a_m}(v_{i_m}) over ordered tuples of distinct particles, and
    c(N + |A|) = (rho/mu)^{|A|/2} C_k(N) / sqrt(sym(A)) with C_k the
    orthonormal Charlier polynomials of Poisson(mu/rho) and sym(A) the
    product of multiplicity factorials. These vectors are orthonormal and
    |A, k> carries lambda(alpha) = k + |A|.
    The pair sum K = sum_{i<j} (R_ij - 1) maps |A, k> into sectors reached by
    rotating one or two of its modes. The coefficients of the averaged pair
    rotation on two-variable Hermite products are measured once by
    Gauss-Hermite x trapezoid quadrature (exact for the degrees involved);
    the N-dependence is carried exactly by three operators on the Charlier
    coefficients: multiplication by N, the shift c(N) -> c(N+1) and
    c(N) -> N c(N-1).

Second gap:
    V4e = span of sectors (4) and (2, 2). Its largest eigenvalue below -rho
    is Delta_2; truncating k at k_max is a Rayleigh-Ritz compression, so the
    estimate can only increase with k_max.

Dependencies:
    - numpy: recurrences, quadrature, dense eigensolver
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from src.kac.model import BETA, ModelParams
from src.utils.errors import NumericalContractError, QuadratureError
from src.utils.logger import logger

GAUSS_HERMITE_NODES = 24  # exact for polynomial degree <= 47
ANGULAR_NODES = 64  # exact for trigonometric degree <= 63
DEFAULT_K_MAX = 40
DRIFT_WINDOW = 5
DRIFT_TOLERANCE = 1e-8
COEFFICIENT_FLOOR = 1e-12
V4E_SECTORS = ((4,), (2, 2))
GERSHGORIN_LEVELS = (1, 3, 5, 6, 8, 10)


def hermite_L(n: int, v):
    """Normalised Hermite polynomial L_n(v) by the stable three-term recurrence."""
    if n < 0:
        raise ValueError(f"mode must be >= 0, got {n}")
    x = math.sqrt(BETA) * np.asarray(v, dtype=float)
    previous = np.zeros_like(x)
    current = np.ones_like(x)
    for k in range(n):
        previous, current = current, (x * current - math.sqrt(k) * previous) / math.sqrt(k + 1)
    if current.ndim == 0:
        return float(current)
    return current


def hermite_table(n_max: int, v) -> np.ndarray:
    """Array of L_0..L_{n_max} evaluated at v, shape (n_max + 1,) + v.shape."""
    x = math.sqrt(BETA) * np.asarray(v, dtype=float)
    table = np.empty((n_max + 1,) + x.shape)
    table[0] = 1.0
    if n_max >= 1:
        table[1] = x
    for k in range(1, n_max):
        table[k + 1] = (x * table[k] - math.sqrt(k) * table[k - 1]) / math.sqrt(k + 1)
    return table


def maxwellian_gauss_hermite(n_nodes: int = GAUSS_HERMITE_NODES) -> tuple:
    """Nodes and weights integrating against gamma(v) = exp(-pi v^2); weights sum to 1."""
    x, w = np.polynomial.hermite.hermgauss(n_nodes)
    return x / math.sqrt(math.pi), w / math.sqrt(math.pi)


def tau(n: int) -> float:
    """tau_n = C(2n, n) / 4^n, the angular mean of cos^{2n}."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return math.comb(2 * n, n) / 4**n


def sigma(n: int, k: int, form: str = "sqrt") -> float:
    """Off-diagonal coupling sigma_{n,k} of R_{2n} e0 to R_{2k} R_{2(n-k)} e0.

    Args:
        n, k: Indices with 1 <= k <= n - 1
        form: "sqrt" for sqrt(tau_n tau_k tau_{n-k}), "binomial" for
            tau_n C(n, k) / sqrt(C(2n, 2k))
    """
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} outside 1..{n - 1}")
    if form == "sqrt":
        return math.sqrt(tau(n) * tau(k) * tau(n - k))
    if form == "binomial":
        return tau(n) * math.comb(n, k) / math.sqrt(math.comb(2 * n, 2 * k))
    raise ValueError(f"Unknown form '{form}'")


def sigma_square_sum(n: int) -> float:
    """sum_{k=1}^{floor(n/2)} sigma_{n,k}^2, bounded by (pi/2) tau_n."""
    return math.fsum(sigma(n, k) ** 2 for k in range(1, n // 2 + 1))


def a_2n(n: int) -> float:
    """A_{2n} = (1 - 2 tau_n)^2 + 2 sum_{k=1}^{floor(n/2)} sigma_{n,k}^2 (at most 2)."""
    return (1 - 2 * tau(n)) ** 2 + 2 * sigma_square_sum(n)


@dataclass(frozen=True)
class ExcitationIndex:
    """Multi-index alpha; counts[i] is the multiplicity of mode i."""

    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ValueError("multiplicities must be >= 0")
        while counts and counts[-1] == 0:
            counts = counts[:-1]
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExcitationIndex":
        size = max(mapping, default=-1) + 1
        return cls(tuple(mapping.get(i, 0) for i in range(size)))

    @classmethod
    def from_sector(cls, k: int, modes: Iterable[int]) -> "ExcitationIndex":
        mapping = dict(Counter(modes))
        mapping[0] = mapping.get(0, 0) + k
        return cls.from_mapping(mapping)

    @property
    def total(self) -> int:
        """lambda(alpha): number of excitations."""
        return sum(self.counts)

    @property
    def excited(self) -> int:
        """lambda_0(alpha): excitations of modes >= 1."""
        return sum(self.counts[1:])

    @property
    def degree(self) -> int:
        """d(alpha) = sum i alpha_i, the polynomial degree."""
        return sum(i * c for i, c in enumerate(self.counts))

    def label(self) -> str:
        parts = [f"{i}^{c}" for i, c in enumerate(self.counts) if c]
        return "e(" + ",".join(parts) + ")" if parts else "e0"


@dataclass
class TruncatedOperator:
    """Dense symmetric matrix over an ordered list of excitation labels."""

    matrix: np.ndarray
    labels: list
    rule: str = ""
    symmetry_tolerance: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        size = len(self.labels)
        if self.matrix.shape != (size, size):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match {size} labels")
        scale = max(1.0, float(np.max(np.abs(self.matrix), initial=0.0)))
        asymmetry = float(np.max(np.abs(self.matrix - self.matrix.T), initial=0.0))
        if asymmetry > self.symmetry_tolerance * scale:
            raise ValueError(f"operator not symmetric: defect {asymmetry:.3e}")

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in decreasing order."""
        return np.linalg.eigvalsh(self.matrix)[::-1]

    def element(self, row: ExcitationIndex, col: ExcitationIndex) -> float:
        return float(self.matrix[self.labels.index(row), self.labels.index(col)])


def _check_quadrature(max_degree: int, n_nodes: int, n_angles: int):
    if 2 * n_nodes - 1 < 2 * max_degree or n_angles - 1 < max_degree:
        raise QuadratureError(
            f"{n_nodes} Gauss-Hermite / {n_angles} angular nodes cannot integrate "
            f"degree-{max_degree} pair products exactly"
        )


@lru_cache(maxsize=8)
def pair_rotation_tensor(
    max_degree: int, n_nodes: int = GAUSS_HERMITE_NODES, n_angles: int = ANGULAR_NODES
) -> dict:
    """Coefficients of the angle-averaged pair rotation on Hermite products.

    table[(a, b)][(p, q)] = < L_p(v1) L_q(v2), R_12 [L_a(v1) L_b(v2)] > for
    a + b <= max_degree, with entries below 1e-12 dropped.

    Raises:
        QuadratureError: If the rule is not exact for degree 2 * max_degree
    """
    _check_quadrature(max_degree, n_nodes, n_angles)
    nodes, weights = maxwellian_gauss_hermite(n_nodes)
    theta = 2 * math.pi * np.arange(n_angles) / n_angles
    v1 = nodes[:, None, None]
    v2 = nodes[None, :, None]
    rotated1 = v1 * np.cos(theta) - v2 * np.sin(theta)
    rotated2 = v1 * np.sin(theta) + v2 * np.cos(theta)
    h1 = hermite_table(max_degree, rotated1)
    h2 = hermite_table(max_degree, rotated2)
    basis = hermite_table(max_degree, nodes) * weights

    table = {}
    for a in range(max_degree + 1):
        for b in range(max_degree + 1 - a):
            if a == 0 and b == 0:
                continue
            averaged = (h1[a] * h2[b]).mean(axis=-1)
            projection = basis @ averaged @ basis.T
            table[(a, b)] = {
                (p, q): float(projection[p, q])
                for p in range(max_degree + 1)
                for q in range(max_degree + 1)
                if abs(projection[p, q]) > COEFFICIENT_FLOOR
            }
    return table


def _frame_operators(k_max: int, eta: float) -> dict:
    """Matrices <C_l | Op C_k> of the sector-size operators on Charlier polynomials."""
    size = k_max + 1
    k = np.arange(size, dtype=float)
    number = np.diag(k + eta)
    shift = np.eye(size)
    lift = np.diag(np.full(size, eta))
    off = np.sqrt(eta * k[1:])
    number[np.arange(1, size), np.arange(size - 1)] = off
    number[np.arange(size - 1), np.arange(1, size)] = off
    shift[np.arange(size - 1), np.arange(1, size)] = np.sqrt(k[1:] / eta)
    lift[np.arange(1, size), np.arange(size - 1)] = off
    return {"identity": np.eye(size), "number": number, "shift": shift, "lift": lift}


def _sector(modes: Iterable[int]) -> tuple:
    return tuple(sorted(modes, reverse=True))


def _symmetry_factor(sector: tuple) -> int:
    return math.prod(math.factorial(c) for c in Counter(sector).values())


def collision_terms(sector: tuple, table: dict) -> list:
    """Action of K on a sector as (target sector, frame operator, coefficient) triples."""
    terms = []
    size = len(sector)
    for k in range(size):
        for l in range(k + 1, size):
            rest = sector[:k] + sector[k + 1 : l] + sector[l + 1 :]
            for (p, q), c in table[(sector[k], sector[l])].items():
                if p and q:
                    terms.append((_sector(rest + (p, q)), "identity", c))
                elif p or q:
                    terms.append((_sector(rest + (p or q,)), "lift", c))
    for k in range(size):
        rest = sector[:k] + sector[k + 1 :]
        for (p, q), c in table[(sector[k], 0)].items():
            if p and q:
                terms.append((_sector(rest + (p, q)), "shift", c))
            elif p or q:
                terms.append((_sector(rest + (p or q,)), "number", c))
    terms.append((sector, "identity", -size * (size - 1) / 2))
    terms.append((sector, "number", -float(size)))
    return terms


def _block_labels(sectors: Sequence[tuple], k_max: int) -> list:
    return [ExcitationIndex.from_sector(k, sector) for sector in sectors for k in range(k_max + 1)]


def build_thermostat_matrix(labels: Sequence[ExcitationIndex], params: ModelParams) -> TruncatedOperator:
    """Diagonal G with entries -rho lambda(alpha)."""
    if len(set(labels)) != len(labels):
        raise ValueError("labels must be distinct")
    diagonal = [-params.rho * label.total for label in labels]
    return TruncatedOperator(np.diag(diagonal), list(labels), rule="thermostat G, diagonal")


def build_collision_block(
    sectors: Sequence[Sequence[int]],
    k_max: int,
    params: ModelParams,
    n_nodes: int = GAUSS_HERMITE_NODES,
    n_angles: int = ANGULAR_NODES,
) -> TruncatedOperator:
    """lambda_tilde K on the sectors, k = 0..k_max.

    Raises:
        ValueError: If K maps a sector outside the list
        QuadratureError: If the quadrature is too coarse for the sector degrees
    """
    sectors = [_sector(s) for s in sectors]
    if any(m < 1 for s in sectors for m in s):
        raise ValueError("sector modes must be >= 1")
    labels = _block_labels(sectors, k_max)
    size = k_max + 1
    matrix = np.zeros((len(labels), len(labels)))
    max_degree = max((sum(s) for s in sectors), default=0)
    _check_quadrature(max_degree, n_nodes, n_angles)
    if params.lam == 0 or max_degree == 0:
        return TruncatedOperator(matrix, labels, rule=f"collisions on {sectors}, k<={k_max}")

    eta = params.mean_n
    table = pair_rotation_tensor(max_degree, n_nodes, n_angles)
    frames = _frame_operators(k_max, eta)
    position = {sector: i for i, sector in enumerate(sectors)}
    for source in sectors:
        col = position[source] * size
        for target, op, coefficient in collision_terms(source, table):
            if target not in position:
                raise ValueError(f"sector list not closed under K: {source} -> {target}")
            row = position[target] * size
            scale = (
                coefficient
                * eta ** ((len(target) - len(source)) / 2)
                * math.sqrt(_symmetry_factor(target) / _symmetry_factor(source))
            )
            matrix[row : row + size, col : col + size] += scale * frames[op]
    matrix *= params.lambda_tilde
    asymmetry = float(np.max(np.abs(matrix - matrix.T), initial=0.0))
    if asymmetry > 1e-9 * max(1.0, float(np.max(np.abs(matrix)))):
        raise NumericalContractError(f"collision block not symmetric: defect {asymmetry:.3e}")
    # quadrature rounding only
    matrix = 0.5 * (matrix + matrix.T)
    return TruncatedOperator(matrix, labels, rule=f"collisions on {sectors}, k<={k_max}")


def build_generator_block(
    sectors: Sequence[Sequence[int]],
    k_max: int,
    params: ModelParams,
    n_nodes: int = GAUSS_HERMITE_NODES,
    n_angles: int = ANGULAR_NODES,
) -> TruncatedOperator:
    """L = G + lambda_tilde K restricted to the sectors, k = 0..k_max."""
    collisions = build_collision_block(sectors, k_max, params, n_nodes, n_angles)
    thermostat = build_thermostat_matrix(collisions.labels, params)
    return TruncatedOperator(
        thermostat.matrix + collisions.matrix,
        collisions.labels,
        rule=f"G + lambda_tilde K on {[_sector(s) for s in sectors]}, k<={k_max}",
    )


def build_collision_block_V4e(k_max: int, params: ModelParams) -> TruncatedOperator:
    """L on the even degree-4 space spanned by sectors (4) and (2, 2)."""
    if k_max < 2:
        raise ValueError(f"k_max must be >= 2, got {k_max}")
    return build_generator_block(V4E_SECTORS, k_max, params)


def gap2_condition(params: ModelParams) -> bool:
    """rho > lambda/4 + 2 lambda sqrt(rho/mu) and mu/rho > 256."""
    if params.mu == 0:
        return False
    root = math.sqrt(params.rho / params.mu)
    return params.rho > params.lam / 4 + 2 * params.lam * root and params.mean_n > 256


def gap2_bounds(params: ModelParams) -> tuple:
    """[-rho - lambda/4, -rho - lambda/4 + 2 lambda sqrt(rho/mu)]."""
    lower = -params.rho - params.lam / 4
    root = math.sqrt(params.rho / params.mu) if params.mu else math.inf
    return lower, lower + 2 * params.lam * root


def gershgorin_lower_bounds(n: int, params: ModelParams) -> tuple:
    """Lower bounds on delta_{2n+1} and delta_{2n}.

    Returns:
        tuple: (min{rho + lambda - lambda r, 2 rho - lambda r},
                min{rho + (1 - 2 tau_n) lambda - 2 lambda r, 2 rho - 2 lambda r})
            with r = sqrt(rho/mu)
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rho, lam = params.rho, params.lam
    root = math.sqrt(rho / params.mu) if params.mu else 0.0
    odd = min(rho + lam - lam * root, 2 * rho - lam * root)
    even = min(rho + (1 - 2 * tau(n)) * lam - 2 * lam * root, 2 * rho - 2 * lam * root)
    return odd, even


def gershgorin_level_bound(m: int, params: ModelParams) -> float:
    """Gershgorin lower bound on delta_m for m = 1 or m >= 3."""
    if m == 1 or m % 2:
        return gershgorin_lower_bounds(max(1, (m - 1) // 2), params)[0]
    if m < 4:
        raise ValueError("delta_2 is exactly 2 rho; no bound needed")
    return gershgorin_lower_bounds(m // 2, params)[1]


def second_gap_estimate(params: ModelParams, k_max: int) -> float:
    """Largest V4e eigenvalue strictly below -rho."""
    values = build_collision_block_V4e(k_max, params).eigenvalues()
    threshold = -params.rho - 1e-9 * params.rho
    below = values[values < threshold]
    return float(below[0])


@dataclass
class SpectralReport:
    delta: float
    delta2: float
    lower: float
    upper: float
    k_max: int
    drift: float
    condition_satisfied: bool
    gershgorin: dict

    @property
    def converged(self) -> bool:
        return self.drift < DRIFT_TOLERANCE

    @property
    def within_bounds(self) -> bool:
        return self.lower - 1e-12 <= self.delta2 <= self.upper

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "delta2": self.delta2,
            "bounds": {"lower": self.lower, "upper": self.upper},
            "gershgorin": {str(m): bound for m, bound in self.gershgorin.items()},
            "truncation": {"k_max": self.k_max, "drift": self.drift},
            "condition_satisfied": self.condition_satisfied,
        }


def spectral_gaps(
    params: ModelParams,
    k_max: int = DEFAULT_K_MAX,
    drift_window: int = DRIFT_WINDOW,
    levels: Optional[Sequence[int]] = None,
) -> SpectralReport:
    """Gap Delta = -rho and second gap Delta_2 from the V4e block.

    Args:
        params: Model rates
        k_max: Charlier truncation of the V4e block
        drift_window: Compare with k_max - drift_window for the drift
        levels: Levels m for the Gershgorin bounds on delta_m

    Returns:
        SpectralReport
    """
    satisfied = gap2_condition(params)
    if not satisfied:
        logger.warning(
            f"[Spectral] mu={params.mu}, rho={params.rho}, lambda={params.lam} violate "
            "rho > lambda/4 + 2 lambda sqrt(rho/mu), mu/rho > 256; bounds not guaranteed"
        )
    delta2 = second_gap_estimate(params, k_max)
    coarse_k = max(2, k_max - drift_window)
    drift = abs(delta2 - second_gap_estimate(params, coarse_k)) if coarse_k < k_max else 0.0
    lower, upper = gap2_bounds(params)
    bounds = {m: gershgorin_level_bound(m, params) for m in (levels or GERSHGORIN_LEVELS)}
    logger.info(
        f"[Spectral] Delta=-{params.rho:g}, Delta2={delta2:.10f} "
        f"(k_max={k_max}, drift={drift:.2e}), bounds=[{lower:.5f}, {upper:.5f}]"
    )
    return SpectralReport(
        delta=-params.rho,
        delta2=delta2,
        lower=lower,
        upper=upper,
        k_max=k_max,
        drift=drift,
        condition_satisfied=satisfied,
        gershgorin=bounds,
    )
