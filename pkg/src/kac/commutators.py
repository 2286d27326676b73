"""
Commutator Checks

Numerical confirmation of the canonical commutation relations of the
creation/annihilation operators on a truncated Fock space.

Representation:
    A basis vector is a sector (N, multiset of modes) standing for the
    symmetric orbit sum m_lambda(v_1..v_N) of prod L_{lambda_i}(v_i).
    On these vectors
        P+(L_i) m_mu = (mult_mu(i) + 1) m_{mu + i}
        P-(L_i) m_lambda = m_{lambda - i} if i in lambda, else 0
    and R+ = sqrt(rho/mu) P+ - sqrt(mu/rho) (g, 1),
        R- = sqrt(mu/rho) P- - sqrt(mu/rho) (g, 1).
    P+ raises N by one, so the space is cut at N <= n_cut and identities
    are compared on source sectors with N <= n_cut - 2, where no product
    leaves the truncated space.

Dependencies:
    - scipy.sparse: operator matrices (dimension 1287 at modes 0..4, N <= 8)
"""

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from src.kac.model import ModelParams, log_number_weight
from src.utils.logger import logger

COMMUTATOR_TOLERANCE = 1e-10


@dataclass
class SectorBasis:
    """Sectors (N, sorted mode tuple) for N <= n_cut over modes 0..mode_max."""

    mode_max: int
    n_cut: int
    sectors: list = field(init=False)
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode_max < 0 or self.n_cut < 2:
            raise ValueError("need mode_max >= 0 and n_cut >= 2")
        self.sectors = [
            combo
            for n in range(self.n_cut + 1)
            for combo in itertools.combinations_with_replacement(range(self.mode_max + 1), n)
        ]
        self.index = {sector: i for i, sector in enumerate(self.sectors)}

    @property
    def dim(self) -> int:
        return len(self.sectors)

    def sizes(self) -> np.ndarray:
        return np.array([len(s) for s in self.sectors])

    def vacuum(self) -> np.ndarray:
        """e0 = 1 in every sector: the all-zero-mode orbit sums."""
        vector = np.zeros(self.dim)
        for n in range(self.n_cut + 1):
            vector[self.index[(0,) * n]] = 1.0
        return vector


def creation(mode: int, basis: SectorBasis) -> sparse.csr_matrix:
    """P+(L_mode) with the top sector dropped."""
    rows, cols, data = [], [], []
    for col, sector in enumerate(basis.sectors):
        if len(sector) == basis.n_cut:
            continue
        target = tuple(sorted(sector + (mode,)))
        rows.append(basis.index[target])
        cols.append(col)
        data.append(sector.count(mode) + 1.0)
    return sparse.csr_matrix((data, (rows, cols)), shape=(basis.dim, basis.dim))


def annihilation(mode: int, basis: SectorBasis) -> sparse.csr_matrix:
    """P-(L_mode)."""
    rows, cols, data = [], [], []
    for col, sector in enumerate(basis.sectors):
        if mode not in sector:
            continue
        remaining = list(sector)
        remaining.remove(mode)
        rows.append(basis.index[tuple(remaining)])
        cols.append(col)
        data.append(1.0)
    return sparse.csr_matrix((data, (rows, cols)), shape=(basis.dim, basis.dim))


def number_operator(basis: SectorBasis) -> sparse.csr_matrix:
    return sparse.diags(basis.sizes().astype(float), format="csr")


def gram_diagonal(basis: SectorBasis, params: ModelParams) -> np.ndarray:
    """<m_lambda, m_lambda> in the Gamma-weighted space, a_N N! / prod mult!, divided by a_0."""
    weights = []
    for sector in basis.sectors:
        n = len(sector)
        orbit = math.factorial(n) / math.prod(math.factorial(c) for c in Counter(sector).values())
        weights.append(math.exp(log_number_weight(n, params) - log_number_weight(0, params)) * orbit)
    return np.asarray(weights)


@dataclass
class CommutatorReport:
    dim: int
    n_cut: int
    modes: list
    residuals: dict
    tolerance: float = COMMUTATOR_TOLERANCE

    @property
    def passed(self) -> bool:
        return all(value <= self.tolerance for value in self.residuals.values())

    @property
    def worst(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "n_cut": self.n_cut,
            "modes": self.modes,
            "residuals": self.residuals,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def _max_abs(matrix, columns: np.ndarray, rows: np.ndarray = None) -> float:
    block = matrix.tocsc()[:, columns]
    if rows is not None:
        block = block.tocsr()[rows, :]
    return float(abs(block).max()) if block.nnz else 0.0


def verify_commutators(
    modes: Sequence[int],
    params: ModelParams,
    n_cut: int,
    tolerance: float = COMMUTATOR_TOLERANCE,
) -> CommutatorReport:
    """Check the canonical relations for every pair of basis functions L_i, L_j.

    Identities:
        [P+(L_i), P-(L_j)] = -delta_ij, [R+(L_i), R-(L_j)] = -delta_ij,
        [N, P+] = P+, [N, P-] = -P-, R-(L_i) e0 = 0, plus
        [P+, P+] = [P-, P-] = 0 and rho P+^T W = mu W P- for the diagonal
        Gram matrix W (P+ and P- adjoint up to mu/rho).

    Args:
        modes: Modes i of the functions L_i; the basis uses modes 0..max(modes)
        params: Model rates (R+/R- and W depend on mu/rho)
        n_cut: Largest particle number kept

    Returns:
        CommutatorReport: Largest residual per identity
    """
    if not modes or min(modes) < 0:
        raise ValueError("modes must be a non-empty list of indices >= 0")
    if params.mu <= 0:
        raise ValueError("commutator checks need mu > 0")
    modes = sorted(set(int(m) for m in modes))
    basis = SectorBasis(mode_max=max(modes), n_cut=n_cut)
    sizes = basis.sizes()
    inner = np.flatnonzero(sizes <= n_cut - 2)
    below_top = np.flatnonzero(sizes <= n_cut - 1)
    identity = sparse.identity(basis.dim, format="csr")
    number = number_operator(basis)
    up = math.sqrt(params.rho / params.mu)
    down = math.sqrt(params.mu / params.rho)

    plus = {i: creation(i, basis) for i in modes}
    minus = {i: annihilation(i, basis) for i in modes}

    def r_plus(i):
        return up * plus[i] - down * (i == 0) * identity

    def r_minus(i):
        return down * minus[i] - down * (i == 0) * identity

    residuals = dict.fromkeys(
        ["P+P-", "R+R-", "P+P+", "P-P-", "N,P+", "N,P-", "N,R+", "N,R-", "R-e0"], 0.0
    )
    for i in modes:
        for j in modes:
            delta = float(i == j) * identity
            checks = {
                "P+P-": plus[i] @ minus[j] - minus[j] @ plus[i] + delta,
                "R+R-": r_plus(i) @ r_minus(j) - r_minus(j) @ r_plus(i) + delta,
                "P+P+": plus[i] @ plus[j] - plus[j] @ plus[i],
                "P-P-": minus[i] @ minus[j] - minus[j] @ minus[i],
            }
            for name, residual in checks.items():
                residuals[name] = max(residuals[name], _max_abs(residual, inner))
        shift = down * (i == 0) * identity
        checks = {
            "N,P+": number @ plus[i] - plus[i] @ number - plus[i],
            "N,P-": number @ minus[i] - minus[i] @ number + minus[i],
            "N,R+": number @ r_plus(i) - r_plus(i) @ number - (r_plus(i) + shift),
            "N,R-": number @ r_minus(i) - r_minus(i) @ number + (r_minus(i) + shift),
        }
        for name, residual in checks.items():
            residuals[name] = max(residuals[name], _max_abs(residual, inner))
        annihilated = r_minus(i) @ basis.vacuum()
        residuals["R-e0"] = max(residuals["R-e0"], float(np.max(np.abs(annihilated[below_top]))))

    gram = sparse.diags(gram_diagonal(basis, params), format="csr")
    adjoint = 0.0
    for i in modes:
        lhs = params.rho * (plus[i].T @ gram)
        rhs = params.mu * (gram @ minus[i])
        scale = max(_max_abs(rhs, inner), 1e-300)
        adjoint = max(adjoint, _max_abs(lhs - rhs, inner, inner) / scale)
    residuals["adjoint"] = adjoint

    report = CommutatorReport(dim=basis.dim, n_cut=n_cut, modes=modes, residuals=residuals, tolerance=tolerance)
    logger.info(
        f"[Commutators] dim={basis.dim}, n_cut={n_cut}, worst residual {report.worst:.2e} "
        f"({'pass' if report.passed else 'FAIL'})"
    )
    return report
