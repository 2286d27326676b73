"""Symmetric uniform velocity grid shared by product states and the BK solver."""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_V_MAX = 4.0  # gamma mass outside [-4, 4] is below 1e-21
DEFAULT_DV = 0.02


@dataclass(frozen=True)
class VelocityGrid:
    """Grid v_j = -v_max + j*dv, j = 0..2*v_max/dv, symmetric about 0."""

    v_max: float = DEFAULT_V_MAX
    dv: float = DEFAULT_DV

    def __post_init__(self):
        if self.v_max <= 0 or self.dv <= 0:
            raise ValueError("v_max and dv must be positive")
        cells = self.v_max / self.dv
        if abs(cells - round(cells)) > 1e-9:
            raise ValueError(f"v_max={self.v_max} is not a multiple of dv={self.dv}")

    @property
    def size(self) -> int:
        return 2 * int(round(self.v_max / self.dv)) + 1

    @cached_property
    def points(self) -> np.ndarray:
        half = int(round(self.v_max / self.dv))
        return np.arange(-half, half + 1) * self.dv

    @cached_property
    def edges(self) -> np.ndarray:
        """Cell edges centred on the grid points."""
        return np.concatenate(
            ([self.points[0] - self.dv / 2], self.points + self.dv / 2)
        )

    def integrate(self, values: np.ndarray) -> float:
        """Rectangle rule dv * sum(values) (boundary values are negligible)."""
        return float(self.dv * math.fsum(np.asarray(values, dtype=float)))

    def index_of(self, v: np.ndarray) -> np.ndarray:
        """Fractional grid index of velocity v."""
        return (np.asarray(v, dtype=float) + self.v_max) / self.dv

    def coarsen(self, factor: int) -> "VelocityGrid":
        return VelocityGrid(self.v_max, self.dv * factor)
