"""
Error Types Module

Exceptions raised across the toolkit. Argument-level precondition failures
still raise the builtin ValueError/IndexError; the classes here mark
configuration problems and numerical contract violations so that the
command line can map them to distinct exit codes.

Hierarchy:
    KacError
    ├── ConfigError (also a ValueError)
    └── NumericalContractError (also a RuntimeError)
        ├── TruncationError
        ├── ParticleCapExceeded
        ├── AbsorbedStateError
        ├── InstabilityError
        └── QuadratureError
"""

from typing import Iterable, Optional


class KacError(Exception):
    """Base class for toolkit errors."""


class ConfigError(KacError, ValueError):
    """Invalid experiment configuration.

    Carries every field-level diagnostic collected during validation so the
    caller can report them all at once.
    """

    def __init__(self, errors: Iterable[str], source: Optional[str] = None):
        self.errors = list(errors)
        self.source = source
        where = f" in {source}" if source else ""
        joined = "; ".join(self.errors) if self.errors else "unknown error"
        super().__init__(f"Invalid configuration{where}: {joined}")


class NumericalContractError(KacError, RuntimeError):
    """A numerical routine could not honour its contract."""


class TruncationError(NumericalContractError):
    """Probability mass leaked past a truncation boundary."""

    def __init__(self, deficit: float, tolerance: float, n_max: int):
        self.deficit = deficit
        self.tolerance = tolerance
        self.n_max = n_max
        super().__init__(
            f"Tail deficit {deficit:.3e} exceeds tolerance {tolerance:.1e} "
            f"at N_max={n_max}; widen the truncation"
        )


class ParticleCapExceeded(NumericalContractError):
    """A trajectory grew beyond the configured particle cap."""

    def __init__(self, n: int, cap: int, time: float):
        self.n = n
        self.cap = cap
        self.time = time
        super().__init__(
            f"Particle number {n} exceeded cap {cap} at t={time:.6g}; "
            "outflow should dominate inflow for valid parameters"
        )


class AbsorbedStateError(NumericalContractError):
    """Total jump rate vanished: the chain sits in an absorbing state."""


class InstabilityError(NumericalContractError):
    """A time stepper produced negativity beyond tolerance."""


class QuadratureError(NumericalContractError):
    """Quadrature rule too coarse for the requested polynomial degree."""
