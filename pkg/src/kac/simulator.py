"""
Jump Simulator Module

Exact-event (Gillespie) simulation of the grand-canonical Kac master
equation, seen as a pure jump process on configurations of any size.

Events:
    - IN: a particle with a Maxwellian velocity enters, rate mu
    - OUT: a uniformly chosen particle leaves, total rate rho*N
    - COLLISION: a uniformly chosen unordered pair is rotated by a uniform
      angle, total rate lambda_tilde*N(N-1)/2

Recording:
    The process is right-continuous and piecewise constant; each checkpoint
    reports the state in force at that time, i.e. the pre-jump state of the
    first event that lands past it. Every checkpoint records N, the kinetic
    sum sum(v_i^2), obs_l2 = sum(2 pi v_i^2 - 1) and any requested Hermite
    observables obs_L<n> = sum(L_n(v_i)).

Reproducibility:
    Replica r draws from default_rng(SeedSequence(seed, spawn_key=(r,))),
    so results do not depend on the worker count. Replicas are split into
    contiguous blocks, run on a ProcessPoolExecutor when threads > 1, and
    merged in replica order.

Dependencies:
    - numpy: random streams and record arrays
    - scipy.stats: decay-rate regression and KS test
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from src.kac.distributions import InitialCondition
from src.kac.model import (
    BETA,
    ModelParams,
    ParticleState,
    kac_collide,
    maxwellian_cdf,
    sample_maxwellian,
)
from src.kac.number_chain import NumberDistribution
from src.kac.spectral import hermite_L
from src.utils.errors import (
    AbsorbedStateError,
    NumericalContractError,
    ParticleCapExceeded,
)
from src.utils.logger import logger

BASE_OBSERVABLES = ("N", "sum_v2", "obs_l2")
UNIFORM_BLOCK = 4096


class EventKind(Enum):
    IN = "in"
    OUT = "out"
    COLLISION = "collision"


@dataclass(frozen=True)
class Event:
    """One jump. OUT carries index; COLLISION carries i, j and theta."""

    kind: EventKind
    index: Optional[int] = None
    i: Optional[int] = None
    j: Optional[int] = None
    theta: Optional[float] = None


class BufferedStream:
    """Block-buffered view of a numpy Generator for the scalar event loop.

    Exposes the same random()/standard_normal() calls as the Generator, so
    next_event and apply_event accept either.
    """

    def __init__(self, rng: np.random.Generator, block: int = UNIFORM_BLOCK):
        self._rng = rng
        self._block = block
        self._uniform: list = []
        self._u_pos = 0
        self._normal: list = []
        self._n_pos = 0

    def random(self) -> float:
        if self._u_pos >= len(self._uniform):
            self._uniform = self._rng.random(self._block).tolist()
            self._u_pos = 0
        value = self._uniform[self._u_pos]
        self._u_pos += 1
        return value

    def standard_normal(self, size=None):
        if size is not None:
            return self._rng.standard_normal(size)
        if self._n_pos >= len(self._normal):
            self._normal = self._rng.standard_normal(self._block).tolist()
            self._n_pos = 0
        value = self._normal[self._n_pos]
        self._n_pos += 1
        return value


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    """Independent stream for replica `replica` under master seed `seed`."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replica,)))


def default_particle_cap(params: ModelParams) -> int:
    return int(math.ceil(10 * params.mean_n + 100))


def total_rate(state: ParticleState, params: ModelParams) -> float:
    """mu + rho*N + lambda_tilde*N(N-1)/2."""
    n = state.n
    return params.mu + params.rho * n + params.lambda_tilde * n * (n - 1) / 2


def next_event(state: ParticleState, params: ModelParams, rng) -> tuple:
    """Draw the waiting time and the next jump.

    Args:
        state: Current configuration
        params: Model rates
        rng: numpy Generator or BufferedStream

    Returns:
        tuple: (dt, Event)

    Raises:
        AbsorbedStateError: If the total rate is zero (N=0 and mu=0)
    """
    n = state.n
    rate_in = params.mu
    rate_out = params.rho * n
    rate_pairs = params.lambda_tilde * n * (n - 1) / 2
    total = rate_in + rate_out + rate_pairs
    if total <= 0:
        raise AbsorbedStateError(
            f"Zero total rate at N={n}, mu={params.mu}: absorbed state"
        )

    dt = -math.log(1.0 - rng.random()) / total
    u = rng.random() * total
    if u < rate_in:
        return dt, Event(EventKind.IN)
    if u < rate_in + rate_out or n < 2:
        index = min(int(rng.random() * n), n - 1)
        return dt, Event(EventKind.OUT, index=index)

    # i uniform on N, j uniform on the other N-1: uniform unordered pair
    i = min(int(rng.random() * n), n - 1)
    j = min(int(rng.random() * (n - 1)), n - 2)
    if j >= i:
        j += 1
    theta = 2.0 * math.pi * rng.random()
    return dt, Event(EventKind.COLLISION, i=i, j=j, theta=theta)


def apply_event(state: ParticleState, event: Event, rng) -> ParticleState:
    """Apply a jump in place and return the state.

    Time is left unchanged; the caller advances it.

    Raises:
        IndexError: If an event index does not fit the state
    """
    velocities = state.velocities
    n = len(velocities)
    if event.kind is EventKind.IN:
        velocities.append(sample_maxwellian(rng))
    elif event.kind is EventKind.OUT:
        if event.index is None or not 0 <= event.index < n:
            raise IndexError(f"OUT index {event.index} invalid for N={n}")
        velocities[event.index] = velocities[-1]
        velocities.pop()
    else:
        i, j = event.i, event.j
        if i is None or j is None or i == j or not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"COLLISION pair ({i}, {j}) invalid for N={n}")
        v, w = kac_collide(velocities[i], velocities[j], event.theta)
        velocities[i] = float(v)
        velocities[j] = float(w)
    return state


def _check_event(before_n: int, before_energy: float, state: ParticleState, event: Event):
    after_energy = state.kinetic_sum()
    expected = {
        EventKind.IN: before_n + 1,
        EventKind.OUT: before_n - 1,
        EventKind.COLLISION: before_n,
    }[event.kind]
    if state.n != expected:
        raise NumericalContractError(
            f"{event.kind.value} event changed N from {before_n} to {state.n}"
        )
    if event.kind is EventKind.COLLISION and not math.isclose(
        after_energy, before_energy, rel_tol=1e-12, abs_tol=1e-12
    ):
        raise NumericalContractError(
            f"Collision changed the kinetic sum {before_energy} -> {after_energy}"
        )


def observable_names(modes: Iterable[int] = ()) -> list:
    return list(BASE_OBSERVABLES) + [f"obs_L{n}" for n in modes]


def measure(state: ParticleState, modes: Sequence[int] = ()) -> list:
    """Observables of one configuration, in observable_names order."""
    v = state.as_array()
    n = v.size
    sum_v2 = float(np.dot(v, v))
    row = [float(n), sum_v2, BETA * sum_v2 - n]
    for mode in modes:
        row.append(float(np.sum(hermite_L(mode, v))) if n else 0.0)
    return row


def run_trajectory(
    state: ParticleState,
    params: ModelParams,
    checkpoints: Sequence[float],
    rng: np.random.Generator,
    modes: Sequence[int] = (),
    keep_states: bool = False,
    n_cap: Optional[int] = None,
    check_invariants: bool = False,
) -> tuple:
    """Run one trajectory and record it at the checkpoints.

    Args:
        state: Initial configuration (mutated)
        params: Model rates
        checkpoints: Increasing times >= state.time
        rng: Random stream of this trajectory
        modes: Hermite modes n for the obs_L<n> observables
        keep_states: Also return velocity snapshots
        n_cap: Abort when N exceeds this (default 10*mu/rho + 100)
        check_invariants: Verify the per-event conservation laws

    Returns:
        tuple: (records of shape (T, n_observables), snapshots or None)

    Raises:
        ParticleCapExceeded: If N grows past n_cap
    """
    times = np.asarray(checkpoints, dtype=float)
    cap = n_cap if n_cap is not None else default_particle_cap(params)
    records = np.empty((times.size, len(BASE_OBSERVABLES) + len(modes)))
    snapshots = [] if keep_states else None
    stream = BufferedStream(rng)

    def record(k: int):
        records[k] = measure(state, modes)
        if snapshots is not None:
            snapshots.append(state.as_array())

    t = state.time
    k = 0
    while k < times.size:
        if total_rate(state, params) <= 0:
            # absorbed: nothing moves any more
            while k < times.size:
                record(k)
                k += 1
            break
        dt, event = next_event(state, params, stream)
        t_next = t + dt
        while k < times.size and times[k] < t_next:
            record(k)
            k += 1
        if k == times.size:
            break
        if check_invariants:
            before = (state.n, state.kinetic_sum())
            apply_event(state, event, stream)
            _check_event(before[0], before[1], state, event)
        else:
            apply_event(state, event, stream)
        t = t_next
        state.time = t
        if state.n > cap:
            raise ParticleCapExceeded(state.n, cap, t)
    return records, snapshots


@dataclass
class ObservableSeries:
    """Per-checkpoint, per-replica observable records.

    Attributes:
        times: Checkpoint times, shape (T,)
        values: Observable name -> array of shape (R, T)
        seed: Master seed of the ensemble
        states: Optional snapshots, states[k][r] = velocities of replica r
            at checkpoint k
    """

    times: np.ndarray
    values: dict
    seed: int
    states: Optional[list] = None
    params: Optional[ModelParams] = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("Checkpoint times must be strictly increasing")
        for name, array in self.values.items():
            if array.shape != (self.replicas, self.times.size):
                raise ValueError(f"Observable {name} has shape {array.shape}")

    @property
    def replicas(self) -> int:
        return next(iter(self.values.values())).shape[0]

    @property
    def names(self) -> list:
        return list(self.values)

    def checkpoint_index(self, t: float) -> int:
        matches = np.flatnonzero(np.isclose(self.times, t, rtol=0, atol=1e-12))
        if matches.size == 0:
            raise ValueError(f"t={t} is not a checkpoint")
        return int(matches[0])

    def column(self, name: str, t: float) -> np.ndarray:
        return self.values[name][:, self.checkpoint_index(t)]

    def mean(self, name: str) -> np.ndarray:
        return self.values[name].mean(axis=0)

    def standard_error(self, name: str) -> np.ndarray:
        """Across-replica standard error at each checkpoint."""
        if self.replicas < 2:
            return np.full(self.times.size, np.nan)
        return self.values[name].std(axis=0, ddof=1) / math.sqrt(self.replicas)

    def snapshot(self, t: float) -> list:
        if self.states is None:
            raise ValueError("Series was recorded without state snapshots")
        return self.states[self.checkpoint_index(t)]

    def rows(self):
        """Yield (t, replica, N, sum_v2, obs_*...) in checkpoint-major order."""
        names = self.names
        for k, t in enumerate(self.times):
            for r in range(self.replicas):
                row = [float(t), r, int(self.values["N"][r, k])]
                row.extend(float(self.values[name][r, k]) for name in names[1:])
                yield row

    def header(self) -> list:
        return ["t", "replica"] + self.names

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "replicas": self.replicas,
            "times": self.times.tolist(),
            "observables": {
                name: {
                    "mean": self.mean(name).tolist(),
                    "se": self.standard_error(name).tolist(),
                }
                for name in self.names
            },
        }


def _simulate_block(
    initial: InitialCondition,
    params: ModelParams,
    times: np.ndarray,
    replica_ids: np.ndarray,
    seed: int,
    modes: tuple,
    keep_states: bool,
    n_cap: Optional[int],
) -> tuple:
    records = np.empty((len(replica_ids), times.size, len(BASE_OBSERVABLES) + len(modes)))
    snapshots = []
    for row, replica in enumerate(replica_ids):
        rng = replica_rng(seed, int(replica))
        state = initial.sample(rng)
        state.time = 0.0
        records[row], states = run_trajectory(
            state, params, times, rng, modes, keep_states, n_cap
        )
        snapshots.append(states)
    return records, snapshots


def simulate_replicas(
    initial: InitialCondition,
    params: ModelParams,
    checkpoints: Sequence[float],
    replicas: int,
    seed: int,
    threads: int = 1,
    modes: Sequence[int] = (),
    keep_states: bool = False,
    n_cap: Optional[int] = None,
) -> ObservableSeries:
    """Simulate R independent trajectories and record them at checkpoints.

    Args:
        initial: Initial-condition sampler
        params: Model rates
        checkpoints: Strictly increasing times >= 0
        replicas: Number of trajectories R
        seed: Master seed
        threads: Worker processes (1 runs inline)
        modes: Hermite modes for extra obs_L<n> observables
        keep_states: Keep velocity snapshots at every checkpoint
        n_cap: Particle cap per trajectory

    Returns:
        ObservableSeries: Deterministic in (seed, params, initial)
    """
    times = np.asarray(checkpoints, dtype=float)
    if times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("Checkpoints must be non-negative and strictly increasing")
    if replicas < 1:
        raise ValueError(f"replicas must be >= 1, got {replicas}")
    modes = tuple(int(m) for m in modes)
    workers = max(1, min(int(threads), replicas))
    blocks = [b for b in np.array_split(np.arange(replicas), workers) if b.size]

    logger.info(
        f"[Simulator] {replicas} replicas, {times.size} checkpoints up to "
        f"t={times[-1]:.4g}, mu={params.mu}, rho={params.rho}, lambda={params.lam}, "
        f"seed={seed}, workers={workers}"
    )
    args = [(initial, params, times, block, seed, modes, keep_states, n_cap) for block in blocks]
    if workers == 1:
        results = [_simulate_block(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulate_block, *zip(*args)))

    records = np.concatenate([r[0] for r in results], axis=0)
    names = observable_names(modes)
    values = {name: np.ascontiguousarray(records[:, :, c]) for c, name in enumerate(names)}
    states = None
    if keep_states:
        per_replica = [s for r in results for s in r[1]]
        states = [[per_replica[r][k] for r in range(replicas)] for k in range(times.size)]
    logger.info(f"[Simulator] Finished {replicas} replicas (seed={seed})")
    return ObservableSeries(times=times, values=values, seed=seed, states=states, params=params)


def empirical_number_law(series: ObservableSeries, t: float) -> NumberDistribution:
    """Normalised histogram of N over replicas at checkpoint t."""
    counts = np.bincount(series.column("N", t).astype(int))
    return NumberDistribution(counts / counts.sum())


@dataclass(frozen=True)
class DecayFit:
    rate: float
    stderr: float
    points: int


def fit_decay_rate(times: Sequence[float], values: Sequence[float]) -> DecayFit:
    """Least-squares fit of values ~ C exp(-rate t) on the positive entries."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > 0
    if keep.sum() < 2:
        raise ValueError("Need at least two positive values to fit a decay rate")
    fit = stats.linregress(times[keep], np.log(values[keep]))
    return DecayFit(rate=-float(fit.slope), stderr=float(fit.stderr), points=int(keep.sum()))


def eigen_observable_rates(series: ObservableSeries, params: ModelParams, min_snr: float = 3.0) -> dict:
    """Fitted decay rates of the two rate-rho eigen-observables.

    The observables are sqrt(rho/mu) N - sqrt(mu/rho) and sum(2 pi v_i^2 - 1).
    Checkpoints whose mean is within min_snr standard errors of zero are
    left out of the fit.

    Raises:
        ValueError: If mu = 0 (the number eigen-observable is undefined)
    """
    if params.mu <= 0:
        raise ValueError(f"eigen-observable rates need mu > 0, got mu={params.mu}")
    scale = math.sqrt(params.rho / params.mu)
    number_mode = scale * series.values["N"] - 1.0 / scale
    fits = {}
    for name, samples in (("number", number_mode), ("energy", series.values["obs_l2"])):
        mean = samples.mean(axis=0)
        se = samples.std(axis=0, ddof=1) / math.sqrt(samples.shape[0])
        usable = np.abs(mean) > min_snr * se
        sign = np.sign(mean[usable][0]) if usable.any() else 1.0
        fits[name] = fit_decay_rate(series.times[usable], sign * mean[usable])
    return fits


def velocity_ks_test(series: ObservableSeries, t: float):
    """Kolmogorov-Smirnov test of the pooled velocities at t against gamma."""
    pooled = np.concatenate([v for v in series.snapshot(t) if v.size] or [np.empty(0)])
    if pooled.size == 0:
        raise ValueError(f"No particles recorded at t={t}")
    return stats.kstest(pooled, maxwellian_cdf)
