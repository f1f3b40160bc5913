"""
Experiments: CPS fidelity sweeps over ion errors, single-pulse robustness,
the cat-state parity experiment on a star register, and the Monte Carlo
instance yield of a randomly doped crystal.

Every seeded quantity draws from ``numpy.random.default_rng([seed, index])``
per work item, so results do not depend on how items are scheduled.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np
from scipy.spatial import cKDTree

from app_logger import experiment_logger as logger, log_performance, log_stage
from config import DEFAULT_COUPLING, DEFAULT_SEED, IDEAL_COUPLING
from fidelity import subspace_worst_fidelity
from gates import (
    CpsVariant, GateSpec, compose, cps, cnot, evolve_state, gate_propagator,
    hadamard, qubit_rotation, z_rotation,
)
from hilbert import SimulationError, global_phase_distance
from ionmodel import (
    ChannelId, Instance, Ion, IonParams, Level, ideal_cps_target,
    level_diagonal, qubit_projector, qubit_state, reference_pair, star_instance,
)
from pulses import ExpansionPolicy, bb1_expand, pulse, pulse_propagator, sequence_propagator

T = TypeVar('T')
R = TypeVar('R')

BUS = 'bus'
# Readout pi/2 pulses rotate about -y (axis angle 3 pi/2). With that sense the
# gathered parity reads cos(n phi); about +y it reads (-1)^n cos(n phi).
READOUT_AXIS = 1.5 * np.pi


# =============================================================================
# CUSTOM EXCEPTIONS
# =============================================================================

class ExperimentError(SimulationError):
    """Invalid experiment parameters."""
    pass


# =============================================================================
# PARALLEL MAP
# =============================================================================

def map_ordered(func: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> list[R]:
    """``[func(x) for x in items]``, optionally on a thread pool; result order is input order."""
    items = list(items)
    if jobs < 1:
        raise ExperimentError(f"jobs must be at least 1, got {jobs}")
    if jobs == 1 or len(items) < 2:
        return [func(x) for x in items]

    results: list[R | None] = [None] * len(items)
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        future_to_index = {executor.submit(func, x): i for i, x in enumerate(items)}
        for future in as_completed(future_to_index):
            results[future_to_index[future]] = future.result()
    return results  # type: ignore[return-value]


def frange(start: float, stop: float, step: float) -> tuple[float, ...]:
    """Inclusive arithmetic grid, rounded to 12 decimals so endpoints are exact."""
    if step <= 0 or stop < start:
        raise ExperimentError(f"bad range {start}:{stop}:{step}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(float(x) for x in np.round(start + step * np.arange(count), 12))


def _finite_values(name: str, values: Iterable[float]) -> tuple[float, ...]:
    values = tuple(float(v) for v in values)
    if not values:
        raise ExperimentError(f"{name} must not be empty")
    if not all(np.isfinite(values)):
        raise ExperimentError(f"{name} must be finite")
    return values


# =============================================================================
# FIDELITY SWEEPS
# =============================================================================

class Variant(enum.Enum):
    SIMPLE = 'simple'
    SYMMETRIZED = 'symmetrized'
    SYMMETRIZED_BB1 = 'symmetrized_bb1'

    @property
    def cps_variant(self) -> CpsVariant:
        return CpsVariant.SIMPLE if self is Variant.SIMPLE else CpsVariant.SYMMETRIZED

    @property
    def policy(self) -> ExpansionPolicy:
        return ExpansionPolicy.BB1 if self is Variant.SYMMETRIZED_BB1 else ExpansionPolicy.PLAIN


DEFAULT_DELTAS = frange(-0.05, 0.05, 0.0025)
DEFAULT_OMEGAS = frange(0.85, 1.15, 0.005)
SIMPLE_OMEGAS = frange(0.97, 1.03, 0.005)


@dataclass(frozen=True)
class SweepGrid:
    delta_values: tuple[float, ...] = DEFAULT_DELTAS
    omega_values: tuple[float, ...] = DEFAULT_OMEGAS
    coupling: float = DEFAULT_COUPLING
    variant: Variant = Variant.SYMMETRIZED_BB1

    def __post_init__(self) -> None:
        object.__setattr__(self, 'variant', Variant(self.variant))
        object.__setattr__(self, 'delta_values', _finite_values('delta_values', self.delta_values))
        object.__setattr__(self, 'omega_values', _finite_values('omega_values', self.omega_values))
        if any(w <= 0 for w in self.omega_values):
            raise ExperimentError("omega ratios must be positive")
        if not np.isfinite(self.coupling) or self.coupling < 0:
            raise ExperimentError(f"coupling must be finite and non-negative, got {self.coupling}")

    @classmethod
    def default(cls, variant: Variant | str = Variant.SYMMETRIZED_BB1, coupling: float = DEFAULT_COUPLING) -> SweepGrid:
        """Default axes; the simple gate gets the narrower omega window."""
        variant = Variant(variant)
        omegas = SIMPLE_OMEGAS if variant is Variant.SIMPLE else DEFAULT_OMEGAS
        return cls(DEFAULT_DELTAS, omegas, coupling, variant)

    def points(self) -> list[tuple[float, float]]:
        """Row-major: delta outer, omega inner."""
        return [(d, w) for d in self.delta_values for w in self.omega_values]


@dataclass(frozen=True)
class SweepRow:
    delta: float
    omega: float
    fidelity: float


def cps_fidelity(delta: float, omega: float, coupling: float, variant: Variant | str) -> float:
    """Worst-case qubit-subspace fidelity of one CPS variant on a two-ion instance."""
    variant = Variant(variant)
    instance = reference_pair('i', 'j', coupling, IonParams(delta, omega))
    u = gate_propagator(instance, cps('i', 'j', variant.cps_variant), variant.policy)
    target = ideal_cps_target(instance, 'i', 'j')
    return subspace_worst_fidelity(target, u, qubit_projector(instance)).value


@log_performance(logger, 'sweep_cps_fidelity')
def sweep_cps_fidelity(grid: SweepGrid, jobs: int = 1) -> list[SweepRow]:
    points = grid.points()
    logger.info("sweep grid", points=len(points), variant=grid.variant.value, coupling=grid.coupling)
    values = map_ordered(
        lambda pt: cps_fidelity(pt[0], pt[1], grid.coupling, grid.variant),
        points, jobs,
    )
    return [SweepRow(d, w, f) for (d, w), f in zip(points, values)]


@dataclass(frozen=True)
class RobustnessRow:
    delta: float
    omega: float
    distance_plain: float
    distance_bb1: float


@log_performance(logger, 'sweep_pulse_robustness')
def sweep_pulse_robustness(
    theta: float,
    delta_values: Sequence[float],
    omega_values: Sequence[float],
    jobs: int = 1,
) -> list[RobustnessRow]:
    """Single ion: a plain ``theta`` pulse and its BB1 replacement against the reference rotation."""
    deltas = _finite_values('delta_values', delta_values)
    omegas = _finite_values('omega_values', omega_values)
    p = pulse('q', '0e', 0.0, theta)
    replacement = bb1_expand(p)
    target = pulse_propagator(Instance.build([Ion('q')]), p)

    def one(pt: tuple[float, float]) -> RobustnessRow:
        instance = Instance.build([Ion('q', IonParams(pt[0], pt[1]))])
        return RobustnessRow(
            pt[0], pt[1],
            global_phase_distance(target, pulse_propagator(instance, p)),
            global_phase_distance(target, sequence_propagator(instance, replacement)),
        )

    return map_ordered(one, [(d, w) for d in deltas for w in omegas], jobs)


# =============================================================================
# CAT STATE AND PARITY
# =============================================================================

@dataclass(frozen=True)
class EnsembleSpec:
    """Per-instance error distributions: uniform detuning and Rabi ratio, log-uniform coupling."""
    delta_halfwidth: float = 0.0
    omega_relative_halfwidth: float = 0.0
    coupling_range: tuple[float, float] = (IDEAL_COUPLING, IDEAL_COUPLING)
    n_instances: int = 1
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        g_min, g_max = self.coupling_range
        if self.delta_halfwidth < 0 or self.omega_relative_halfwidth < 0:
            raise ExperimentError("ensemble half-widths must be non-negative")
        if self.omega_relative_halfwidth >= 1:
            raise ExperimentError("omega relative half-width must be below 1")
        if not 0 < g_min <= g_max or not np.isfinite(g_max):
            raise ExperimentError(f"coupling range must satisfy 0 < g_min <= g_max, got {self.coupling_range}")
        if self.n_instances < 1:
            raise ExperimentError(f"n_instances must be at least 1, got {self.n_instances}")


def outer_channels(n: int) -> tuple[ChannelId, ...]:
    if n < 2:
        raise ExperimentError(f"a star register needs n >= 2 qubits, got {n}")
    return tuple(f'q{k}' for k in range(1, n))


def sample_ensemble_instance(
    n: int,
    ensemble: EnsembleSpec,
    index: int,
    bus: ChannelId = BUS,
    outers: Sequence[ChannelId] | None = None,
) -> Instance:
    """Star instance number ``index`` of the ensemble (deterministic)."""
    outers = tuple(outers) if outers is not None else outer_channels(n)
    if len(outers) != n - 1:
        raise ExperimentError(f"{n} qubits need {n - 1} outer channels, got {len(outers)}")
    rng = np.random.default_rng([ensemble.seed, index])
    w, r = ensemble.delta_halfwidth, ensemble.omega_relative_halfwidth
    params = {
        c: IonParams(float(rng.uniform(-w, w)), float(rng.uniform(1 - r, 1 + r)))
        for c in (bus, *outers)
    }
    g_min, g_max = ensemble.coupling_range
    if g_min == g_max:
        couplings = [g_min] * len(outers)
    else:
        couplings = list(np.exp(rng.uniform(np.log(g_min), np.log(g_max), size=len(outers))))
    return star_instance(bus, outers, couplings, params)


def _on_bus_link(gate: GateSpec, outer: ChannelId, bus: ChannelId) -> GateSpec:
    return replace(gate, requires=((outer, bus),))


def cat_circuit(
    n: int,
    bus: ChannelId = BUS,
    outers: Sequence[ChannelId] | None = None,
    variant: CpsVariant | str = CpsVariant.SYMMETRIZED,
) -> list[GateSpec]:
    """Hadamard on the bus, then CNOT from the bus onto each outer qubit."""
    outers = tuple(outers) if outers is not None else outer_channels(n)
    circuit = [hadamard(bus)]
    circuit += [_on_bus_link(cnot(bus, o, heavy=bus, variant=variant), o, bus) for o in outers]
    return circuit


def parity_gather_circuit(
    n: int,
    bus: ChannelId = BUS,
    outers: Sequence[ChannelId] | None = None,
    variant: CpsVariant | str = CpsVariant.SYMMETRIZED,
) -> list[GateSpec]:
    """CNOT from each outer qubit onto the bus, in the given order."""
    outers = tuple(outers) if outers is not None else outer_channels(n)
    return [_on_bus_link(cnot(o, bus, heavy=bus, variant=variant), o, bus) for o in outers]


def run_circuit(instance: Instance, circuit: Iterable[GateSpec], state: np.ndarray) -> np.ndarray:
    for gate in circuit:
        state = evolve_state(instance, gate, state)
    return state


def sigma_z_expectations(instance: Instance, state: np.ndarray, channels: Sequence[ChannelId]) -> np.ndarray:
    probs = np.abs(state) ** 2
    return np.array([
        probs @ (level_diagonal(instance, c, Level.G0) - level_diagonal(instance, c, Level.G1))
        for c in channels
    ])


@dataclass(frozen=True)
class ParityRow:
    phi: float
    mean_excited: float
    parity: float
    sigma_z: tuple[float, ...] = field(default=())


def _cat_instance_run(
    instance: Instance,
    n: int,
    phis: Sequence[float],
    gather_order: Sequence[ChannelId],
    readout_axis: float = READOUT_AXIS,
) -> tuple[np.ndarray, np.ndarray]:
    """Bus |1> population after gathering, and per-qubit <sigma_z> before it, for every phi."""
    outers = outer_channels(n)
    qubits = (BUS, *outers)
    psi0 = run_circuit(instance, cat_circuit(n), qubit_state(instance, {}))
    gather = parity_gather_circuit(n, BUS, gather_order)
    readout = compose('readout', [qubit_rotation(c, readout_axis, np.pi / 2) for c in qubits])
    bus_one = level_diagonal(instance, BUS, Level.G1)

    populations = np.empty(len(phis))
    sigma_z = np.empty((len(phis), n))
    for k, phi in enumerate(phis):
        twist = compose('twist', [z_rotation(c, phi) for c in qubits])
        psi2 = run_circuit(instance, (twist, readout), psi0)
        sigma_z[k] = sigma_z_expectations(instance, psi2, qubits)
        psi3 = run_circuit(instance, gather, psi2)
        populations[k] = float(np.abs(psi3) ** 2 @ bus_one)
    return populations, sigma_z


@log_performance(logger, 'run_cat_experiment')
def run_cat_experiment(
    n: int,
    phis: Sequence[float],
    ensemble: EnsembleSpec = EnsembleSpec(),
    jobs: int = 1,
    gather_order: Sequence[ChannelId] | None = None,
    readout_axis: float = READOUT_AXIS,
) -> list[ParityRow]:
    """Ensemble-averaged parity ``1 - 2 <n_bus>`` versus collective z twist ``phi``.

    Prepare the cat state, twist every qubit by ``phi`` about z, rotate every
    qubit by pi/2 about the readout axis (default -y), gather the parity on
    the bus and read it out.
    """
    phis = _finite_values('phis', phis)
    outers = outer_channels(n)
    order = tuple(gather_order) if gather_order is not None else outers
    if sorted(order) != sorted(outers):
        raise ExperimentError(f"gather order {order} must be a permutation of {outers}")

    def one(index: int) -> tuple[np.ndarray, np.ndarray]:
        with log_stage(logger, 'cat_instance', index=index, n=n):
            instance = sample_ensemble_instance(n, ensemble, index)
            return _cat_instance_run(instance, n, phis, order, readout_axis)

    runs = map_ordered(one, range(ensemble.n_instances), jobs)
    populations = np.mean([r[0] for r in runs], axis=0)
    sigma_z = np.mean([r[1] for r in runs], axis=0)
    return [
        ParityRow(phi, float(p), float(1.0 - 2.0 * p), tuple(float(s) for s in sz))
        for phi, p, sz in zip(phis, populations, sigma_z)
    ]


def parity_visibility(rows: Sequence[ParityRow]) -> float:
    values = [r.parity for r in rows]
    return 0.5 * (max(values) - min(values))


# =============================================================================
# CRYSTAL YIELD
# =============================================================================

class Topology(enum.Enum):
    STAR = 'star'
    CLUSTER = 'cluster'


def required_couplings(n: int, topology: Topology | str) -> int:
    """Couplings one instance needs: n - 1 for a star, all pairs for a cluster."""
    if n < 1:
        raise ExperimentError(f"instance size must be positive, got {n}")
    return n - 1 if Topology(topology) is Topology.STAR else n * (n - 1) // 2


@dataclass(frozen=True)
class CrystalModel:
    """Randomly doped crystal: ions uniform in a periodic box, coupling ``C / r^3``.

    Channel 0 is the bus channel; an instance of ``qubits`` ions takes one
    ion from each of channels ``0 .. qubits-1``.
    """
    box_side: float = 1.0
    ion_count: int = 20000
    dipole_constant: float = 1.0
    channel_count: int = 3
    channel_probability: float = 0.05
    threshold: float = 4.0e4
    qubits: int = 3
    topology: Topology = Topology.STAR
    angular: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, 'topology', Topology(self.topology))
        positive = {
            'box_side': self.box_side, 'ion_count': self.ion_count,
            'dipole_constant': self.dipole_constant, 'channel_count': self.channel_count,
            'threshold': self.threshold,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ExperimentError(f"{name} must be positive, got {value}")
        if not 0 <= self.channel_probability or self.channel_probability * self.channel_count > 1 + 1e-12:
            raise ExperimentError(
                f"channel_probability * channel_count must lie in [0, 1], "
                f"got {self.channel_probability} * {self.channel_count}"
            )
        if not 2 <= self.qubits <= self.channel_count:
            raise ExperimentError(f"qubits must lie in [2, {self.channel_count}], got {self.qubits}")

    @property
    def max_factor(self) -> float:
        return 2.0 if self.angular else 1.0

    @property
    def coupling_radius(self) -> float:
        """Largest distance at which any pair can exceed the threshold."""
        return (self.max_factor * self.dipole_constant / self.threshold) ** (1.0 / 3.0)


@dataclass(frozen=True, eq=False)
class Crystal:
    positions: np.ndarray   # (ion_count, 3)
    channels: np.ndarray    # (ion_count,), -1 for inactive ions

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.channels >= 0)


def sample_crystal(model: CrystalModel, seed: int | Sequence[int]) -> Crystal:
    rng = np.random.default_rng(seed)
    positions = rng.uniform(0.0, model.box_side, size=(model.ion_count, 3))
    u = rng.uniform(size=model.ion_count)
    q = model.channel_probability
    channels = np.full(model.ion_count, -1, dtype=int)
    if q > 0:
        active = u < q * model.channel_count
        channels[active] = np.minimum(np.floor(u[active] / q), model.channel_count - 1).astype(int)
    return Crystal(positions, channels)


@dataclass(frozen=True, eq=False)
class CoupledPairs:
    """Undirected pairs ``first < second`` of active ions with ``g > threshold``."""
    first: np.ndarray
    second: np.ndarray
    coupling: np.ndarray

    def neighbors(self, ion_count: int) -> list[list[int]]:
        adjacency: list[list[int]] = [[] for _ in range(ion_count)]
        for a, b in zip(self.first.tolist(), self.second.tolist()):
            adjacency[a].append(b)
            adjacency[b].append(a)
        for row in adjacency:
            row.sort()
        return adjacency


def coupled_pairs(crystal: Crystal, model: CrystalModel) -> CoupledPairs:
    active = crystal.active
    empty = np.empty(0, dtype=int)
    if active.size < 2:
        return CoupledPairs(empty, empty, np.empty(0))
    points = crystal.positions[active]
    tree = cKDTree(points, boxsize=model.box_side)
    local = tree.query_pairs(model.coupling_radius, output_type='ndarray')
    if local.size == 0:
        return CoupledPairs(empty, empty, np.empty(0))

    d = points[local[:, 1]] - points[local[:, 0]]
    d -= model.box_side * np.round(d / model.box_side)
    r = np.linalg.norm(d, axis=1)
    g = model.dipole_constant / r**3
    if model.angular:
        cos_theta = d[:, 2] / r
        g *= np.abs(1.0 - 3.0 * cos_theta**2)
    keep = g > model.threshold

    first = active[local[keep, 0]]
    second = active[local[keep, 1]]
    lo, hi = np.minimum(first, second), np.maximum(first, second)
    order = np.lexsort((hi, lo))
    return CoupledPairs(lo[order], hi[order], g[keep][order])


def _bus_ions(crystal: Crystal) -> np.ndarray:
    return np.flatnonzero(crystal.channels == 0)


def count_star_instances(crystal: Crystal, model: CrystalModel, pairs: CoupledPairs | None = None) -> int:
    """Greedy star matching: each bus ion, in index order, claims its lowest
    unclaimed coupled ion from every outer channel; all or nothing."""
    pairs = pairs if pairs is not None else coupled_pairs(crystal, model)
    adjacency = pairs.neighbors(len(crystal.channels))
    claimed = np.zeros(len(crystal.channels), dtype=bool)
    count = 0
    for b in _bus_ions(crystal):
        picks = []
        for k in range(1, model.qubits):
            pick = next(
                (j for j in adjacency[b] if crystal.channels[j] == k and not claimed[j]),
                None,
            )
            if pick is None:
                break
            picks.append(pick)
        else:
            claimed[b] = True
            claimed[picks] = True
            count += 1
    return count


def count_cluster_instances(crystal: Crystal, model: CrystalModel, pairs: CoupledPairs | None = None) -> int:
    """Greedy fully connected groups anchored on bus-channel ions."""
    pairs = pairs if pairs is not None else coupled_pairs(crystal, model)
    adjacency = pairs.neighbors(len(crystal.channels))
    neighbor_sets = [set(row) for row in adjacency]
    claimed = np.zeros(len(crystal.channels), dtype=bool)
    count = 0
    for anchor in _bus_ions(crystal):
        if claimed[anchor]:
            continue
        members = [int(anchor)]
        for k in range(1, model.qubits):
            pick = next(
                (
                    j for j in adjacency[anchor]
                    if crystal.channels[j] == k and not claimed[j]
                    and all(j in neighbor_sets[m] for m in members)
                ),
                None,
            )
            if pick is None:
                break
            members.append(pick)
        else:
            claimed[members] = True
            count += 1
    return count


def count_instances(crystal: Crystal, model: CrystalModel, pairs: CoupledPairs | None = None) -> int:
    if model.topology is Topology.CLUSTER:
        return count_cluster_instances(crystal, model, pairs)
    return count_star_instances(crystal, model, pairs)


def estimate_p(crystal: Crystal, model: CrystalModel, pairs: CoupledPairs | None = None) -> float:
    """Fraction of (bus ion, other channel) pairs with at least one coupled ion."""
    pairs = pairs if pairs is not None else coupled_pairs(crystal, model)
    bus = _bus_ions(crystal)
    if bus.size == 0 or model.channel_count < 2:
        return 0.0
    adjacency = pairs.neighbors(len(crystal.channels))
    hits = 0
    for b in bus:
        reached = {int(crystal.channels[j]) for j in adjacency[b]}
        hits += sum(1 for k in range(1, model.channel_count) if k in reached)
    return hits / (bus.size * (model.channel_count - 1))


@dataclass(frozen=True)
class YieldResult:
    n_values: tuple[int, ...]
    counts: tuple[tuple[int, ...], ...]      # [n][seed]
    mean_counts: tuple[float, ...]
    estimated_p: float
    fitted_slope: float | None
    degenerate: bool

    @property
    def log_p(self) -> float:
        return math.log(self.estimated_p) if self.estimated_p > 0 else -math.inf


@log_performance(logger, 'yield_scaling')
def yield_scaling(
    model: CrystalModel,
    n_values: Sequence[int],
    seeds: Sequence[int],
    jobs: int = 1,
) -> YieldResult:
    """Instance counts per register size, and the slope of log(mean count) against n."""
    n_values = tuple(int(n) for n in n_values)
    seeds = tuple(int(s) for s in seeds)
    if len(n_values) < 2:
        raise ExperimentError("yield scaling needs at least two register sizes")
    if not seeds:
        raise ExperimentError("yield scaling needs at least one seed")
    models = {n: replace(model, qubits=n) for n in n_values}

    def one(index: int) -> tuple[list[int], float]:
        with log_stage(logger, 'crystal', index=index, seed=seeds[index]) as ctx:
            crystal = sample_crystal(model, [seeds[index], index])
            pairs = coupled_pairs(crystal, model)
            ctx['pairs'] = int(pairs.first.size)
            counts = [count_instances(crystal, models[n], pairs) for n in n_values]
            return counts, estimate_p(crystal, model, pairs)

    runs = map_ordered(one, range(len(seeds)), jobs)
    counts = tuple(tuple(run[0][i] for run in runs) for i in range(len(n_values)))
    mean_counts = tuple(float(np.mean(c)) for c in counts)
    estimated_p = float(np.mean([run[1] for run in runs]))

    usable = [(n, m) for n, m in zip(n_values, mean_counts) if m > 0]
    degenerate = len(usable) < 2
    slope = None
    if not degenerate:
        xs, ys = zip(*usable)
        slope = float(np.polyfit(np.asarray(xs, float), np.log(ys), 1)[0])
    else:
        logger.warning("yield fit skipped", reason="fewer than two non-zero counts", counts=list(mean_counts))
    logger.info("yield scaling", estimated_p=estimated_p, slope=slope, topology=model.topology.value)
    return YieldResult(n_values, counts, mean_counts, estimated_p, slope, degenerate)
