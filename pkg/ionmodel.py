"""
Ions, level schemes, channels and instances, and the Hamiltonian in force
during a pulse.

Each ion is described in the rotating frame of its own channel's laser.
Ground hyperfine levels carry no static energy; the excited level of ion mu
carries ``-delta_mu`` during every pulse, and pairs of excited ions are
shifted by their static dipole coupling ``g_{mu nu}``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from hilbert import (
    Operator, SimulationError, embed, embed_diagonal,
)

if TYPE_CHECKING:
    from pulses import Pulse

ChannelId = str


# =============================================================================
# CUSTOM EXCEPTIONS
# =============================================================================

class InstanceError(SimulationError):
    """Invalid level scheme, ion parameters or instance layout."""
    pass


class UnknownChannelError(InstanceError):
    """Channel id not present in the instance."""

    def __init__(self, channel: ChannelId, known: Iterable[ChannelId]):
        self.channel = channel
        super().__init__(
            f"unknown channel {channel!r}; instance has {sorted(known)}",
            user_message=f"channel {channel!r} not found",
        )


# =============================================================================
# LEVELS AND TRANSITIONS
# =============================================================================

class Level(enum.Enum):
    G0 = 'g0'
    G1 = 'g1'
    AUX = 'aux'
    E = 'e'


QUBIT_LEVELS = (Level.G0, Level.G1)


class Transition(enum.Enum):
    """Optical transition of a pulse: one ground level coupled to ``e``."""
    G0E = 'g0e'
    G1E = 'g1e'

    @property
    def ground(self) -> Level:
        return Level.G0 if self is Transition.G0E else Level.G1

    @classmethod
    def from_ground(cls, ground: Level) -> Transition:
        if ground is Level.G0:
            return cls.G0E
        if ground is Level.G1:
            return cls.G1E
        raise InstanceError(f"transitions couple g0 or g1 to e, not {ground.value}")


@dataclass(frozen=True)
class LevelScheme:
    levels: tuple[Level, ...] = (Level.G0, Level.G1, Level.E)

    def __post_init__(self) -> None:
        if len(set(self.levels)) != len(self.levels):
            raise InstanceError(f"duplicate levels in {[l.value for l in self.levels]}")
        missing = {Level.G0, Level.G1, Level.E} - set(self.levels)
        if missing:
            raise InstanceError(
                f"level scheme lacks {sorted(l.value for l in missing)}"
            )

    @property
    def dim(self) -> int:
        return len(self.levels)

    def index(self, level: Level) -> int:
        try:
            return self.levels.index(level)
        except ValueError:
            raise InstanceError(f"level {level.value} not in scheme") from None

    def projector(self, level: Level) -> Operator:
        p = np.zeros((self.dim, self.dim), dtype=complex)
        i = self.index(level)
        p[i, i] = 1.0
        return p

    def indicator(self, level: Level) -> np.ndarray:
        v = np.zeros(self.dim)
        v[self.index(level)] = 1.0
        return v


THREE_LEVEL = LevelScheme()
FOUR_LEVEL = LevelScheme((Level.G0, Level.G1, Level.AUX, Level.E))


@dataclass(frozen=True)
class IonParams:
    """Detuning and Rabi-frequency ratio of one ion, relative to the mean Rabi frequency."""
    delta: float = 0.0
    omega_ratio: float = 1.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.delta) or not np.isfinite(self.omega_ratio):
            raise InstanceError(f"non-finite ion parameters {self}")
        if self.omega_ratio <= 0:
            raise InstanceError(f"omega_ratio must be positive, got {self.omega_ratio}")

    @property
    def is_reference(self) -> bool:
        return self.delta == 0.0 and self.omega_ratio == 1.0


REFERENCE = IonParams()


@dataclass(frozen=True)
class Ion:
    channel: ChannelId
    params: IonParams = REFERENCE
    scheme: LevelScheme = THREE_LEVEL


# =============================================================================
# INSTANCE
# =============================================================================

@dataclass(frozen=True)
class Instance:
    """One copy of the quantum computer: one ion per active channel.

    ``couplings`` is a symmetric tuple-of-tuples so instances stay hashable
    and can key the propagator cache.
    """
    ions: tuple[Ion, ...]
    couplings: tuple[tuple[float, ...], ...]
    _slots: Mapping[ChannelId, int] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        n = len(self.ions)
        if n == 0:
            raise InstanceError("instance needs at least one ion")
        channels = [ion.channel for ion in self.ions]
        if len(set(channels)) != n:
            raise InstanceError(f"channel ids must be unique, got {channels}")
        g = np.asarray(self.couplings, dtype=float)
        if g.shape != (n, n):
            raise InstanceError(f"coupling matrix must be {n}x{n}, got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise InstanceError("coupling matrix has non-finite entries")
        if np.any(g < 0):
            raise InstanceError("couplings must be non-negative")
        if np.any(np.diag(g) != 0):
            raise InstanceError("coupling matrix must have zero diagonal")
        if not np.array_equal(g, g.T):
            raise InstanceError("coupling matrix must be symmetric")
        object.__setattr__(self, '_slots', {c: i for i, c in enumerate(channels)})

    @classmethod
    def build(
        cls,
        ions: Sequence[Ion],
        couplings: Mapping[tuple[ChannelId, ChannelId], float] | None = None,
    ) -> Instance:
        """Instance from a sparse ``{(a, b): g}`` coupling map."""
        n = len(ions)
        slots = {ion.channel: i for i, ion in enumerate(ions)}
        g = [[0.0] * n for _ in range(n)]
        for (a, b), value in (couplings or {}).items():
            if a not in slots:
                raise UnknownChannelError(a, slots)
            if b not in slots:
                raise UnknownChannelError(b, slots)
            if a == b:
                raise InstanceError(f"self-coupling on channel {a!r}")
            g[slots[a]][slots[b]] = float(value)
            g[slots[b]][slots[a]] = float(value)
        return cls(ions=tuple(ions), couplings=tuple(tuple(row) for row in g))

    @property
    def channels(self) -> tuple[ChannelId, ...]:
        return tuple(ion.channel for ion in self.ions)

    @property
    def local_dims(self) -> tuple[int, ...]:
        return tuple(ion.scheme.dim for ion in self.ions)

    @property
    def dim(self) -> int:
        return int(np.prod(self.local_dims))

    def slot(self, channel: ChannelId) -> int:
        try:
            return self._slots[channel]
        except KeyError:
            raise UnknownChannelError(channel, self._slots) from None

    def ion(self, channel: ChannelId) -> Ion:
        return self.ions[self.slot(channel)]

    def coupling(self, a: ChannelId, b: ChannelId) -> float:
        return self.couplings[self.slot(a)][self.slot(b)]

    def is_reference(self) -> bool:
        return all(ion.params.is_reference for ion in self.ions)


def reference_pair(
    i: ChannelId = 'i',
    j: ChannelId = 'j',
    coupling: float = 100.0,
    params: IonParams = REFERENCE,
) -> Instance:
    """Two coupled ions sharing the same error parameters."""
    return Instance.build(
        [Ion(i, params), Ion(j, params)],
        {(i, j): coupling},
    )


def star_instance(
    bus: ChannelId,
    outers: Sequence[ChannelId],
    coupling: float | Sequence[float] = 100.0,
    params: Mapping[ChannelId, IonParams] | None = None,
    scheme: LevelScheme = THREE_LEVEL,
) -> Instance:
    """Bus ion coupled to every outer ion; outer ions mutually uncoupled."""
    params = params or {}
    couplings = (
        [float(coupling)] * len(outers)
        if np.isscalar(coupling) else [float(g) for g in coupling]
    )
    if len(couplings) != len(outers):
        raise InstanceError(f"{len(outers)} outer ions but {len(couplings)} couplings")
    ions = [Ion(c, params.get(c, REFERENCE), scheme) for c in (bus, *outers)]
    return Instance.build(ions, {(bus, o): g for o, g in zip(outers, couplings)})


# =============================================================================
# HAMILTONIANS
# =============================================================================

def excited_diagonal(instance: Instance, slot: int) -> np.ndarray:
    """Diagonal of the excited-state projector of one ion in the full space."""
    ion = instance.ions[slot]
    return embed_diagonal(ion.scheme.indicator(Level.E), slot, instance.local_dims)


def static_diagonal(instance: Instance) -> np.ndarray:
    """Detuning and dipole terms; diagonal in the product basis."""
    n = len(instance.ions)
    excited = [excited_diagonal(instance, mu) for mu in range(n)]
    diag = np.zeros(instance.dim)
    for mu, ion in enumerate(instance.ions):
        if ion.params.delta != 0.0:
            diag -= ion.params.delta * excited[mu]
    for mu in range(n):
        for nu in range(mu + 1, n):
            g = instance.couplings[mu][nu]
            if g != 0.0:
                diag += g * excited[mu] * excited[nu]
    return diag


def dipole_hamiltonian(instance: Instance) -> Operator:
    """Sum over unordered coupled pairs of ``g |ee><ee|``."""
    n = len(instance.ions)
    diag = np.zeros(instance.dim)
    for mu in range(n):
        for nu in range(mu + 1, n):
            g = instance.couplings[mu][nu]
            if g != 0.0:
                diag += g * excited_diagonal(instance, mu) * excited_diagonal(instance, nu)
    return np.diag(diag).astype(complex)


def drive_operator(scheme: LevelScheme, transition: Transition, phase: float, rabi: float) -> Operator:
    """Single-ion drive ``(rabi/2)(cos(phase) sx + sin(phase) sy)`` on ground<->e.

    ``sx = |a><e| + |e><a|`` and ``sy = -i|a><e| + i|e><a|``.
    """
    a = scheme.index(transition.ground)
    e = scheme.index(Level.E)
    h = np.zeros((scheme.dim, scheme.dim), dtype=complex)
    h[a, e] = 0.5 * rabi * np.exp(-1j * phase)
    h[e, a] = 0.5 * rabi * np.exp(1j * phase)
    return h


def pulse_hamiltonian(instance: Instance, pulse: Pulse) -> Operator:
    """Full Hamiltonian while ``pulse`` drives its channel's ion."""
    slot = instance.slot(pulse.channel)
    ion = instance.ions[slot]
    drive = drive_operator(ion.scheme, pulse.transition, pulse.phase, ion.params.omega_ratio)
    h = embed(drive, slot, instance.local_dims)
    h[np.diag_indices_from(h)] += static_diagonal(instance)
    return h


# =============================================================================
# TARGETS AND SUBSPACES
# =============================================================================

def level_diagonal(instance: Instance, channel: ChannelId, level: Level) -> np.ndarray:
    slot = instance.slot(channel)
    scheme = instance.ions[slot].scheme
    return embed_diagonal(scheme.indicator(level), slot, instance.local_dims)


def ideal_cps_target(instance: Instance, control: ChannelId, target: ChannelId) -> Operator:
    """``1 - 2|11><11|`` on the named ions, identity on everything else."""
    if control == target:
        raise InstanceError("controlled phase needs two distinct channels")
    both_one = level_diagonal(instance, control, Level.G1) * level_diagonal(instance, target, Level.G1)
    return np.diag(1.0 - 2.0 * both_one).astype(complex)


def qubit_indices(
    instance: Instance,
    channels: Sequence[ChannelId] | None = None,
    spectators: Mapping[ChannelId, Level] | None = None,
) -> np.ndarray:
    """Product-basis indices with the named ions in {g0, g1}.

    Ions not named sit in their spectator level (g0 unless given). With
    ``channels=None`` every ion is a qubit. Indices come out in the order of
    the qubit computational basis (first ion slowest).
    """
    named = list(instance.channels if channels is None else channels)
    for c in named:
        instance.slot(c)
    spectators = dict(spectators or {})
    options: list[list[int]] = []
    for ion in instance.ions:
        if ion.channel in named:
            options.append([ion.scheme.index(l) for l in QUBIT_LEVELS])
        else:
            options.append([ion.scheme.index(spectators.get(ion.channel, Level.G0))])
    grids = np.meshgrid(*[np.asarray(o) for o in options], indexing='ij')
    flat = np.ravel_multi_index(tuple(g.ravel() for g in grids), instance.local_dims)
    return flat.astype(int)


def qubit_projector(
    instance: Instance,
    channels: Sequence[ChannelId] | None = None,
    spectators: Mapping[ChannelId, Level] | None = None,
) -> Operator:
    p = np.zeros((instance.dim, instance.dim), dtype=complex)
    idx = qubit_indices(instance, channels, spectators)
    p[idx, idx] = 1.0
    return p


def qubit_state(instance: Instance, bits: Mapping[ChannelId, int]) -> np.ndarray:
    """Product basis state with each named ion in g0/g1, others in g0."""
    for channel, bit in bits.items():
        instance.slot(channel)
        if bit not in (0, 1):
            raise InstanceError(f"qubit value for channel {channel!r} must be 0 or 1, got {bit!r}")
    levels = []
    for ion in instance.ions:
        bit = bits.get(ion.channel, 0)
        levels.append(ion.scheme.index(QUBIT_LEVELS[bit]))
    state = np.zeros(instance.dim, dtype=complex)
    state[np.ravel_multi_index(tuple(levels), instance.local_dims)] = 1.0
    return state
