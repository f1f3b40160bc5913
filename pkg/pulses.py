"""
Square resonant pulses, the BB1 composite expansion, and compilation of
pulse sequences into exact propagators.

Sequences are stored in application order: the first pulse acts first.
Operator products written right-to-left are reversed once, where the gate
library builds them.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from app_logger import sim_logger as logger
from config import PROPAGATOR_CACHE_MB, PROPAGATOR_CACHE_SIZE
from hilbert import Operator, SimulationError, StateVector, propagator
from ionmodel import ChannelId, Instance, Transition, pulse_hamiltonian

FOUR_PI = 4.0 * np.pi


# =============================================================================
# CUSTOM EXCEPTIONS
# =============================================================================

class PulseError(SimulationError):
    """Invalid pulse, sequence or expansion request."""
    pass


# =============================================================================
# TYPE DEFINITIONS
# =============================================================================

class ExpansionPolicy(enum.Enum):
    PLAIN = 'plain'
    BB1 = 'bb1'


@dataclass(frozen=True)
class Pulse:
    """Square pulse of area ``area`` and phase ``phase`` on one channel's transition."""
    channel: ChannelId
    transition: Transition
    phase: float
    area: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.phase) or not np.isfinite(self.area):
            raise PulseError(f"non-finite pulse parameters on channel {self.channel!r}")
        if self.area <= 0:
            raise PulseError(f"pulse area must be positive, got {self.area}")

    @property
    def duration(self) -> float:
        # field engaged for area / Omega0 with Omega0 = 1
        return self.area


@dataclass(frozen=True)
class PulseSequence:
    pulses: tuple[Pulse, ...] = ()
    expanded: bool = False

    def __len__(self) -> int:
        return len(self.pulses)

    def __iter__(self):
        return iter(self.pulses)

    def __add__(self, other: PulseSequence) -> PulseSequence:
        return PulseSequence(self.pulses + other.pulses, self.expanded or other.expanded)

    @property
    def total_duration(self) -> float:
        return float(sum(p.duration for p in self.pulses))

    def channels(self) -> tuple[ChannelId, ...]:
        seen: dict[ChannelId, None] = {}
        for p in self.pulses:
            seen.setdefault(p.channel, None)
        return tuple(seen)


def pulse(
    channel: ChannelId,
    ground: str | Transition,
    phase: float,
    area: float,
) -> Pulse:
    """Shorthand: ``pulse('i', '0e', 0, pi)``."""
    if isinstance(ground, str):
        transition = {'0e': Transition.G0E, '1e': Transition.G1E}.get(ground)
        if transition is None:
            transition = Transition(ground)
    else:
        transition = ground
    return Pulse(channel, transition, float(phase), float(area))


def sequence(pulses: Iterable[Pulse]) -> PulseSequence:
    return PulseSequence(tuple(pulses))


# =============================================================================
# BB1 COMPOSITE PULSES
# =============================================================================

def phi_c(theta: float) -> float:
    """Correction phase ``arccos(-theta / 4 pi)`` (positive branch)."""
    if not np.isfinite(theta) or theta <= 0 or theta > FOUR_PI:
        raise PulseError(f"BB1 needs 0 < theta <= 4 pi, got {theta}")
    return float(np.arccos(-theta / FOUR_PI))


def bb1_expand(p: Pulse) -> PulseSequence:
    """Five-pulse BB1 replacement of ``p``, in application order."""
    phc = phi_c(p.area)
    layout = (
        (0.0, p.area / 2),
        (phc, np.pi),
        (3 * phc, 2 * np.pi),
        (phc, np.pi),
        (0.0, p.area / 2),
    )
    return PulseSequence(
        tuple(Pulse(p.channel, p.transition, p.phase + dphi, area) for dphi, area in layout),
        expanded=True,
    )


def expand_sequence(seq: PulseSequence, policy: ExpansionPolicy | str) -> PulseSequence:
    policy = ExpansionPolicy(policy)
    if policy is ExpansionPolicy.PLAIN:
        return seq
    if seq.expanded:
        raise PulseError("sequence is already BB1-expanded; expansion is single-level")
    pulses: list[Pulse] = []
    for p in seq.pulses:
        pulses.extend(bb1_expand(p).pulses)
    return PulseSequence(tuple(pulses), expanded=True)


# =============================================================================
# COMPILATION
# =============================================================================

# One LRU cache per Hilbert-space dimension, sized so its matrices stay
# within PROPAGATOR_CACHE_MB.
_propagator_caches: dict[int, Callable[[Instance, Pulse], Operator]] = {}
_cache_lock = threading.Lock()


def propagator_cache_capacity(dim: int) -> int:
    """Cached propagators allowed for one dimension (at least one)."""
    matrix_bytes = 16 * dim * dim
    return max(1, min(PROPAGATOR_CACHE_SIZE, (PROPAGATOR_CACHE_MB << 20) // matrix_bytes))


def _exact_propagator(instance: Instance, p: Pulse) -> Operator:
    u = propagator(pulse_hamiltonian(instance, p), p.duration)
    u.setflags(write=False)
    return u


def _cache_for(dim: int) -> Callable[[Instance, Pulse], Operator]:
    with _cache_lock:
        cached = _propagator_caches.get(dim)
        if cached is None:
            capacity = propagator_cache_capacity(dim)
            cached = lru_cache(maxsize=capacity)(_exact_propagator)
            _propagator_caches[dim] = cached
            logger.debug("propagator cache created", dim=dim, capacity=capacity)
        return cached


def propagator_cache_info(dim: int):
    """``functools`` cache statistics for one dimension, or None if unused."""
    cached = _propagator_caches.get(dim)
    return cached.cache_info() if cached is not None else None


def clear_propagator_caches() -> None:
    with _cache_lock:
        for cached in _propagator_caches.values():
            cached.cache_clear()
        _propagator_caches.clear()


def pulse_propagator(instance: Instance, p: Pulse) -> Operator:
    """Exact propagator of one square pulse on the full instance space (read-only)."""
    return _cache_for(instance.dim)(instance, p)


def sequence_propagator(instance: Instance, seq: PulseSequence | Sequence[Pulse]) -> Operator:
    """``U_k ... U_2 U_1`` for pulses applied in list order."""
    pulses = seq.pulses if isinstance(seq, PulseSequence) else tuple(seq)
    for p in pulses:
        instance.slot(p.channel)
    u = np.eye(instance.dim, dtype=complex)
    for p in pulses:
        u = pulse_propagator(instance, p) @ u
    logger.debug("sequence compiled", pulses=len(pulses), dim=instance.dim)
    return u


def evolve_pulses(instance: Instance, seq: PulseSequence | Sequence[Pulse], state: StateVector) -> StateVector:
    """Push a state vector (or a matrix of column states) through a sequence."""
    pulses = seq.pulses if isinstance(seq, PulseSequence) else tuple(seq)
    psi = np.asarray(state, dtype=complex)
    for p in pulses:
        psi = pulse_propagator(instance, p) @ psi
    return psi
