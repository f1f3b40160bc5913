"""
Gate library: controlled phase shifts built on the dipole blockade, single
qubit gates compiled to optical pulses through the excited level, and CNOT
circuits for the star (bus) architecture.

A gate is an ordered list of steps. A step is either a physical pulse or a
``FrameShift``, an exact phase update of the g1 level of one channel that
models a redefinition of that channel's laser phase.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from app_logger import sim_logger as logger
from hilbert import Operator, SimulationError, StateVector
from ionmodel import ChannelId, Instance, Level, level_diagonal
from pulses import (
    ExpansionPolicy, Pulse, PulseError, PulseSequence, bb1_expand, pulse,
    pulse_propagator,
)

PI = np.pi


# =============================================================================
# CUSTOM EXCEPTIONS
# =============================================================================

class GateError(SimulationError):
    """Invalid gate construction or application."""
    pass


# =============================================================================
# TYPE DEFINITIONS
# =============================================================================

class CpsVariant(enum.Enum):
    SIMPLE = 'simple'
    SYMMETRIZED = 'symmetrized'


@dataclass(frozen=True)
class FrameShift:
    """Software phase: the g1 level of ``channel`` picks up ``exp(-i phase)``."""
    channel: ChannelId
    phase: float


Step = Union[Pulse, FrameShift]


@dataclass(frozen=True)
class GateSpec:
    name: str
    channels: tuple[ChannelId, ...]
    steps: tuple[Step, ...] = ()
    requires: tuple[tuple[ChannelId, ChannelId], ...] = ()
    expanded: bool = False

    @property
    def sequence(self) -> PulseSequence:
        return PulseSequence(
            tuple(s for s in self.steps if isinstance(s, Pulse)),
            expanded=self.expanded,
        )

    @property
    def software_phases(self) -> tuple[FrameShift, ...]:
        return tuple(s for s in self.steps if isinstance(s, FrameShift))

    def then(self, *others: GateSpec, name: str | None = None) -> GateSpec:
        return compose(name or self.name, (self, *others))


def compose(name: str, gates: Iterable[GateSpec]) -> GateSpec:
    """Gates applied one after the other, first element first."""
    gates = list(gates)
    channels: dict[ChannelId, None] = {}
    requires: dict[tuple[ChannelId, ChannelId], None] = {}
    steps: list[Step] = []
    for gate in gates:
        for c in gate.channels:
            channels.setdefault(c, None)
        for pair in gate.requires:
            requires.setdefault(pair, None)
        steps.extend(gate.steps)
    return GateSpec(
        name=name,
        channels=tuple(channels),
        steps=tuple(steps),
        requires=tuple(requires),
        expanded=any(g.expanded for g in gates),
    )


def _distinct(i: ChannelId, j: ChannelId, what: str) -> None:
    if i == j:
        raise GateError(f"{what} needs two distinct channels, got {i!r} twice")


# =============================================================================
# CONTROLLED PHASE SHIFTS
# =============================================================================

def simple_cps(i: ChannelId, j: ChannelId) -> GateSpec:
    """Blockade phase gate: park i's |0> in e, 2 pi on j's 1<->e, bring i back."""
    _distinct(i, j, 'controlled phase shift')
    steps = (
        pulse(i, '0e', 0, PI),
        pulse(j, '1e', 0, 2 * PI),
        pulse(i, '0e', PI, PI),
    )
    return GateSpec(f'CPS({i},{j})', (i, j), steps)


def symmetrized_cps(i: ChannelId, j: ChannelId) -> GateSpec:
    """Phase-compensated blockade gate (12 pulses, 4 on i and 8 on j).

    Each qubit level of each ion makes the same excursions through e, so
    detuning phases picked up there are common to both levels.
    """
    _distinct(i, j, 'controlled phase shift')
    steps = (
        pulse(i, '0e', 0, PI),
        pulse(j, '1e', 0, PI),
        pulse(j, '1e', 0, PI),
        pulse(j, '0e', 0, PI),
        pulse(j, '0e', PI, PI),
        pulse(i, '0e', PI, PI),
        pulse(i, '1e', 0, PI),
        pulse(j, '1e', 0, PI),
        pulse(j, '1e', PI, PI),
        pulse(j, '0e', 0, PI),
        pulse(j, '0e', PI, PI),
        pulse(i, '1e', PI, PI),
    )
    return GateSpec(f'PCPS({i},{j})', (i, j), steps)


def cps(i: ChannelId, j: ChannelId, variant: CpsVariant | str = CpsVariant.SYMMETRIZED) -> GateSpec:
    variant = CpsVariant(variant)
    if variant is CpsVariant.SIMPLE:
        return simple_cps(i, j)
    return symmetrized_cps(i, j)


# =============================================================================
# SINGLE-QUBIT GATES
# =============================================================================

def z_rotation(c: ChannelId, phi: float) -> GateSpec:
    """``diag(1, exp(-i phi))`` on {|0>, |1>} as a frame update; no pulses."""
    return GateSpec(f'Z({c},{phi:.6g})', (c,), (FrameShift(c, float(phi)),))


def qubit_rotation(c: ChannelId, phi: float, theta: float) -> GateSpec:
    """``exp(-i theta/2 (cos phi sx + sin phi sy))`` on {|0>, |1>} via e.

    The 1<->e pi pulses move |1> into e and back; in between a 0<->e pulse
    of area theta acts as the qubit rotation. With the outer phases 0 and
    pi, the middle pulse phase ``phi - pi/2`` reproduces the target exactly
    on the reference ion, with no global phase and no population left in e.
    """
    if not np.isfinite(phi) or not np.isfinite(theta):
        raise GateError(f"non-finite rotation parameters phi={phi}, theta={theta}")
    if theta < 0:
        theta, phi = -theta, phi + PI
    theta = float(np.mod(theta, 4 * PI))
    name = f'R({c},{phi:.6g},{theta:.6g})'
    if theta < 1e-15:
        return GateSpec(name, (c,))
    steps = (
        pulse(c, '1e', 0, PI),
        pulse(c, '0e', phi - PI / 2, theta),
        pulse(c, '1e', PI, PI),
    )
    return GateSpec(name, (c,), steps)


def hadamard(c: ChannelId) -> GateSpec:
    """``H = R_y(pi/2) Z``: a frame update followed by a y rotation."""
    return compose(f'H({c})', (z_rotation(c, PI), qubit_rotation(c, PI / 2, PI / 2)))


# =============================================================================
# TWO- AND THREE-QUBIT CIRCUITS
# =============================================================================

def cnot(
    control: ChannelId,
    target: ChannelId,
    heavy: ChannelId | None = None,
    variant: CpsVariant | str = CpsVariant.SYMMETRIZED,
) -> GateSpec:
    """``H_target CPS H_target``.

    ``heavy`` picks the channel that takes the 8-pulse side of the
    symmetrized CPS; in star circuits that is the bus.
    """
    _distinct(control, target, 'CNOT')
    if heavy is not None and heavy not in (control, target):
        raise GateError(f"heavy channel {heavy!r} is not part of CNOT({control},{target})")
    i, j = (target, control) if heavy == control else (control, target)
    return compose(
        f'CNOT({control}->{target})',
        (hadamard(target), cps(i, j, variant), hadamard(target)),
    )


def swap_via_cnots(a: ChannelId, b: ChannelId, heavy: ChannelId | None = None, variant=CpsVariant.SYMMETRIZED) -> GateSpec:
    return compose(
        f'SWAP({a},{b})',
        (cnot(a, b, heavy, variant), cnot(b, a, heavy, variant), cnot(a, b, heavy, variant)),
    )


def bus_mediated_cnot(
    a: ChannelId,
    b: ChannelId,
    bus: ChannelId,
    variant: CpsVariant | str = CpsVariant.SYMMETRIZED,
) -> GateSpec:
    """CNOT(a -> b) between two outer qubits through a bus prepared in |0>.

    Swap a into the bus, CNOT from the bus onto b, swap back. Only
    bus-adjacent pairs interact.
    """
    if len({a, b, bus}) != 3:
        raise GateError(f"bus CNOT needs three distinct channels, got {a!r}, {b!r}, {bus!r}")
    swap = swap_via_cnots(a, bus, heavy=bus, variant=variant)
    gate = compose(
        f'BUSCNOT({a}->{b} via {bus})',
        (swap, cnot(bus, b, heavy=bus, variant=variant), swap),
    )
    return GateSpec(gate.name, gate.channels, gate.steps, ((a, bus), (b, bus)), gate.expanded)


# =============================================================================
# EXPANSION AND COMPILATION
# =============================================================================

def expand_gate(gate: GateSpec, policy: ExpansionPolicy | str) -> GateSpec:
    """Apply a pulse policy to every pulse; frame shifts stay in place."""
    policy = ExpansionPolicy(policy)
    if policy is ExpansionPolicy.PLAIN:
        return gate
    if gate.expanded:
        raise PulseError(f"gate {gate.name} is already BB1-expanded; expansion is single-level")
    steps: list[Step] = []
    for step in gate.steps:
        if isinstance(step, Pulse):
            steps.extend(bb1_expand(step).pulses)
        else:
            steps.append(step)
    return GateSpec(gate.name, gate.channels, tuple(steps), gate.requires, expanded=True)


def pulse_counts(gate: GateSpec) -> dict[ChannelId, int]:
    counts = Counter(s.channel for s in gate.steps if isinstance(s, Pulse))
    return {c: counts.get(c, 0) for c in gate.channels}


def validate_gate(instance: Instance, gate: GateSpec) -> None:
    for c in gate.channels:
        instance.slot(c)
    for a, b in gate.requires:
        if instance.coupling(a, b) <= 0:
            raise GateError(
                f"{gate.name} needs channels {a!r} and {b!r} coupled",
                user_message=f"missing coupling {a}-{b}",
            )


def frame_shift_diagonal(instance: Instance, shift: FrameShift) -> np.ndarray:
    ones = level_diagonal(instance, shift.channel, Level.G1)
    return 1.0 + (np.exp(-1j * shift.phase) - 1.0) * ones


def _apply_steps(instance: Instance, steps: Sequence[Step], psi: np.ndarray) -> np.ndarray:
    for step in steps:
        if isinstance(step, Pulse):
            psi = pulse_propagator(instance, step) @ psi
        else:
            d = frame_shift_diagonal(instance, step)
            psi = d[:, None] * psi if psi.ndim == 2 else d * psi
    return psi


def gate_propagator(
    instance: Instance,
    gate: GateSpec,
    policy: ExpansionPolicy | str = ExpansionPolicy.PLAIN,
) -> Operator:
    """Full-space propagator of a gate on ``instance``."""
    validate_gate(instance, gate)
    compiled = expand_gate(gate, policy)
    u = _apply_steps(instance, compiled.steps, np.eye(instance.dim, dtype=complex))
    logger.debug("gate compiled", gate=gate.name, steps=len(compiled.steps), dim=instance.dim)
    return u


def evolve_state(
    instance: Instance,
    gate: GateSpec,
    state: StateVector,
    policy: ExpansionPolicy | str = ExpansionPolicy.PLAIN,
) -> StateVector:
    """Push a state vector through a gate without forming its propagator."""
    validate_gate(instance, gate)
    compiled = expand_gate(gate, policy)
    return _apply_steps(instance, compiled.steps, np.asarray(state, dtype=complex))


def restrict(op: Operator, indices: Sequence[int]) -> Operator:
    """Block of ``op`` on the given basis indices."""
    idx = np.asarray(indices, dtype=int)
    return op[np.ix_(idx, idx)]
