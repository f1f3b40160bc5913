"""
Named pass/fail suites behind the ``gate-check`` and ``selftest`` commands.

``gate_check_suite`` compiles the gates on reference instances and compares
them with their ideal actions. ``selftest_suite`` cross-checks the fidelity
machinery against closed forms and independent oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import unitary_group

from app_logger import sim_logger as logger, log_performance
from config import (
    BLOCK_UNITARY_TOL, DEFAULT_COUPLING, DEFAULT_SEED, IDEAL_COUPLING, RECONSTRUCTION_TOL,
)
from experiments import cps_fidelity
from fidelity import (
    brute_force_worst_fidelity, eigenphase_max_gap, full_space_worst_fidelity,
    simplex_worst_fidelity, subspace_worst_fidelity,
)
from gates import bus_mediated_cnot, cnot, gate_propagator, restrict, simple_cps, symmetrized_cps
from hilbert import TWO_PI, global_phase_distance, hermitian_spectrum, max_abs, unitary_spectrum
from ionmodel import (
    Instance, Ion, ideal_cps_target, qubit_indices, qubit_projector, reference_pair,
    star_instance,
)
from pulses import bb1_expand, pulse, pulse_propagator, sequence_propagator

CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CPS_MATRIX = np.diag([1, 1, 1, -1]).astype(complex)


@dataclass(frozen=True)
class CheckResult:
    check: str
    value: float
    threshold: float
    passed: bool


def at_most(name: str, value: float, threshold: float) -> CheckResult:
    return CheckResult(name, float(value), threshold, bool(value <= threshold))


def at_least(name: str, value: float, threshold: float) -> CheckResult:
    return CheckResult(name, float(value), threshold, bool(value >= threshold))


# =============================================================================
# GATE CHECKS
# =============================================================================

def bb1_reference_distance(theta: float) -> float:
    instance = Instance.build([Ion('q')])
    p = pulse('q', '0e', 0.0, theta)
    return global_phase_distance(
        pulse_propagator(instance, p), sequence_propagator(instance, bb1_expand(p))
    )


def cps_equivalence_distance(coupling: float) -> float:
    instance = reference_pair('i', 'j', coupling)
    return global_phase_distance(
        gate_propagator(instance, symmetrized_cps('i', 'j')),
        gate_propagator(instance, simple_cps('i', 'j')),
    )


def qubit_block_distance(instance: Instance, u: np.ndarray, channels: tuple[str, ...], target: np.ndarray) -> float:
    block = restrict(u, qubit_indices(instance, channels))
    return global_phase_distance(block, target, tol=BLOCK_UNITARY_TOL)


@log_performance(logger, 'gate_check_suite')
def gate_check_suite(coupling: float = DEFAULT_COUPLING) -> list[CheckResult]:
    ideal_pair = reference_pair('i', 'j', IDEAL_COUPLING)
    ideal_star = star_instance('bus', ('q1', 'q2'), IDEAL_COUPLING)

    results = [
        at_most(f'bb1_reference_exact_theta_{name}', bb1_reference_distance(theta), 1e-9)
        for name, theta in (('pi_2', np.pi / 2), ('pi', np.pi), ('2pi', 2 * np.pi))
    ]
    results += [
        at_most('symmetrized_equals_simple_ideal', cps_equivalence_distance(IDEAL_COUPLING), 1e-6),
        at_most(f'symmetrized_equals_simple_g{coupling:g}', cps_equivalence_distance(coupling), 5e-4),
        at_most(
            'cps_truth_table',
            qubit_block_distance(
                ideal_pair, gate_propagator(ideal_pair, symmetrized_cps('i', 'j')), ('i', 'j'), CPS_MATRIX
            ),
            1e-6,
        ),
        at_most(
            'cnot_truth_table',
            qubit_block_distance(ideal_pair, gate_propagator(ideal_pair, cnot('i', 'j')), ('i', 'j'), CNOT_MATRIX),
            1e-6,
        ),
        at_most(
            'bus_cnot_truth_table',
            qubit_block_distance(
                ideal_star, gate_propagator(ideal_star, bus_mediated_cnot('q1', 'q2', 'bus')),
                ('q1', 'q2'), CNOT_MATRIX,
            ),
            1e-6,
        ),
        at_least(
            f'composite_cps_fidelity_omega_1.1_g{coupling:g}',
            cps_fidelity(0.0, 1.1, coupling, 'symmetrized_bb1'),
            0.999,
        ),
        at_most('simple_cps_without_blockade', cps_fidelity(0.0, 1.0, 0.0, 'simple'), 1e-9),
    ]
    for r in results:
        logger.info("gate check", check=r.check, value=r.value, passed=r.passed)
    return results


# =============================================================================
# SELF TEST
# =============================================================================

def _max_over(trials: int, rng: np.random.Generator, func: Callable[[np.random.Generator], float]) -> float:
    return max(func(rng) for _ in range(trials))


def _random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (a + a.conj().T)


@log_performance(logger, 'selftest_suite')
def selftest_suite(seed: int = DEFAULT_SEED) -> list[CheckResult]:
    rng = np.random.default_rng(seed)

    def simplex_gap(r: np.random.Generator) -> float:
        phases = r.uniform(0.0, TWO_PI, size=int(r.integers(2, 9)))
        closed = full_space_worst_fidelity(np.eye(phases.size), np.diag(np.exp(1j * phases))).value
        return abs(closed - simplex_worst_fidelity(phases))

    def brute_gap(r: np.random.Generator) -> float:
        u0 = unitary_group.rvs(4, random_state=r)
        u = unitary_group.rvs(4, random_state=r)
        closed = full_space_worst_fidelity(u0, u).value
        return abs(closed - brute_force_worst_fidelity(u0, u, np.eye(4), 50, int(r.integers(2**31))))

    def subspace_gap(r: np.random.Generator) -> float:
        dim = int(r.integers(2, 7))
        u0 = unitary_group.rvs(dim, random_state=r)
        u = unitary_group.rvs(dim, random_state=r)
        return abs(full_space_worst_fidelity(u0, u).value - subspace_worst_fidelity(u0, u, np.eye(dim)).value)

    def phase_invariance(r: np.random.Generator) -> float:
        u0 = unitary_group.rvs(3, random_state=r)
        u = unitary_group.rvs(3, random_state=r)
        twisted = np.exp(1j * r.uniform(0.0, TWO_PI)) * u
        p = np.diag([1, 1, 0]).astype(complex)
        return abs(subspace_worst_fidelity(u0, u, p).value - subspace_worst_fidelity(u0, twisted, p).value)

    def hermitian_reconstruction(r: np.random.Generator) -> float:
        h = _random_hermitian(int(r.integers(2, 10)), r)
        return max_abs(hermitian_spectrum(h).reconstruct() - h)

    def unitary_reconstruction(r: np.random.Generator) -> float:
        u = unitary_group.rvs(int(r.integers(2, 10)), random_state=r)
        return max_abs(unitary_spectrum(u).reconstruct() - u)

    instance = reference_pair('i', 'j', 0.0)
    blockade_free = subspace_worst_fidelity(
        ideal_cps_target(instance, 'i', 'j'),
        gate_propagator(instance, simple_cps('i', 'j')),
        qubit_projector(instance),
    ).value

    results = [
        at_most('fidelity_antipodal_phases', full_space_worst_fidelity(np.eye(2), np.diag([1, -1])).value, 1e-9),
        at_most(
            'fidelity_quarter_turn_error',
            abs(full_space_worst_fidelity(np.eye(2), np.diag([1, 1j])).value - 0.5),
            1e-9,
        ),
        at_least('identity_gap_full_turn', eigenphase_max_gap(np.eye(4)), TWO_PI - 1e-12),
        at_most('simple_cps_without_blockade', blockade_free, 1e-9),
        at_most('closed_form_vs_simplex', _max_over(10, rng, simplex_gap), 1e-8),
        at_most('closed_form_vs_brute_force', _max_over(5, rng, brute_gap), 1e-4),
        at_most('subspace_full_projector_vs_closed_form', _max_over(10, rng, subspace_gap), 1e-8),
        at_most('global_phase_invariance', _max_over(5, rng, phase_invariance), 1e-9),
        at_most('hermitian_reconstruction', _max_over(5, rng, hermitian_reconstruction), RECONSTRUCTION_TOL),
        at_most('unitary_reconstruction', _max_over(5, rng, unitary_reconstruction), RECONSTRUCTION_TOL),
    ]
    for r in results:
        logger.info("self test", check=r.check, value=r.value, passed=r.passed)
    return results
