#!/usr/bin/env python3
"""
Tests for the gate library: CPS variants, single-qubit gates and CNOT circuits.
"""
import unittest

import numpy as np
from numpy.testing import assert_allclose

from checks import cps_equivalence_distance
from config import BLOCK_UNITARY_TOL, IDEAL_COUPLING
from gates import (
    FrameShift, GateError, bus_mediated_cnot, cnot, compose, evolve_state,
    expand_gate, gate_propagator, hadamard, pulse_counts, qubit_rotation,
    restrict, simple_cps, swap_via_cnots, symmetrized_cps, z_rotation,
)
from hilbert import SIGMA_X, SIGMA_Y, SIGMA_Z, global_phase_distance, propagator
from ionmodel import (
    Instance, Ion, qubit_indices, qubit_state, reference_pair, star_instance,
)
from pulses import PulseError

SINGLE = Instance.build([Ion('q')])
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def qubit_block(instance, u, channels=None):
    return restrict(u, qubit_indices(instance, channels))


def target_rotation(phi, theta):
    axis = np.cos(phi) * SIGMA_X + np.sin(phi) * SIGMA_Y
    return propagator(0.5 * axis, theta)


class TestCpsSequences(unittest.TestCase):
    def test_simple_layout(self):
        gate = simple_cps('i', 'j')
        assert_allclose([p.area for p in gate.sequence], [np.pi, 2 * np.pi, np.pi])
        self.assertEqual(gate.software_phases, ())

    def test_symmetrized_pulse_budget(self):
        gate = symmetrized_cps('i', 'j')
        self.assertEqual(len(gate.sequence), 12)
        self.assertEqual(pulse_counts(gate), {'i': 4, 'j': 8})

    def test_same_channel_rejected(self):
        with self.assertRaises(GateError):
            simple_cps('i', 'i')
        with self.assertRaises(GateError):
            symmetrized_cps('j', 'j')

    def test_symmetrized_equals_simple_on_ideal_instance(self):
        inst = reference_pair('i', 'j', IDEAL_COUPLING)
        d = global_phase_distance(
            gate_propagator(inst, symmetrized_cps('i', 'j')),
            gate_propagator(inst, simple_cps('i', 'j')),
        )
        self.assertLess(d, 1e-6)

    def test_symmetrized_close_to_simple_at_g100(self):
        # the finite blockade leaves about 2.7e-4 between the two layouts
        self.assertLess(cps_equivalence_distance(100.0), 5e-4)

    def test_symmetrized_approaches_simple_as_coupling_grows(self):
        distances = [cps_equivalence_distance(g) for g in (100.0, 1e3, 1e4)]
        self.assertLess(distances[1], distances[0])
        self.assertLess(distances[2], distances[1])

    def test_composite_cps_leakage_bound(self):
        inst = reference_pair('i', 'j', 100.0)
        gate = symmetrized_cps('i', 'j')
        qubits = qubit_indices(inst)
        for bits in ((0, 0), (0, 1), (1, 0), (1, 1)):
            out = evolve_state(inst, gate, qubit_state(inst, {'i': bits[0], 'j': bits[1]}), 'bb1')
            leaked = 1.0 - float(np.sum(np.abs(out[qubits]) ** 2))
            self.assertLess(leaked, 1e-3, msg=f"input={bits}")

    def test_cps_truth_table(self):
        inst = reference_pair('i', 'j', IDEAL_COUPLING)
        block = qubit_block(inst, gate_propagator(inst, symmetrized_cps('i', 'j')))
        self.assertLess(global_phase_distance(block, np.diag([1, 1, 1, -1]), tol=BLOCK_UNITARY_TOL), 1e-6)

    def test_without_blockade_both_one_states_flip(self):
        inst = reference_pair('i', 'j', 0.0)
        block = qubit_block(inst, gate_propagator(inst, simple_cps('i', 'j')))
        assert_allclose(block, np.diag([1, -1, 1, -1]), atol=1e-10)


class TestSingleQubitGates(unittest.TestCase):
    def test_rotation_exact_on_reference_ion(self):
        for phi, theta in ((0.0, np.pi / 2), (np.pi / 2, np.pi), (1.3, 0.4), (-0.6, 3 * np.pi)):
            u = gate_propagator(SINGLE, qubit_rotation('q', phi, theta))
            assert_allclose(qubit_block(SINGLE, u), target_rotation(phi, theta), atol=1e-10)
            self.assertAlmostEqual(abs(u[2, 2]), 1.0, places=10)

    def test_negative_angle(self):
        u = gate_propagator(SINGLE, qubit_rotation('q', 0.3, -np.pi / 3))
        assert_allclose(qubit_block(SINGLE, u), target_rotation(0.3, -np.pi / 3), atol=1e-10)

    def test_zero_rotation_has_no_pulses(self):
        self.assertEqual(qubit_rotation('q', 1.0, 0.0).steps, ())
        self.assertEqual(len(qubit_rotation('q', 1.0, 4 * np.pi).sequence), 0)

    def test_z_rotation_is_frame_update(self):
        gate = z_rotation('q', 0.7)
        self.assertEqual(gate.steps, (FrameShift('q', 0.7),))
        u = gate_propagator(SINGLE, gate)
        assert_allclose(np.diag(u), [1, np.exp(-0.7j), 1], atol=1e-14)

    def test_hadamard(self):
        u = gate_propagator(SINGLE, hadamard('q'))
        assert_allclose(qubit_block(SINGLE, u), H, atol=1e-10)

    def test_hadamard_maps_z_to_x(self):
        block = qubit_block(SINGLE, gate_propagator(SINGLE, hadamard('q')))
        assert_allclose(block @ SIGMA_Z @ block.conj().T, SIGMA_X, atol=1e-8)

    def test_rotation_robust_under_bb1(self):
        inst = Instance.build([Ion('q')])
        gate = qubit_rotation('q', 0.0, np.pi / 2)
        plain = gate_propagator(inst, gate)
        composite = gate_propagator(inst, gate, 'bb1')
        self.assertLess(global_phase_distance(plain, composite), 1e-9)


class TestExpansion(unittest.TestCase):
    def test_frame_shifts_survive_expansion(self):
        gate = hadamard('q')
        expanded = expand_gate(gate, 'bb1')
        self.assertTrue(expanded.expanded)
        self.assertEqual(expanded.software_phases, gate.software_phases)
        self.assertEqual(len(expanded.sequence), 5 * len(gate.sequence))

    def test_second_expansion_rejected(self):
        with self.assertRaises(PulseError):
            expand_gate(expand_gate(simple_cps('i', 'j'), 'bb1'), 'bb1')

    def test_compose_merges_channels(self):
        gate = compose('x', [hadamard('a'), simple_cps('a', 'b')])
        self.assertEqual(gate.channels, ('a', 'b'))
        self.assertEqual(len(gate.steps), len(hadamard('a').steps) + 3)


class TestCnot(unittest.TestCase):
    def test_truth_table(self):
        inst = reference_pair('i', 'j', IDEAL_COUPLING)
        block = qubit_block(inst, gate_propagator(inst, cnot('i', 'j')))
        self.assertLess(global_phase_distance(block, CNOT, tol=BLOCK_UNITARY_TOL), 1e-6)

    def test_heavy_side_and_variant(self):
        self.assertEqual(pulse_counts(cnot('a', 'b', heavy='a'))['a'], 8)
        self.assertEqual(pulse_counts(cnot('a', 'b'))['b'], 8 + 6)
        self.assertEqual(len(cnot('a', 'b', variant='simple').sequence), 3 + 6)
        with self.assertRaises(GateError):
            cnot('a', 'b', heavy='c')

    def test_bus_mediated_cnot(self):
        inst = star_instance('bus', ('q1', 'q2'), IDEAL_COUPLING)
        u = gate_propagator(inst, bus_mediated_cnot('q1', 'q2', 'bus'))
        block = qubit_block(inst, u, ('q1', 'q2'))
        self.assertLess(global_phase_distance(block, CNOT, tol=BLOCK_UNITARY_TOL), 1e-6)

    def test_swap_exchanges_qubits(self):
        inst = reference_pair('i', 'j', IDEAL_COUPLING)
        gate = swap_via_cnots('i', 'j')
        block = qubit_block(inst, gate_propagator(inst, gate))
        self.assertLess(global_phase_distance(block, SWAP, tol=BLOCK_UNITARY_TOL), 1e-6)
        out = evolve_state(inst, gate, qubit_state(inst, {'i': 0, 'j': 1}))
        self.assertGreater(abs(np.vdot(qubit_state(inst, {'i': 1, 'j': 0}), out)) ** 2, 1 - 1e-6)

    def test_bus_cnot_makes_bell_pair(self):
        inst = star_instance('bus', ('q1', 'q2'), IDEAL_COUPLING)
        plus = (qubit_state(inst, {}) + qubit_state(inst, {'q1': 1})) / np.sqrt(2)
        out = evolve_state(inst, bus_mediated_cnot('q1', 'q2', 'bus'), plus)
        amp = {
            bits: np.vdot(qubit_state(inst, {'q1': bits[0], 'q2': bits[1]}), out)
            for bits in ((0, 0), (0, 1), (1, 0), (1, 1))
        }
        concurrence = 2 * abs(amp[0, 0] * amp[1, 1] - amp[0, 1] * amp[1, 0])
        self.assertAlmostEqual(concurrence, 1.0, delta=1e-5)

    def test_bus_cnot_truth_table_on_states(self):
        inst = star_instance('bus', ('q1', 'q2'), IDEAL_COUPLING)
        gate = bus_mediated_cnot('q1', 'q2', 'bus')
        out = evolve_state(inst, gate, qubit_state(inst, {'q1': 1, 'q2': 0}))
        self.assertGreater(abs(out @ qubit_state(inst, {'q1': 1, 'q2': 1}).conj()) ** 2, 1 - 1e-6)

    def test_bus_cnot_needs_couplings(self):
        inst = Instance.build([Ion('bus'), Ion('q1'), Ion('q2')], {('bus', 'q1'): 100.0})
        with self.assertRaises(GateError):
            gate_propagator(inst, bus_mediated_cnot('q1', 'q2', 'bus'))

    def test_bus_cnot_needs_distinct_channels(self):
        with self.assertRaises(GateError):
            bus_mediated_cnot('q1', 'q1', 'bus')


if __name__ == '__main__':
    unittest.main()
