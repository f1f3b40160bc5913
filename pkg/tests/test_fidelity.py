#!/usr/bin/env python3
"""
Tests for worst-case fidelities: closed form, subspace search and oracles.
"""
import unittest

import numpy as np
from numpy.testing import assert_allclose
from scipy.stats import unitary_group

from config import DEFAULT_COUPLING
from fidelity import (
    FidelityError, SubspaceError, brute_force_worst_fidelity, eigenphase_max_gap,
    full_space_worst_fidelity, simplex_worst_fidelity, subspace_worst_fidelity,
)
from gates import gate_propagator, simple_cps, symmetrized_cps
from hilbert import NotUnitaryError, propagator
from ionmodel import IonParams, ideal_cps_target, qubit_projector, reference_pair


def diag_phases(*phases):
    return np.diag(np.exp(1j * np.asarray(phases, dtype=float)))


class TestEigenphaseGap(unittest.TestCase):
    def test_identity(self):
        self.assertAlmostEqual(eigenphase_max_gap(np.eye(4)), 2 * np.pi)

    def test_quarter_turn(self):
        self.assertAlmostEqual(eigenphase_max_gap(diag_phases(0, np.pi / 2)), 1.5 * np.pi)

    def test_equally_spaced(self):
        self.assertAlmostEqual(eigenphase_max_gap(diag_phases(0, 2 * np.pi / 3, 4 * np.pi / 3)), 2 * np.pi / 3)

    def test_rejects_non_unitary(self):
        with self.assertRaises(NotUnitaryError):
            eigenphase_max_gap(np.diag([1.0, 0.5]))


class TestFullSpace(unittest.TestCase):
    def test_same_operator(self):
        u = unitary_group.rvs(3, random_state=1)
        result = full_space_worst_fidelity(u, u)
        self.assertAlmostEqual(result.value, 1.0, places=10)
        self.assertAlmostEqual(result.max_gap, 2 * np.pi, places=6)

    def test_antipodal(self):
        self.assertLess(full_space_worst_fidelity(np.eye(2), np.diag([1, -1])).value, 1e-9)

    def test_quarter_turn_is_half(self):
        self.assertAlmostEqual(full_space_worst_fidelity(np.eye(2), diag_phases(0, np.pi / 2)).value, 0.5, places=9)

    def test_matches_simplex_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            phases = rng.uniform(0, 2 * np.pi, size=int(rng.integers(2, 9)))
            closed = full_space_worst_fidelity(np.eye(phases.size), diag_phases(*phases)).value
            self.assertAlmostEqual(closed, simplex_worst_fidelity(phases), delta=1e-8)

    def test_clustered_phases_stay_high(self):
        self.assertGreater(full_space_worst_fidelity(np.eye(3), diag_phases(0, 0.01, -0.02)).value, 0.999)


class TestSubspace(unittest.TestCase):
    def test_full_projector_agrees_with_closed_form(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            dim = int(rng.integers(2, 7))
            u0 = unitary_group.rvs(dim, random_state=rng)
            u = unitary_group.rvs(dim, random_state=rng)
            self.assertAlmostEqual(
                subspace_worst_fidelity(u0, u, np.eye(dim)).value,
                full_space_worst_fidelity(u0, u).value,
                delta=1e-9,
            )

    def test_refinement_reaches_closed_form_near_identity(self):
        # small rotations keep the origin outside the numerical range, so the
        # maximum sits on a kink and the refined angle decides the value
        rng = np.random.default_rng(23)
        for _ in range(25):
            dim = int(rng.integers(2, 6))
            w = unitary_group.rvs(dim, random_state=rng)
            a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            u = w @ propagator(0.5 * (a + a.conj().T), 0.15)
            expected = full_space_worst_fidelity(w, u).value
            self.assertGreater(expected, 0.0)
            self.assertAlmostEqual(
                subspace_worst_fidelity(w, u, np.eye(dim)).value, expected, delta=1e-9,
            )

    def test_restriction_never_lowers_fidelity(self):
        rng = np.random.default_rng(10)
        p = np.diag([1, 1, 1, 0, 0]).astype(complex)
        for _ in range(10):
            u = unitary_group.rvs(5, random_state=rng)
            u0 = np.eye(5)
            self.assertGreaterEqual(
                subspace_worst_fidelity(u0, u, p).value + 1e-10,
                full_space_worst_fidelity(u0, u).value,
            )

    def test_witness_lies_in_subspace(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        u = propagator(0.5 * (a + a.conj().T), 0.3)
        p = np.diag([1, 0, 1, 0]).astype(complex)
        result = subspace_worst_fidelity(np.eye(4), u, p)
        self.assertAlmostEqual(np.linalg.norm(result.witness), 1.0, places=12)
        assert_allclose(p @ result.witness, result.witness, atol=1e-12)
        overlap = abs(np.vdot(result.witness, u @ result.witness)) ** 2
        self.assertAlmostEqual(overlap, result.value, delta=1e-6)

    def test_global_phase_invariance(self):
        rng = np.random.default_rng(12)
        u0 = unitary_group.rvs(4, random_state=rng)
        u = unitary_group.rvs(4, random_state=rng)
        p = np.diag([1, 1, 0, 0]).astype(complex)
        a = subspace_worst_fidelity(u0, u, p).value
        b = subspace_worst_fidelity(u0, np.exp(2.1j) * u, p).value
        self.assertAlmostEqual(a, b, delta=1e-9)

    def test_scan_resolution_converged(self):
        rng = np.random.default_rng(13)
        u = unitary_group.rvs(6, random_state=rng)
        p = np.diag([1, 1, 1, 0, 0, 0]).astype(complex)
        coarse = subspace_worst_fidelity(np.eye(6), u, p).value
        fine = subspace_worst_fidelity(np.eye(6), u, p, scan_angles=512).value
        self.assertAlmostEqual(coarse, fine, delta=1e-8)

    def test_leakage_lowers_fidelity(self):
        # part of |0> leaks into the third level
        c, s = np.cos(np.pi / 8), np.sin(np.pi / 8)
        u = np.array([[c, 0, -s], [0, 1, 0], [s, 0, c]], dtype=complex)
        p = np.diag([1, 1, 0]).astype(complex)
        self.assertAlmostEqual(subspace_worst_fidelity(np.eye(3), u, p).value, c**2, places=8)

    def test_rejects_non_projector(self):
        with self.assertRaises(SubspaceError):
            subspace_worst_fidelity(np.eye(2), np.eye(2), np.diag([1.0, 0.5]))

    def test_rejects_target_leaving_subspace(self):
        swap = np.array([[0, 1], [1, 0]], dtype=complex)
        with self.assertRaises(SubspaceError):
            subspace_worst_fidelity(swap, np.eye(2), np.diag([1, 0]).astype(complex))


class TestOracles(unittest.TestCase):
    def test_brute_force_matches_closed_form(self):
        rng = np.random.default_rng(21)
        for k in range(5):
            u0 = unitary_group.rvs(4, random_state=rng)
            u = unitary_group.rvs(4, random_state=rng)
            closed = full_space_worst_fidelity(u0, u).value
            brute = brute_force_worst_fidelity(u0, u, np.eye(4), 200, seed=k)
            self.assertAlmostEqual(brute, closed, delta=1e-4)

    def test_brute_force_is_upper_bound(self):
        rng = np.random.default_rng(22)
        u = unitary_group.rvs(4, random_state=rng)
        p = np.diag([1, 1, 1, 0]).astype(complex)
        exact = subspace_worst_fidelity(np.eye(4), u, p).value
        self.assertGreaterEqual(brute_force_worst_fidelity(np.eye(4), u, p, 20, seed=1) + 1e-7, exact)

    def test_brute_force_identity(self):
        self.assertAlmostEqual(brute_force_worst_fidelity(np.eye(3), np.eye(3), np.eye(3), 3), 1.0, places=12)

    def test_brute_force_needs_samples(self):
        with self.assertRaises(FidelityError):
            brute_force_worst_fidelity(np.eye(2), np.eye(2), np.eye(2), 0)

    def test_simplex_spot_values(self):
        self.assertAlmostEqual(simplex_worst_fidelity([0.0, np.pi / 2]), 0.5, places=9)
        self.assertLess(simplex_worst_fidelity([0.0, np.pi]), 1e-9)
        self.assertEqual(simplex_worst_fidelity([1.0]), 1.0)


class TestCpsFidelity(unittest.TestCase):
    def _fidelity(self, gate, coupling, params=IonParams(), policy='plain'):
        inst = reference_pair('i', 'j', coupling, params)
        u = gate_propagator(inst, gate, policy)
        return subspace_worst_fidelity(ideal_cps_target(inst, 'i', 'j'), u, qubit_projector(inst)).value

    def test_no_blockade_gives_zero(self):
        self.assertLess(self._fidelity(simple_cps('i', 'j'), 0.0), 1e-9)

    def test_reference_simple_cps(self):
        self.assertGreater(self._fidelity(simple_cps('i', 'j'), DEFAULT_COUPLING), 0.999)

    def test_composite_tolerates_rabi_error(self):
        value = self._fidelity(symmetrized_cps('i', 'j'), DEFAULT_COUPLING, IonParams(0.0, 1.1), 'bb1')
        self.assertGreaterEqual(value, 0.999)


if __name__ == '__main__':
    unittest.main()
