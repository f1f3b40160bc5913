"""
Dense complex linear-algebra kernel.

Operators are plain square ``numpy`` complex arrays. Energies are in units
of the mean Rabi frequency and durations in its inverse (hbar = 1), so a
propagator is always ``exp(-i H t)`` with no further constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np
import numpy.typing as npt
import scipy.linalg

from app_logger import sim_logger as logger
from config import HERMITIAN_TOL, UNITARY_TOL

Operator = npt.NDArray[np.complex128]
StateVector = npt.NDArray[np.complex128]

TWO_PI = 2.0 * np.pi

# Pauli matrices in the (lower, upper) basis
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


# =============================================================================
# CUSTOM EXCEPTIONS
# =============================================================================

class SimulationError(Exception):
    """Base exception for simulator errors."""

    def __init__(self, message: str, user_message: str | None = None):
        super().__init__(message)
        self.user_message = user_message or message
        logger.error(f"{self.__class__.__name__}: {message}")


class DimensionMismatchError(SimulationError):
    """Operands have incompatible dimensions."""
    pass


class NotHermitianError(SimulationError):
    """Generator is not Hermitian within tolerance."""
    pass


class NotUnitaryError(SimulationError):
    """Operator is not unitary within tolerance."""
    pass


# =============================================================================
# TYPE DEFINITIONS
# =============================================================================

@dataclass(frozen=True)
class Spectrum:
    """Eigen-decomposition ``A = V diag(values) V^dagger`` with unitary ``V``."""
    values: np.ndarray
    vectors: Operator

    def reconstruct(self) -> Operator:
        return (self.vectors * self.values) @ self.vectors.conj().T


# =============================================================================
# VALIDATION HELPERS
# =============================================================================

def as_operator(a: npt.ArrayLike) -> Operator:
    """Coerce to a square complex matrix."""
    op = np.asarray(a, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise DimensionMismatchError(f"operator must be square, got shape {op.shape}")
    return op


def max_abs(a: np.ndarray) -> float:
    """Max-abs entry norm."""
    return float(np.max(np.abs(a))) if a.size else 0.0


def is_hermitian(h: Operator, tol: float = HERMITIAN_TOL) -> bool:
    return max_abs(h - h.conj().T) <= tol


def is_unitary(u: Operator, tol: float = UNITARY_TOL) -> bool:
    return max_abs(u.conj().T @ u - np.eye(u.shape[0])) <= tol


def require_hermitian(h: npt.ArrayLike, tol: float = HERMITIAN_TOL) -> Operator:
    op = as_operator(h)
    if not is_hermitian(op, tol):
        raise NotHermitianError(
            f"operator deviates from Hermitian by {max_abs(op - op.conj().T):.3e}"
        )
    return op


def require_unitary(u: npt.ArrayLike, tol: float = UNITARY_TOL) -> Operator:
    op = as_operator(u)
    if not is_unitary(op, tol):
        deviation = max_abs(op.conj().T @ op - np.eye(op.shape[0]))
        raise NotUnitaryError(f"operator deviates from unitary by {deviation:.3e}")
    return op


def require_same_dim(a: Operator, b: Operator) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dimension mismatch: {a.shape} vs {b.shape}")


# =============================================================================
# TENSOR STRUCTURE
# =============================================================================

def kron(a: npt.ArrayLike, b: npt.ArrayLike) -> Operator:
    """Kronecker product with ``a``'s index slowest."""
    return np.kron(as_operator(a), as_operator(b))


def kron_all(ops: Sequence[npt.ArrayLike]) -> Operator:
    if not ops:
        return np.ones((1, 1), dtype=complex)
    return reduce(kron, ops)


def embed(op: npt.ArrayLike, slot: int, local_dims: Sequence[int]) -> Operator:
    """Place ``op`` at position ``slot`` of a product space, identity elsewhere."""
    op = as_operator(op)
    if not 0 <= slot < len(local_dims):
        raise DimensionMismatchError(
            f"slot {slot} out of range for {len(local_dims)} subsystems"
        )
    if op.shape[0] != local_dims[slot]:
        raise DimensionMismatchError(
            f"operator dim {op.shape[0]} does not match local dim {local_dims[slot]} at slot {slot}"
        )
    left = int(np.prod(local_dims[:slot], dtype=int))
    right = int(np.prod(local_dims[slot + 1:], dtype=int))
    return np.kron(np.kron(np.eye(left, dtype=complex), op), np.eye(right, dtype=complex))


def embed_diagonal(values: npt.ArrayLike, slot: int, local_dims: Sequence[int]) -> np.ndarray:
    """Diagonal of ``embed(diag(values), slot, local_dims)`` without forming the matrix."""
    values = np.asarray(values)
    if not 0 <= slot < len(local_dims) or values.shape[0] != local_dims[slot]:
        raise DimensionMismatchError(
            f"cannot embed {values.shape[0]} diagonal entries at slot {slot} of {list(local_dims)}"
        )
    left = int(np.prod(local_dims[:slot], dtype=int))
    right = int(np.prod(local_dims[slot + 1:], dtype=int))
    return np.kron(np.kron(np.ones(left), values), np.ones(right))


def basis_state(index: int, dim: int) -> StateVector:
    state = np.zeros(dim, dtype=complex)
    state[index] = 1.0
    return state


def product_index(levels: Sequence[int], local_dims: Sequence[int]) -> int:
    """Flat index of a product basis state (first subsystem slowest)."""
    return int(np.ravel_multi_index(tuple(levels), tuple(local_dims)))


# =============================================================================
# SPECTRAL DECOMPOSITIONS
# =============================================================================

def hermitian_spectrum(h: npt.ArrayLike) -> Spectrum:
    op = require_hermitian(h)
    values, vectors = scipy.linalg.eigh(op)
    return Spectrum(values=values, vectors=vectors)


def unitary_spectrum(u: npt.ArrayLike) -> Spectrum:
    """Spectrum of a unitary via its complex Schur form.

    For a normal matrix the Schur form is diagonal, so the Schur vectors are
    an orthonormal eigenbasis even inside degenerate eigenspaces.
    """
    op = require_unitary(u)
    t, z = scipy.linalg.schur(op, output='complex')
    return Spectrum(values=np.diag(t).copy(), vectors=z)


def propagator(h: npt.ArrayLike, t: float) -> Operator:
    """``exp(-i h t)`` by Hermitian spectral decomposition.

    Negative durations are accepted and give the inverse evolution.
    """
    spectrum = hermitian_spectrum(h)
    phases = np.exp(-1j * spectrum.values * t)
    return (spectrum.vectors * phases) @ spectrum.vectors.conj().T


def eigenphases(u: npt.ArrayLike) -> np.ndarray:
    """Sorted eigenphases of a unitary, in ``[0, 2*pi)``."""
    op = require_unitary(u)
    phases = np.mod(np.angle(np.linalg.eigvals(op)), TWO_PI)
    # values rounding up to 2*pi belong to 0
    phases[phases >= TWO_PI - 1e-12] = 0.0
    return np.sort(phases)


def global_phase_distance(u: npt.ArrayLike, v: npt.ArrayLike, tol: float = UNITARY_TOL) -> float:
    """``1 - |tr(u^dagger v)| / dim``; zero iff ``u`` equals ``v`` up to a phase.

    Both operands must be unitary within ``tol``; qubit blocks cut out of a
    leaky gate are compared with ``BLOCK_UNITARY_TOL``.
    """
    a = require_unitary(u, tol)
    b = require_unitary(v, tol)
    require_same_dim(a, b)
    overlap = abs(np.trace(a.conj().T @ b)) / a.shape[0]
    return max(0.0, 1.0 - float(overlap))
