"""
Worst-case fidelity of a realized propagator against a target unitary.

Full space: closed form from the largest gap between eigenphases of
``u0^dagger u``. Restricted to a subspace: the squared distance from the
origin to the numerical range of the compressed overlap operator, found by
scanning support functions over angles and refining the best one.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np
import numpy.typing as npt
from scipy.optimize import minimize, minimize_scalar

from app_logger import sim_logger as logger
from config import (
    FIDELITY_ANGLE_TOL, FIDELITY_REFINE_WINDOW, FIDELITY_SCAN_ANGLES, FIDELITY_ZERO_TOL,
)
from hilbert import (
    TWO_PI, Operator, SimulationError, StateVector, as_operator, eigenphases,
    max_abs, require_same_dim, require_unitary,
)

PROJECTOR_TOL = 1e-9


# =============================================================================
# CUSTOM EXCEPTIONS
# =============================================================================

class FidelityError(SimulationError):
    """Invalid fidelity request."""
    pass


class SubspaceError(FidelityError):
    """Subspace is not an orthogonal projector or is not preserved by the target."""
    pass


# =============================================================================
# TYPE DEFINITIONS
# =============================================================================

@dataclass(frozen=True)
class FidelityResult:
    value: float
    max_gap: float | None = None
    witness: StateVector | None = None


# =============================================================================
# FULL SPACE
# =============================================================================

def eigenphase_max_gap(u: npt.ArrayLike) -> float:
    """Largest circular gap between sorted eigenphases, wrap-around included."""
    phases = eigenphases(u)
    wrap = TWO_PI + phases[0] - phases[-1]
    if phases.size == 1:
        return float(wrap)
    return float(max(np.max(np.diff(phases)), wrap))


def full_space_worst_fidelity(u0: npt.ArrayLike, u: npt.ArrayLike) -> FidelityResult:
    """``cos^2(gap/2)`` when the eigenphases of ``u0^dagger u`` fit in a half circle, else 0."""
    a = require_unitary(u0)
    b = require_unitary(u)
    require_same_dim(a, b)
    gap = eigenphase_max_gap(a.conj().T @ b)
    value = float(np.cos(gap / 2) ** 2) if gap >= np.pi else 0.0
    return FidelityResult(value=min(1.0, value), max_gap=gap)


# =============================================================================
# SUBSPACE
# =============================================================================

def subspace_basis(subspace: npt.ArrayLike) -> Operator:
    """Orthonormal columns spanning the range of an orthogonal projector."""
    p = as_operator(subspace)
    if max_abs(p - p.conj().T) > PROJECTOR_TOL or max_abs(p @ p - p) > PROJECTOR_TOL:
        raise SubspaceError("subspace operator is not an orthogonal projector")
    values, vectors = np.linalg.eigh(p)
    basis = vectors[:, values > 0.5]
    if basis.shape[1] == 0:
        raise SubspaceError("subspace projector has rank zero")
    return basis


def compressed_overlap(u0: npt.ArrayLike, u: npt.ArrayLike, subspace: npt.ArrayLike) -> tuple[Operator, Operator]:
    """``(B, B^dagger u0^dagger u B)`` for an orthonormal basis ``B`` of the subspace."""
    a = require_unitary(u0)
    b = require_unitary(u)
    require_same_dim(a, b)
    basis = subspace_basis(subspace)
    if basis.shape[0] != a.shape[0]:
        raise SubspaceError(
            f"subspace lives in dimension {basis.shape[0]}, operators in {a.shape[0]}"
        )
    image = a @ basis
    outside = image - basis @ (basis.conj().T @ image)
    if max_abs(outside) > PROJECTOR_TOL:
        raise SubspaceError(
            f"target does not preserve the subspace (leaks {max_abs(outside):.3e})"
        )
    m = basis.conj().T @ (a.conj().T @ b) @ basis
    return basis, m


def _rotated_hermitian_parts(m: Operator, alphas: np.ndarray) -> np.ndarray:
    rot = np.exp(-1j * np.asarray(alphas))[:, None, None]
    rotated = rot * m[None, :, :]
    return 0.5 * (rotated + np.conj(np.swapaxes(rotated, 1, 2)))


def _support(m: Operator, alpha: float) -> float:
    return float(np.linalg.eigvalsh(_rotated_hermitian_parts(m, np.array([alpha]))[0])[0])


def subspace_worst_fidelity(
    u0: npt.ArrayLike,
    u: npt.ArrayLike,
    subspace: npt.ArrayLike,
    scan_angles: int = FIDELITY_SCAN_ANGLES,
) -> FidelityResult:
    """Minimum of ``|<psi|u0^dagger u|psi>|^2`` over unit vectors of the subspace.

    The numerical range ``W(M)`` of the compressed overlap is convex, so its
    distance to the origin is ``max_alpha lambda_min(Herm(e^{-i alpha} M))``
    when positive and zero otherwise. Leakage out of the subspace shows up
    as ``M`` being a contraction and lowers the result.
    """
    basis, m = compressed_overlap(u0, u, subspace)
    alphas = TWO_PI * np.arange(scan_angles) / scan_angles
    lows = np.linalg.eigvalsh(_rotated_hermitian_parts(m, alphas))[:, 0]
    k = int(np.argmax(lows))
    best_alpha, best = float(alphas[k]), float(lows[k])

    # Brent's stopping tolerance scales with |x|, so search an offset centred
    # on zero. The maximum usually sits on an eigenvalue kink, where angle
    # error costs linearly in value; the second window polishes it.
    for half_width in (TWO_PI / scan_angles, FIDELITY_REFINE_WINDOW):
        centre = best_alpha
        refined = minimize_scalar(
            lambda t: -_support(m, centre + t),
            bounds=(-half_width, half_width),
            method='bounded',
            options={'xatol': FIDELITY_ANGLE_TOL},
        )
        if refined.success and -refined.fun > best:
            best_alpha, best = centre + float(refined.x), float(-refined.fun)

    _, vectors = np.linalg.eigh(_rotated_hermitian_parts(m, np.array([best_alpha]))[0])
    witness = basis @ vectors[:, 0]
    witness = witness / np.linalg.norm(witness)

    value = 0.0 if best <= FIDELITY_ZERO_TOL else min(1.0, best * best)
    logger.debug("subspace fidelity", rank=basis.shape[1], value=value, alpha=best_alpha)
    return FidelityResult(value=value, witness=witness)


# =============================================================================
# ORACLES
# =============================================================================

def _overlap_objective(m: Operator):
    k = m.shape[0]

    def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
        c = x[:k] + 1j * x[k:]
        n = float(np.real(np.vdot(c, c)))
        mc = m @ c
        mhc = m.conj().T @ c
        z = np.vdot(c, mc)
        zz = float(abs(z) ** 2)
        # Wirtinger derivative with respect to conj(c)
        g = (np.conj(z) * mc + z * mhc) / n**2 - 2.0 * zz * c / n**3
        return zz / n**2, np.concatenate([2.0 * g.real, 2.0 * g.imag])

    return objective


def brute_force_worst_fidelity(
    u0: npt.ArrayLike,
    u: npt.ArrayLike,
    subspace: npt.ArrayLike,
    n_samples: int,
    seed: int | Sequence[int] = 0,
) -> float:
    """Haar-random starts in the subspace, each polished by BFGS on the sphere.

    An upper bound on the true worst case that tightens with more samples.
    """
    if n_samples < 1:
        raise FidelityError(f"n_samples must be at least 1, got {n_samples}")
    _, m = compressed_overlap(u0, u, subspace)
    k = m.shape[0]
    objective = _overlap_objective(m)
    rng = np.random.default_rng(seed)
    best = np.inf
    for _ in range(n_samples):
        x0 = rng.standard_normal(2 * k)
        x0 /= np.linalg.norm(x0)
        start, _ = objective(x0)
        result = minimize(objective, x0, jac=True, method='BFGS')
        best = min(best, start, float(result.fun))
    return float(np.clip(best, 0.0, 1.0))


def simplex_worst_fidelity(phases: npt.ArrayLike) -> float:
    """``min |sum_j p_j exp(i phi_j)|^2`` over the probability simplex.

    Direct minimization with SLSQP from every edge midpoint and the
    barycenter. The objective is a convex quadratic in ``p``.
    """
    phi = np.asarray(phases, dtype=float).ravel()
    n = phi.size
    if n == 0:
        raise FidelityError("no eigenphases given")
    if n == 1:
        return 1.0
    gram = np.cos(phi[:, None] - phi[None, :])

    def objective(p: np.ndarray) -> tuple[float, np.ndarray]:
        gp = gram @ p
        return float(p @ gp), 2.0 * gp

    starts = [np.full(n, 1.0 / n)]
    for j, k in combinations(range(n), 2):
        p = np.zeros(n)
        p[[j, k]] = 0.5
        starts.append(p)

    constraints = ({'type': 'eq', 'fun': lambda p: np.sum(p) - 1.0, 'jac': lambda p: np.ones_like(p)},)
    best = np.inf
    for p0 in starts:
        result = minimize(
            objective, p0, jac=True, method='SLSQP',
            bounds=[(0.0, 1.0)] * n, constraints=constraints,
            options={'ftol': 1e-15, 'maxiter': 500},
        )
        p = np.clip(result.x, 0.0, None)
        p /= p.sum()
        best = min(best, objective(p)[0])
    return float(np.clip(best, 0.0, 1.0))
