"""
Centralized configuration for the REQC pulse simulator.

Loads .env once and exports all settings used across modules.
"""

import os

# Load environment variables from .env file (if it exists)
try:
    from dotenv import load_dotenv
    load_dotenv(os.path.join(os.path.dirname(os.path.abspath(__file__)), '.env'))
except ImportError:
    pass  # dotenv not installed, will use environment variables directly


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError:
        return default


# Logging
LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO').upper()
LOG_FILE = os.environ.get(
    'REQCSIM_LOG_FILE',
    os.path.join(os.path.dirname(os.path.abspath(__file__)), 'reqcsim.log'),
)

# Master seed for every seeded experiment
DEFAULT_SEED = _env_int('REQCSIM_SEED', 20031)

# Parallel work items (cli --jobs)
DEFAULT_JOBS = _env_int('REQCSIM_JOBS', 1)

# Numerical admission tolerances (max-abs entry norm)
HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-10
# restricted qubit blocks of a leaky gate are only nearly unitary
BLOCK_UNITARY_TOL = 1e-4
RECONSTRUCTION_TOL = 1e-9

# Worst-case fidelity search
FIDELITY_SCAN_ANGLES = 256
FIDELITY_ANGLE_TOL = 1e-10
FIDELITY_REFINE_WINDOW = 1e-6
FIDELITY_ZERO_TOL = 1e-12

# Physics defaults (energies in units of the mean Rabi frequency)
DEFAULT_COUPLING = 100.0
IDEAL_COUPLING = 1.0e5

# Single-pulse propagators kept in memory, per Hilbert-space dimension:
# at most PROPAGATOR_CACHE_SIZE entries and PROPAGATOR_CACHE_MB of matrices
PROPAGATOR_CACHE_SIZE = 128
PROPAGATOR_CACHE_MB = _env_int('REQCSIM_PROPAGATOR_CACHE_MB', 128)
