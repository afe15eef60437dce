import numpy as np
import pytest

from eitecho.qstate import DensityMatrix3


@pytest.fixture
def mixed_ground() -> DensityMatrix3:
    """Fully mixed ground manifold, empty excited state."""
    return DensityMatrix3(np.diag([0.5, 0.5, 0.0]).astype(complex))


def random_density3(rng: np.random.Generator, trace: float = 1.0) -> np.ndarray:
    """Random positive 3x3 matrix with the requested trace (Ginibre construction)."""
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    m = g @ g.conj().T
    return trace * m / np.trace(m).real


def random_qubit_state(rng: np.random.Generator, trace: float = 1.0) -> np.ndarray:
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    m = g @ g.conj().T
    return trace * m / np.trace(m).real


def trace_distance_matrix(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of the difference, for matrices of any (equal) size."""
    return 0.5 * float(np.sum(np.linalg.svd(a - b, compute_uv=False)))
