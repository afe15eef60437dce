"""Quantum-state containers and metrics for the three-level system and its ground qubit.

The three-level basis order is fixed as (|0>, |1>, |e>): two nuclear ground
states and one optical excited state.  Ground-qubit objects live on the
(|0>, |1>) manifold and may be sub-normalized, because an EIT pulse parks part
of the population in |e> and the remaining ground block is then only "half a
density matrix".  All metrics below are defined to make sense for such blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-9
EIGENVALUE_TOL = 1e-9

# Pauli operators on the ground qubit, basis order (|0>, |1>).
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def _check_state_matrix(m: np.ndarray, dim: int, what: str) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.shape != (dim, dim):
        raise ValidationError(f"{what}: expected a {dim}x{dim} matrix, got shape {m.shape}")
    if not np.allclose(m, m.conj().T, rtol=0.0, atol=HERMITICITY_TOL):
        raise ValidationError(f"{what}: matrix is not Hermitian to within {HERMITICITY_TOL}")
    tr = np.trace(m)
    if abs(tr.imag) > HERMITICITY_TOL:
        raise ValidationError(f"{what}: trace has imaginary part {tr.imag}")
    if tr.real < -TRACE_TOL or tr.real > 1.0 + TRACE_TOL:
        raise ValidationError(f"{what}: trace {tr.real} outside [0, 1]")
    eigs = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    if eigs.min() < -EIGENVALUE_TOL:
        raise ValidationError(f"{what}: negative eigenvalue {eigs.min()}")
    m = m.copy()
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class DensityMatrix3:
    """State (possibly a sub-normalized block) of one three-level ensemble member."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "matrix", _check_state_matrix(self.matrix, 3, "DensityMatrix3")
        )

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def populations(self) -> tuple[float, float, float]:
        d = np.real(np.diag(self.matrix))
        return float(d[0]), float(d[1]), float(d[2])

    def ground_block(self) -> "GroundQubitState":
        """The (|0>, |1>) sub-block; sub-normalized when |e> is occupied."""
        return GroundQubitState(self.matrix[:2, :2])

    @staticmethod
    def from_ket(ket) -> "DensityMatrix3":
        v = np.asarray(ket, dtype=complex).reshape(3)
        return DensityMatrix3(np.outer(v, v.conj()))


@dataclass(frozen=True)
class GroundQubitState:
    """State of the nuclear ground qubit; trace may be below one."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "matrix", _check_state_matrix(self.matrix, 2, "GroundQubitState")
        )

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @staticmethod
    def from_ket(ket) -> "GroundQubitState":
        v = np.asarray(ket, dtype=complex).reshape(2)
        return GroundQubitState(np.outer(v, v.conj()))


# Ground qubit kets used throughout: computational pair and the equal-weight
# superpositions that couple maximally / not at all to an equal-phase
# bichromatic drive.
KET_0 = np.array([1.0, 0.0], dtype=complex)
KET_1 = np.array([0.0, 1.0], dtype=complex)
KET_BRIGHT = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
KET_DARK = np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0)


def bloch_vector(state: GroundQubitState) -> tuple[float, float, float]:
    """Pauli expectation values (tr Xr, tr Yr, tr Zr) of a ground-qubit block.

    For a sub-normalized block the vector length is bounded by the trace, not
    by one.
    """
    m = state.matrix
    x = np.trace(PAULI_X @ m)
    y = np.trace(PAULI_Y @ m)
    z = np.trace(PAULI_Z @ m)
    for name, v in (("x", x), ("y", y), ("z", z)):
        if abs(v.imag) > 1e-12:
            raise ValidationError(f"bloch_vector: {name} has imaginary part {v.imag}")
    return float(x.real), float(y.real), float(z.real)


def fidelity(state: GroundQubitState, target) -> float:
    """Fidelity of a (possibly sub-normalized) ground block against a pure target.

    Population missing from the block (1 - trace) is counted as fully mixed
    ground population, contributing (1 - trace)/2.  This matches how the echo
    experiment scores its states: losing half the population to the excited
    state caps the fidelity at 75% for a perfectly prepared dark superposition.
    """
    t = np.asarray(target, dtype=complex).reshape(2)
    norm = np.linalg.norm(t)
    if abs(norm - 1.0) > 1e-9:
        raise ValidationError(f"fidelity: target ket is not normalized (|t| = {norm})")
    tr = state.trace
    if tr <= 1e-15:
        raise ValidationError("fidelity: state has zero trace, fidelity undefined")
    overlap = float(np.real(t.conj() @ state.matrix @ t))
    return overlap + 0.5 * (1.0 - tr)


def trace_distance(a: GroundQubitState, b: GroundQubitState) -> float:
    """Half the trace norm of (a - b); requires equal traces."""
    if abs(a.trace - b.trace) > 1e-9:
        raise ValidationError(
            f"trace_distance: traces differ ({a.trace} vs {b.trace})"
        )
    diff = a.matrix - b.matrix
    return 0.5 * float(np.sum(np.linalg.svd(diff, compute_uv=False)))


def state_to_text(state) -> str:
    """Serialize a state matrix row-major as 're+imi' pairs, one row per line."""
    m = state.matrix if hasattr(state, "matrix") else np.asarray(state, dtype=complex)
    return "\n".join(_format_row(row) for row in m)


def _format_row(row) -> str:
    parts = []
    for v in row:
        re_part, im_part = float(v.real), float(v.imag)
        sign = "+" if im_part >= 0 else "-"
        parts.append(f"{re_part!r}{sign}{abs(im_part)!r}i")
    return " ".join(parts)


def state_from_text(text: str):
    """Parse the plain-text matrix format written by :func:`state_to_text`."""
    rows = []
    for line in text.strip().splitlines():
        row = []
        for token in line.split():
            if not token.endswith("i"):
                raise ValidationError(f"state_from_text: malformed entry {token!r}")
            body = token[:-1]
            # split at the sign of the imaginary part (skip a leading sign and
            # any exponent signs)
            idx = None
            for k in range(len(body) - 1, 0, -1):
                if body[k] in "+-" and body[k - 1] not in "eE":
                    idx = k
                    break
            if idx is None:
                raise ValidationError(f"state_from_text: malformed entry {token!r}")
            row.append(complex(float(body[:idx]), float(body[idx:])))
        rows.append(row)
    m = np.array(rows, dtype=complex)
    if m.shape == (3, 3):
        return DensityMatrix3(m)
    if m.shape == (2, 2):
        return GroundQubitState(m)
    raise ValidationError(f"state_from_text: unsupported matrix shape {m.shape}")
