"""Driven lambda-system model: rotating-frame Hamiltonian, bright/dark algebra,
and the dissipative right-hand side of the master equation.

Conventions (basis order |0>, |1>, |e>):

* Drive couplings enter as <e|H|k> = (rabi_k / 2) * exp(i * phase_k), so a
  resonant single-color pulse with rabi * duration = pi fully inverts that
  transition.  With equal Rabi frequencies the bright superposition couples
  sqrt(2) times more strongly and the dark one not at all.
* The one-photon detuning sits on |e>, the two-photon (spin) detuning is split
  symmetrically as +delta_spin/2 on |0> and -delta_spin/2 on |1>.  Shifting
  all three diagonal entries together is a pure change of the rotating-frame
  energy zero; ``frame_offset`` exposes that gauge explicitly.
* Dissipation is Lindblad-form: |e> decays to |0> and |1> with a branching
  fraction, plus pure dephasing of the optical transition and of the ground
  coherence.  Rates are calibrated so gamma_opt_deph and gamma_spin_deph are
  the coherence decay rates they name.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

KET0 = np.array([1.0, 0.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0, 0.0], dtype=complex)
KETE = np.array([0.0, 0.0, 1.0], dtype=complex)


@dataclass(frozen=True)
class LambdaParams:
    """All physical rates and detunings of one ensemble member.

    Angular frequencies and rates throughout: rabi0/rabi1 and the detunings in
    rad/s, decay/dephasing rates in 1/s.
    """

    rabi0: float = 0.0
    rabi1: float = 0.0
    phase0: float = 0.0
    phase1: float = 0.0
    delta_opt: float = 0.0
    delta_spin: float = 0.0
    gamma_opt_decay: float = 0.0
    gamma_opt_deph: float = 0.0
    gamma_spin_deph: float = 0.0
    branch0: float = 0.5
    frame_offset: float = 0.0

    def __post_init__(self):
        for name in ("rabi0", "rabi1", "gamma_opt_decay", "gamma_opt_deph",
                     "gamma_spin_deph"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0.0:
                raise ValidationError(f"LambdaParams.{name} must be >= 0, got {v}")
        if not 0.0 <= self.branch0 <= 1.0:
            raise ValidationError(f"LambdaParams.branch0 must be in [0, 1], got {self.branch0}")
        for name in ("phase0", "phase1", "delta_opt", "delta_spin", "frame_offset"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(f"LambdaParams.{name} must be finite")

    @property
    def gamma_opt_coherence(self) -> float:
        """Total optical coherence decay rate: decay/2 plus pure dephasing."""
        return 0.5 * self.gamma_opt_decay + self.gamma_opt_deph

    def replace(self, **kw) -> "LambdaParams":
        from dataclasses import replace as _replace
        return _replace(self, **kw)


@dataclass(frozen=True)
class BrightDarkBasis:
    """Unitary ground-manifold change of basis (|0>, |1>) -> (|B>, |D>).

    Columns are the bright and dark kets.  For an equal-amplitude, equal-phase
    drive they are (|0> + |1>)/sqrt(2) and (|0> - |1>)/sqrt(2).
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValidationError("BrightDarkBasis must be 2x2")
        if not np.allclose(m.conj().T @ m, np.eye(2), atol=1e-12):
            raise ValidationError("BrightDarkBasis is not unitary to 1e-12")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def bright(self) -> np.ndarray:
        return self.matrix[:, 0]

    @property
    def dark(self) -> np.ndarray:
        return self.matrix[:, 1]

    def bright3(self) -> np.ndarray:
        """Bright ket embedded in the three-level space."""
        return np.array([self.bright[0], self.bright[1], 0.0], dtype=complex)

    def dark3(self) -> np.ndarray:
        return np.array([self.dark[0], self.dark[1], 0.0], dtype=complex)


def _strip_global_phase(v: np.ndarray) -> np.ndarray:
    """Make the first non-negligible component real positive."""
    for c in v:
        if abs(c) > 1e-12:
            return v * (abs(c) / c)
    return v


def bright_dark_basis(p: LambdaParams) -> BrightDarkBasis:
    """Drive-adapted bright/dark basis for the given pulse amplitudes and phases.

    The bright ket maximizes the coupling to |e>, the dark ket is orthogonal
    and decoupled.  With no drive at all the balanced pair is returned.
    """
    v0 = 0.5 * p.rabi0 * np.exp(1j * p.phase0)
    v1 = 0.5 * p.rabi1 * np.exp(1j * p.phase1)
    norm = np.hypot(abs(v0), abs(v1))
    if norm < 1e-300:
        # no drive: fall back to the balanced pair
        bright = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
        dark = np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0)
    else:
        bright = np.array([np.conj(v0), np.conj(v1)], dtype=complex) / norm
        dark = np.array([v1, -v0], dtype=complex) / norm
    bright = _strip_global_phase(bright)
    dark = _strip_global_phase(dark)
    return BrightDarkBasis(np.column_stack([bright, dark]))


def hamiltonian(p: LambdaParams) -> np.ndarray:
    """Rotating-frame Hamiltonian (units hbar = 1, entries in rad/s)."""
    h = np.zeros((3, 3), dtype=complex)
    h[0, 0] = 0.5 * p.delta_spin + p.frame_offset
    h[1, 1] = -0.5 * p.delta_spin + p.frame_offset
    h[2, 2] = p.delta_opt + p.frame_offset
    h[2, 0] = 0.5 * p.rabi0 * np.exp(1j * p.phase0)
    h[2, 1] = 0.5 * p.rabi1 * np.exp(1j * p.phase1)
    h[0, 2] = np.conj(h[2, 0])
    h[1, 2] = np.conj(h[2, 1])
    return h


def coupling_strengths(p: LambdaParams) -> tuple[complex, complex]:
    """Matrix elements of the Hamiltonian from the balanced bright/dark kets to |e>.

    Returns (<e|H|B>, <e|H|D>) with |B/D> = (|0> +/- |1>)/sqrt(2); the
    equal-phase drive gives (sqrt(2) * rabi / 2, 0).
    """
    h = hamiltonian(p)
    bright = (KET0 + KET1) / np.sqrt(2.0)
    dark = (KET0 - KET1) / np.sqrt(2.0)
    return complex(KETE.conj() @ h @ bright), complex(KETE.conj() @ h @ dark)


def _jump_operators(p: LambdaParams) -> list[tuple[float, np.ndarray]]:
    ops = []
    if p.gamma_opt_decay > 0.0:
        if p.branch0 > 0.0:
            ops.append((p.branch0 * p.gamma_opt_decay, np.outer(KET0, KETE.conj())))
        if p.branch0 < 1.0:
            ops.append(((1.0 - p.branch0) * p.gamma_opt_decay, np.outer(KET1, KETE.conj())))
    if p.gamma_opt_deph > 0.0:
        # rate 2*gamma on the projector gives optical coherences decay at gamma
        ops.append((2.0 * p.gamma_opt_deph, np.outer(KETE, KETE.conj())))
    if p.gamma_spin_deph > 0.0:
        # rate gamma/2 on (P0 - P1) makes the 0-1 coherence decay at gamma
        sz = np.diag([1.0, -1.0, 0.0]).astype(complex)
        ops.append((0.5 * p.gamma_spin_deph, sz))
    return ops


def lindblad_rhs(rho: np.ndarray, p: LambdaParams) -> np.ndarray:
    """Right-hand side d(rho)/dt of the master equation, in 1/s.

    Traceless and Hermiticity-preserving by construction; the balanced dark
    state is an exact fixed point for a resonant equal-amplitude drive with
    all rates zero.
    """
    h = hamiltonian(p)
    drho = -1j * (h @ rho - rho @ h)
    for gamma, c in _jump_operators(p):
        cd = c.conj().T
        cdc = cd @ c
        drho += gamma * (c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc))
    return drho


def liouvillian(p: LambdaParams) -> np.ndarray:
    """The master equation as a 9x9 linear map on the flattened density matrix.

    Built by applying :func:`lindblad_rhs` to the nine matrix units, so it is
    the same map by construction; used by the propagator for speed.
    """
    sup = np.zeros((9, 9), dtype=complex)
    for j in range(9):
        basis = np.zeros((3, 3), dtype=complex)
        basis.flat[j] = 1.0
        sup[:, j] = lindblad_rhs(basis, p).reshape(9)
    return sup
