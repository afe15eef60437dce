"""Inhomogeneous averaging over optical and spin detunings.

The ensemble is a deterministic tensor grid: Gaussian midpoint-rule nodes over
+/- 3 sigma on each detuning axis, optionally multiplied by discrete Zeeman
branches.  Averages are weighted sums in a fixed grid order, so results do not
depend on how the member simulations were scheduled; the optional thread pool
only parallelizes the member propagations.

Zeeman branch offsets are kept separate from the static spin detunings: a
static member detuning is refocused by the echo, while a branch offset flips
sign at the rephasing pulse (sublevel exchange through |e>) and therefore
beats instead of refocusing.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import SequenceSpec, Trajectory, Wait, _segment_params, default_step, run_sequence
from .errors import ValidationError
from .lambda_system import LambdaParams
from .qstate import DensityMatrix3
from .units import float_repr

TWO_PI = 2.0 * math.pi
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
GRID_HALF_WIDTH_SIGMAS = 3.0


@dataclass(frozen=True)
class EnsembleSpec:
    """Gaussian inhomogeneous widths (FWHM, Hz), grid sizes and Zeeman branches.

    Grid sizes must be odd so the resonant member is always represented.
    Branches are (offset_hz, weight) pairs added to the spin detuning.
    """

    optical_fwhm: float = 0.0
    spin_fwhm: float = 0.0
    n_optical: int = 1
    n_spin: int = 1
    zeeman_branches: tuple = ()

    def __post_init__(self):
        if self.optical_fwhm < 0.0 or self.spin_fwhm < 0.0:
            raise ValidationError("EnsembleSpec FWHMs must be >= 0")
        for name in ("n_optical", "n_spin"):
            n = getattr(self, name)
            if n < 1 or n % 2 == 0:
                raise ValidationError(f"EnsembleSpec.{name} must be odd and >= 1, got {n}")
        branches = tuple((float(o), float(w)) for o, w in self.zeeman_branches)
        if branches:
            weights = [w for _, w in branches]
            if any(w < 0.0 for w in weights):
                raise ValidationError("EnsembleSpec branch weights must be >= 0")
            if abs(sum(weights) - 1.0) > 1e-9:
                raise ValidationError(
                    f"EnsembleSpec branch weights must sum to 1, got {sum(weights)}")
        object.__setattr__(self, "zeeman_branches", branches)


def _axis_nodes(fwhm_hz: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint-rule nodes (rad/s) and normalized weights over +/- 3 sigma."""
    if n == 1 or fwhm_hz == 0.0:
        return np.array([0.0]), np.array([1.0])
    sigma = TWO_PI * fwhm_hz * FWHM_TO_SIGMA
    half = GRID_HALF_WIDTH_SIGMAS * sigma
    edges = np.linspace(-half, half, n + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    w = np.exp(-0.5 * (centers / sigma) ** 2)
    w /= w.sum()
    return centers, w


@dataclass(frozen=True)
class EnsembleMember:
    delta_opt: float          # rad/s, added to the base optical detuning
    delta_spin: float         # rad/s, static (refocusable) spin offset
    zeeman_offset: float      # rad/s, branch offset (sign flips at rephasing)
    weight: float


def member_grid(spec: EnsembleSpec) -> list[EnsembleMember]:
    """Deterministic member list; ordering is (optical, spin, branch), row-major."""
    d_opt, w_opt = _axis_nodes(spec.optical_fwhm, spec.n_optical)
    d_spin, w_spin = _axis_nodes(spec.spin_fwhm, spec.n_spin)
    branches = spec.zeeman_branches or ((0.0, 1.0),)
    members = []
    for do, wo in zip(d_opt, w_opt):
        for ds, ws in zip(d_spin, w_spin):
            for off_hz, wb in branches:
                members.append(EnsembleMember(
                    delta_opt=float(do),
                    delta_spin=float(ds),
                    zeeman_offset=TWO_PI * off_hz,
                    weight=float(wo * ws * wb),
                ))
    return members


def detuning_grid(spec: EnsembleSpec) -> list[tuple[float, float, float]]:
    """(delta_opt, delta_spin, weight) triples in rad/s, branch offsets folded in.

    Weights sum to one by construction.
    """
    return [(m.delta_opt, m.delta_spin + m.zeeman_offset, m.weight)
            for m in member_grid(spec)]


@dataclass
class AveragedObservables:
    """Weight-summed per-time observables of an ensemble run."""

    times: np.ndarray
    populations: np.ndarray      # (n, 3) real
    coherence01: np.ndarray      # (n,) complex
    coherence0e: np.ndarray
    coherence1e: np.ndarray
    final_state: DensityMatrix3
    segment_starts: list

    def segment_start_index(self, label: str) -> int:
        for idx, seg in self.segment_starts:
            if getattr(seg, "label", None) == label:
                return idx
        raise ValidationError(f"averaged trajectory has no segment labeled {label!r}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("time_s,pop0,pop1,pope,re_coh01,im_coh01,re_coh0e,im_coh0e,"
                  "re_coh1e,im_coh1e\n")
        for i, t in enumerate(self.times):
            cells = [t, self.populations[i, 0], self.populations[i, 1],
                     self.populations[i, 2],
                     self.coherence01[i].real, self.coherence01[i].imag,
                     self.coherence0e[i].real, self.coherence0e[i].imag,
                     self.coherence1e[i].real, self.coherence1e[i].imag]
            buf.write(",".join(float_repr(v) for v in cells) + "\n")
        return buf.getvalue()

    def bloch_path_csv(self) -> str:
        buf = io.StringIO()
        buf.write("time_s,x,y,z\n")
        x = 2.0 * np.real(self.coherence01)
        y = -2.0 * np.imag(self.coherence01)
        z = self.populations[:, 0] - self.populations[:, 1]
        for i, t in enumerate(self.times):
            buf.write(",".join(float_repr(v) for v in (t, x[i], y[i], z[i])) + "\n")
        return buf.getvalue()


def _envelope_params(base: LambdaParams, members: list[EnsembleMember]) -> LambdaParams:
    """Parameters whose frequencies bound every member, for a shared time grid."""
    max_opt = max(abs(base.delta_opt + m.delta_opt) for m in members)
    max_spin = max(abs(base.delta_spin) + abs(m.delta_spin) + abs(m.zeeman_offset)
                   for m in members)
    return base.replace(delta_opt=max_opt, delta_spin=max_spin)


def _shared_steps(seq: SequenceSpec, base: LambdaParams,
                  members: list[EnsembleMember]) -> list[float]:
    env = _envelope_params(base, members)
    steps = []
    for seg in seq.segments:
        # member offsets are already folded into the envelope's delta_spin
        pseg = _segment_params(env, seg, 0.0)
        steps.append(default_step(pseg, seg))
    return steps


def _member_params(base: LambdaParams, m: EnsembleMember) -> LambdaParams:
    return base.replace(delta_opt=base.delta_opt + m.delta_opt,
                        delta_spin=base.delta_spin + m.delta_spin)


def ensemble_average(seq: SequenceSpec, base: LambdaParams, spec: EnsembleSpec,
                     rho0: DensityMatrix3 | None = None,
                     n_threads: int = 1) -> AveragedObservables:
    """Run the sequence for every grid member and weight-sum the observables.

    The reduction runs in fixed grid order regardless of `n_threads`, so
    single- and multi-threaded runs are bitwise identical.
    """
    if rho0 is None:
        rho0 = DensityMatrix3(np.diag([0.5, 0.5, 0.0]).astype(complex))
    members = member_grid(spec)
    dt_overrides = _shared_steps(seq, base, members)

    def simulate(m: EnsembleMember) -> Trajectory:
        return run_sequence(rho0, _member_params(base, m), seq,
                            zeeman_offset=m.zeeman_offset,
                            dt_overrides=dt_overrides)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            trajectories = list(pool.map(simulate, members))
    else:
        trajectories = [simulate(m) for m in members]

    first = trajectories[0]
    times = first.times
    pops = np.zeros((len(times), 3))
    c01 = np.zeros(len(times), dtype=complex)
    c0e = np.zeros(len(times), dtype=complex)
    c1e = np.zeros(len(times), dtype=complex)
    final = np.zeros((3, 3), dtype=complex)
    for m, traj in zip(members, trajectories):
        if traj.times.shape != times.shape:
            raise ValidationError("ensemble members produced mismatched time grids")
        pops += m.weight * traj.populations()
        c01 += m.weight * traj.coherence01()
        c0e += m.weight * traj.coherence0e()
        c1e += m.weight * traj.coherence1e()
        final += m.weight * traj.states[-1]

    return AveragedObservables(
        times=times,
        populations=pops,
        coherence01=c01,
        coherence0e=c0e,
        coherence1e=c1e,
        final_state=DensityMatrix3(final),
        segment_starts=first.segment_starts,
    )
