"""Raman beat synthesis, Fourier amplitude extraction, decay-curve assembly and
three-parameter exponential fitting with confidence intervals.

The rotating-frame simulation carries no hyperfine carrier, so the detected
beat is reconstructed by re-modulating the |1> -> |e> optical coherence at the
ground splitting; the heterodyne against the transmitted readout pulse then
shows up as a tone at that splitting whose amplitude tracks the stored spin
coherence.  Beat amplitudes are extracted by projecting the trace onto the
known beat frequency (single-bin Fourier sum); all amplitudes are relative
detector units.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats
from scipy.interpolate import CubicSpline

from .dynamics import Trajectory
from .ensemble import AveragedObservables, EnsembleSpec, ensemble_average
from .errors import FitFailureError, ValidationError
from .lambda_system import LambdaParams
from .sequences import EchoConfig, make_echo_sequence
from .units import float_repr

DETECTOR_SCALE = 1.0
MIN_SAMPLES_PER_PERIOD = 4.0
SAMPLES_PER_PERIOD = 8.0
MIN_PERIODS = 5.0

# Damped Gauss-Newton schedule for the decay fit.
FIT_MAX_ITERATIONS = 200
FIT_DAMPING_FACTOR = 10.0
FIT_RELATIVE_STEP_TOL = 1e-10


@dataclass(frozen=True)
class BeatTrace:
    """Uniformly sampled heterodyne signal at the hyperfine beat frequency."""

    times: np.ndarray
    signal: np.ndarray
    beat_frequency: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.signal, dtype=float)
        if t.ndim != 1 or t.shape != s.shape or t.size < 2:
            raise ValidationError("BeatTrace needs matching 1-d times and signal")
        dt = np.diff(t)
        if np.max(np.abs(dt - dt[0])) > 1e-6 * dt[0]:
            raise ValidationError("BeatTrace sampling must be uniform")
        if 1.0 / dt[0] < MIN_SAMPLES_PER_PERIOD * self.beat_frequency:
            raise ValidationError(
                f"BeatTrace sample rate {1.0 / dt[0]:.3g} Hz below "
                f"{MIN_SAMPLES_PER_PERIOD}x the beat frequency")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "signal", s)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("time_s,signal\n")
        for t, s in zip(self.times, self.signal):
            buf.write(f"{float_repr(t)},{float_repr(s)}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class DecayCurve:
    """Echo amplitude versus storage time."""

    taus: np.ndarray
    amplitudes: np.ndarray
    repeats: int = 1

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        amps = np.asarray(self.amplitudes, dtype=float)
        if taus.ndim != 1 or taus.shape != amps.shape:
            raise ValidationError("DecayCurve needs matching 1-d taus and amplitudes")
        if np.any(np.diff(taus) <= 0.0):
            raise ValidationError("DecayCurve taus must be strictly increasing")
        if np.any(amps < 0.0):
            raise ValidationError("DecayCurve amplitudes must be >= 0")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "amplitudes", amps)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("tau_s,amplitude\n")
        for t, a in zip(self.taus, self.amplitudes):
            buf.write(f"{float_repr(t)},{float_repr(a)}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class FitResult:
    """Parameters of A*exp(-tau/T2) + C with covariance and 95% intervals."""

    amplitude: float
    t2: float
    offset: float
    covariance: np.ndarray
    ci95: tuple[float, float, float]
    residual_rms: float
    iterations: int

    def __post_init__(self):
        if not self.t2 > 0.0:
            raise ValidationError(f"FitResult.t2 must be > 0, got {self.t2}")
        if any(c < 0.0 for c in self.ci95):
            raise ValidationError("FitResult.ci95 half-widths must be >= 0")

    def to_json(self) -> str:
        return json.dumps({
            "amplitude": self.amplitude,
            "t2_s": self.t2,
            "offset": self.offset,
            "ci95": {"amplitude": self.ci95[0], "t2_s": self.ci95[1],
                     "offset": self.ci95[2]},
            "covariance": [list(map(float, row)) for row in self.covariance],
            "residual_rms": self.residual_rms,
            "iterations": self.iterations,
        }, sort_keys=True)


def synthesize_beat(traj, beat_frequency: float, window_label: str = "readout") -> BeatTrace:
    """Heterodyne beat from the |1> -> |e> coherence over the readout window.

    Accepts a single-member Trajectory or ensemble AveragedObservables; the
    signal is Re[coh1e(t) * exp(i * 2 pi f t)] times a fixed detector scale,
    with t measured from the start of the readout pulse.  The trace is laid
    on the detector's own clock (8 samples per beat period) by spline
    resampling of the slowly varying rotating-frame coherence, so the
    reported amplitude does not depend on the integrator step.
    """
    start = traj.segment_start_index(window_label)
    if isinstance(traj, Trajectory):
        coh = traj.coherence1e()
    elif isinstance(traj, AveragedObservables):
        coh = traj.coherence1e
    else:
        raise ValidationError(f"synthesize_beat: unsupported trajectory type {type(traj)}")
    times = traj.times[start:]
    coh = coh[start:]
    if times.size < 4:
        raise ValidationError("synthesize_beat: readout window has too few samples")
    t_rel = times - times[0]
    dt_detector = 1.0 / (SAMPLES_PER_PERIOD * beat_frequency)
    n = int(np.floor(t_rel[-1] / dt_detector)) + 1
    grid = dt_detector * np.arange(n)
    spline = CubicSpline(t_rel, coh)
    signal = DETECTOR_SCALE * np.real(spline(grid) *
                                      np.exp(2j * np.pi * beat_frequency * grid))
    return BeatTrace(times=grid, signal=signal, beat_frequency=beat_frequency)


def beat_amplitude(trace: BeatTrace) -> float:
    """Magnitude of the single-bin Fourier projection at the beat frequency.

    Normalized by 2/N so a pure cosine of amplitude A over an integer number
    of periods returns A exactly.
    """
    duration = trace.times[-1] - trace.times[0]
    if duration * trace.beat_frequency < MIN_PERIODS:
        raise ValidationError(
            f"beat_amplitude: window of {duration * trace.beat_frequency:.2f} periods "
            f"is below the minimum of {MIN_PERIODS}")
    phases = np.exp(-2j * np.pi * trace.beat_frequency * trace.times)
    return float(2.0 / trace.times.size * abs(np.sum(trace.signal * phases)))


def echo_amplitude(cfg: EchoConfig, params: LambdaParams, spec: EnsembleSpec,
                   tau: float, mode: str = "beat", n_threads: int = 1) -> float:
    """One echo simulation reduced to a single amplitude.

    mode 'beat' runs the readout pulse and extracts the Fourier amplitude of
    the synthesized beat; mode 'proxy' skips the readout entirely and reports
    |<coh01>| at the moment the readout would start (fast path for sweeps;
    proportional to the beat amplitude because the readout map is linear in
    the stored coherence).
    """
    cfg_tau = replace(cfg, tau=tau)
    if mode == "proxy":
        seq = make_echo_sequence(cfg_tau, include_readout=False)
        avg = ensemble_average(seq, params, spec, n_threads=n_threads)
        return abs(complex(avg.coherence01[-1]))
    if mode != "beat":
        raise ValidationError(f"echo_amplitude: unknown mode {mode!r}")
    seq = make_echo_sequence(cfg_tau, include_readout=True)
    avg = ensemble_average(seq, params, spec, n_threads=n_threads)
    trace = synthesize_beat(avg, beat_frequency=cfg.splitting)
    return beat_amplitude(trace)


def assemble_decay_curve(cfg: EchoConfig, taus, params: LambdaParams,
                         spec: EnsembleSpec, mode: str = "beat",
                         n_threads: int = 1) -> DecayCurve:
    """One echo simulation plus amplitude extraction per storage time."""
    taus = np.asarray(list(taus), dtype=float)
    if taus.size < 3:
        raise ValidationError("assemble_decay_curve needs at least 3 storage times")
    amps = [echo_amplitude(cfg, params, spec, tau, mode=mode, n_threads=n_threads)
            for tau in taus]
    return DecayCurve(taus=taus, amplitudes=np.array(amps))


def _model(theta: np.ndarray, taus: np.ndarray) -> np.ndarray:
    a, t2, c = theta
    return a * np.exp(-taus / t2) + c


def _jacobian(theta: np.ndarray, taus: np.ndarray) -> np.ndarray:
    a, t2, c = theta
    e = np.exp(-taus / t2)
    j = np.empty((taus.size, 3))
    j[:, 0] = e
    j[:, 1] = a * e * taus / (t2 * t2)
    j[:, 2] = 1.0
    return j


def fit_decay(curve: DecayCurve) -> FitResult:
    """Least-squares fit of A*exp(-tau/T2) + C by damped Gauss-Newton.

    Start values: A = max - min, C = min, T2 = half the tau span.  The damping
    parameter moves by factors of 10 (Levenberg-Marquardt schedule), iteration
    stops when the relative step drops below 1e-10.  The covariance is
    (J^T J)^-1 scaled by the residual variance; 95% intervals use Student's t
    with n - 3 degrees of freedom.
    """
    taus = curve.taus
    y = curve.amplitudes
    n = taus.size
    if n < 5:
        raise FitFailureError(f"fit_decay needs at least 5 points, got {n}")
    if not np.all(np.isfinite(y)):
        raise FitFailureError("fit_decay: non-finite amplitudes")
    if np.ptp(y) == 0.0:
        raise FitFailureError("fit_decay: degenerate curve with zero variance")

    span = taus[-1] - taus[0]
    theta = np.array([y.max() - y.min(), 0.5 * span, y.min()])
    # scale floors keep the relative-step test meaningful for parameters that
    # converge to zero (typically the offset)
    scale = np.array([max(np.max(np.abs(y)), 1e-300), span,
                      max(np.max(np.abs(y)), 1e-300)])
    resid = y - _model(theta, taus)
    cost = float(resid @ resid)
    lam = 1e-3
    iterations = 0
    converged = False

    for iterations in range(1, FIT_MAX_ITERATIONS + 1):
        j = _jacobian(theta, taus)
        g = j.T @ resid
        h = j.T @ j
        stepped = False
        for _ in range(25):
            try:
                step = np.linalg.solve(h + lam * np.diag(np.diag(h)), g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None:
                trial = theta + step
                if trial[1] > 0.0:
                    trial_resid = y - _model(trial, taus)
                    trial_cost = float(trial_resid @ trial_resid)
                    if trial_cost <= cost:
                        rel_step = np.max(np.abs(step) / np.maximum(np.abs(theta), scale))
                        theta, resid, cost = trial, trial_resid, trial_cost
                        lam = max(lam / FIT_DAMPING_FACTOR, 1e-14)
                        stepped = True
                        if rel_step < FIT_RELATIVE_STEP_TOL:
                            converged = True
                        break
            lam *= FIT_DAMPING_FACTOR
            if lam > 1e14:
                break
        if converged:
            break
        if not stepped:
            # no downhill step found at any damping: treat as stationary
            converged = True
            break

    if not converged:
        raise FitFailureError(
            "fit_decay did not converge",
            diagnostics={"iterations": iterations, "theta": theta.tolist(), "cost": cost})
    if theta[1] <= 0.0 or not np.all(np.isfinite(theta)):
        raise FitFailureError("fit_decay converged to unphysical parameters",
                              diagnostics={"theta": theta.tolist()})

    j = _jacobian(theta, taus)
    dof = n - 3
    sigma2 = cost / dof if dof > 0 else float("nan")
    try:
        cov = sigma2 * np.linalg.inv(j.T @ j)
    except np.linalg.LinAlgError:
        raise FitFailureError("fit_decay: singular Jacobian at the optimum",
                              diagnostics={"theta": theta.tolist()})
    tval = float(stats.t.ppf(0.975, dof))
    ci = tuple(float(tval * math.sqrt(max(cov[i, i], 0.0))) for i in range(3))
    return FitResult(
        amplitude=float(theta[0]),
        t2=float(theta[1]),
        offset=float(theta[2]),
        covariance=cov,
        ci95=ci,
        residual_rms=float(math.sqrt(cost / n)),
        iterations=iterations,
    )
