"""Builders for the named EIT pulses and the full spin-echo sequence.

Phase conventions.  The initialization pulse drives both ground-to-excited
transitions with equal Rabi amplitude; its relative phase (put on the |0>
color) sets the azimuth of the created dark superposition: offset 0 leaves the
ground block on the -x axis, offset pi/2 on -y, and generally the prepared
Bloch vector rotates with the offset.

The rephasing pulse must rotate the ground qubit around the prepared state's
own axis so that the stored coherence is preserved while accumulated
spin-detuning phases are conjugated.  A bichromatic pulse rotates the ground
manifold about its own bright/dark axis, and the init pulse leaves the state
*on* that axis, so the rephasing pulse reuses the init pulse's relative phase
(shifting the relative phase by 90 degrees would move the rotation axis to the
equatorial normal of the stored state and flip it instead).  Its nominal
optical area is 2*pi on the bright-enhanced transition so any amplitude sent
to |e> returns to the ground manifold.

Pulse areas are defined on the bright-enhanced coupling by default: a
bichromatic pulse of per-color Rabi frequency `rabi` drives the bright
superposition at sqrt(2)*rabi, so area pi means sqrt(2)*rabi*duration = pi.
The `calibration` switch selects the bare single-color convention instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .dynamics import PulseSpec, SequenceSpec, Wait
from .errors import ConfigurationError, ValidationError

SQRT2 = math.sqrt(2.0)

# Pr hyperfine ground splitting addressed by the bichromatic drive.
DEFAULT_SPLITTING_HZ = 10.2e6


@dataclass(frozen=True)
class EchoConfig:
    """Declarative description of one spin-echo run.

    tau is the storage time: the readout pulse starts at t = tau, the
    rephasing pulse is centered at tau/2, and the init pulse starts at t = 0.
    Durations are the rectangular pulse lengths; the bichromatic pulse Rabi
    amplitudes follow from the requested areas, while `readout_rabi` sets the
    single-color readout drive directly (default: the init pulse amplitude).
    """

    tau: float
    t_init: float = 2e-6
    t_rephase: float = 2e-6
    t_readout: float = 2e-6
    readout_rabi: float | None = None
    splitting: float = DEFAULT_SPLITTING_HZ
    init_phase_offset: float = 0.0
    init_area: float = math.pi
    rephase_area: float = 2.0 * math.pi
    calibration: str = "bright"

    def __post_init__(self):
        problems = []
        for name in ("t_init", "t_rephase", "t_readout"):
            if not getattr(self, name) > 0.0:
                problems.append(f"EchoConfig.{name} must be > 0")
        if self.calibration not in ("bright", "bare"):
            problems.append("EchoConfig.calibration must be 'bright' or 'bare'")
        if not self.splitting > 0.0:
            problems.append("EchoConfig.splitting must be > 0")
        if self.init_area <= 0.0 or self.rephase_area <= 0.0:
            problems.append("EchoConfig pulse areas must be > 0")
        if not self.tau > self.t_init + self.t_rephase + self.t_readout:
            problems.append(
                f"EchoConfig.tau ({self.tau}) must exceed the summed pulse durations")
        if self.tau < 2.0 * self.t_init + self.t_rephase:
            problems.append(
                f"EchoConfig.tau ({self.tau}) too small to center the rephasing pulse "
                f"at tau/2 after a {self.t_init} init pulse")
        if problems:
            raise ConfigurationError(problems)

    @property
    def enhancement(self) -> float:
        return SQRT2 if self.calibration == "bright" else 1.0

    @property
    def init_rabi(self) -> float:
        """Per-color Rabi amplitude giving the requested init area."""
        return self.init_area / (self.enhancement * self.t_init)

    @property
    def rephase_rabi(self) -> float:
        return self.rephase_area / (self.enhancement * self.t_rephase)


def make_init_pulse(cfg: EchoConfig) -> PulseSpec:
    """Bichromatic pulse creating the dark superposition from a mixed state.

    Equal Rabi components; the relative phase offset sits on the |0> color and
    steers the prepared state's Bloch azimuth.
    """
    return PulseSpec(
        duration=cfg.t_init,
        rabi0=cfg.init_rabi,
        rabi1=cfg.init_rabi,
        phase0=cfg.init_phase_offset,
        phase1=0.0,
        label="init_pi_half",
    )


def make_rephase_pulse(cfg: EchoConfig) -> PulseSpec:
    """Bichromatic spin-rephasing pulse (rotation about the stored state's axis).

    Same relative phase as the init pulse so the bright/dark axis coincides
    with the prepared state; nominal area 2*pi on the bright transition so the
    transiently excited amplitude returns to the ground manifold.
    """
    return PulseSpec(
        duration=cfg.t_rephase,
        rabi0=cfg.rephase_rabi,
        rabi1=cfg.rephase_rabi,
        phase0=cfg.init_phase_offset,
        phase1=0.0,
        label="rephase_pi",
    )


def make_readout_pulse(cfg: EchoConfig) -> PulseSpec:
    """Single-color readout pulse on |0> -> |e> only.

    Stored ground coherence turns into |1> -> |e> optical coherence during
    this pulse; the heterodyne beat against the transmitted pulse is built in
    the readout module.  The readout window must resolve that beat, so the
    integrator step is capped well below the beat period here.
    """
    rabi = cfg.readout_rabi if cfg.readout_rabi is not None else cfg.init_rabi
    return PulseSpec(
        duration=cfg.t_readout,
        rabi0=rabi,
        rabi1=0.0,
        phase0=0.0,
        phase1=0.0,
        label="readout",
        max_dt=1.0 / (8.0 * cfg.splitting),
    )


def make_echo_sequence(cfg: EchoConfig, include_rephase: bool = True,
                       include_readout: bool = True) -> SequenceSpec:
    """Full echo layout: init at 0, rephase centered at tau/2, readout from tau.

    The rephasing pulse is emitted as two half-duration segments; the second
    half carries zeeman_sign = -1, flipping any Zeeman branch offset from the
    pulse center onward (branch exchange through |e>).  With the rephasing
    pulse omitted the layout degenerates to a free-induction-decay control and
    the sign never flips.
    """
    init = make_init_pulse(cfg)
    segments: list = [init]
    if include_rephase:
        reph = make_rephase_pulse(cfg)
        wait1 = cfg.tau / 2.0 - cfg.t_rephase / 2.0 - cfg.t_init
        wait2 = cfg.tau / 2.0 - cfg.t_rephase / 2.0
        if wait1 <= 0.0 or wait2 <= 0.0:
            raise ConfigurationError(
                [f"tau {cfg.tau} leaves no room for waits around the rephasing pulse"])
        half = cfg.t_rephase / 2.0
        segments.append(Wait(duration=wait1))
        segments.append(PulseSpec(duration=half, rabi0=reph.rabi0, rabi1=reph.rabi1,
                                  phase0=reph.phase0, phase1=reph.phase1,
                                  label="rephase_pi", zeeman_sign=1.0))
        segments.append(PulseSpec(duration=half, rabi0=reph.rabi0, rabi1=reph.rabi1,
                                  phase0=reph.phase0, phase1=reph.phase1,
                                  label="rephase_pi", zeeman_sign=-1.0))
        segments.append(Wait(duration=wait2, zeeman_sign=-1.0))
    else:
        if cfg.tau <= cfg.t_init:
            raise ConfigurationError([f"tau {cfg.tau} shorter than the init pulse"])
        segments.append(Wait(duration=cfg.tau - cfg.t_init))
    if include_readout:
        ro = make_readout_pulse(cfg)
        sign = -1.0 if include_rephase else 1.0
        segments.append(PulseSpec(duration=ro.duration, rabi0=ro.rabi0, rabi1=ro.rabi1,
                                  phase0=ro.phase0, phase1=ro.phase1, label="readout",
                                  zeeman_sign=sign, max_dt=ro.max_dt))
    return SequenceSpec(segments=tuple(segments))
