"""Detuning grids, weighted averaging, refocusing, and parallel determinism."""

import numpy as np
import pytest

from eitecho.dynamics import run_sequence
from eitecho.ensemble import (
    EnsembleSpec,
    detuning_grid,
    ensemble_average,
    member_grid,
)
from eitecho.errors import ValidationError
from eitecho.lambda_system import LambdaParams
from eitecho.qstate import DensityMatrix3
from eitecho.sequences import EchoConfig, make_echo_sequence, make_init_pulse
from eitecho.dynamics import SequenceSpec, Wait

MIXED = DensityMatrix3(np.diag([0.5, 0.5, 0.0]).astype(complex))
TWO_PI = 2.0 * np.pi


class TestSpecValidation:
    def test_grid_sizes_must_be_odd(self):
        with pytest.raises(ValidationError, match="odd"):
            EnsembleSpec(n_optical=4)

    def test_branch_weights_must_sum_to_one(self):
        with pytest.raises(ValidationError, match="sum to 1"):
            EnsembleSpec(zeeman_branches=((1e3, 0.4), (-1e3, 0.4)))


class TestDetuningGrid:
    def test_single_member(self):
        grid = detuning_grid(EnsembleSpec())
        assert grid == [(0.0, 0.0, 1.0)]

    def test_symmetric_weights_sum_to_one(self):
        spec = EnsembleSpec(optical_fwhm=170e3, n_optical=41)
        grid = detuning_grid(spec)
        weights = np.array([w for _, _, w in grid])
        detunings = np.array([d for d, _, _ in grid])
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(weights, weights[::-1])
        assert np.allclose(detunings, -detunings[::-1])
        assert detunings[len(grid) // 2] == 0.0

    def test_branches_duplicate_every_point(self):
        spec = EnsembleSpec(spin_fwhm=10e3, n_spin=5,
                            zeeman_branches=((-3e3, 0.5), (3e3, 0.5)))
        grid = detuning_grid(spec)
        assert len(grid) == 10
        spins = sorted(s for _, s, _ in grid)
        # every static node appears shifted by +-2pi*3kHz
        base = sorted(s for _, s, _ in detuning_grid(
            EnsembleSpec(spin_fwhm=10e3, n_spin=5)))
        expected = sorted([s + sign * TWO_PI * 3e3 for s in base for sign in (-1, 1)])
        assert np.allclose(spins, expected)

    def test_gaussian_weighting_matches_pdf(self):
        spec = EnsembleSpec(spin_fwhm=50e3, n_spin=101)
        members = member_grid(spec)
        sigma = TWO_PI * 50e3 / (2.0 * np.sqrt(2.0 * np.log(2.0)))
        d = np.array([m.delta_spin for m in members])
        w = np.array([m.weight for m in members])
        ref = np.exp(-0.5 * (d / sigma) ** 2)
        ref /= ref.sum()
        assert np.allclose(w, ref, atol=1e-15)


class TestAveraging:
    def test_single_member_matches_run_sequence(self):
        cfg = EchoConfig(tau=20e-6)
        seq = make_echo_sequence(cfg, include_readout=False)
        p = LambdaParams(delta_spin=TWO_PI * 2e3)
        avg = ensemble_average(seq, p, EnsembleSpec())
        direct = run_sequence(MIXED, p, seq)
        assert np.allclose(avg.final_state.matrix, direct.final_state.matrix,
                           atol=1e-12)

    def test_free_induction_decay_timescale(self):
        # Gaussian spread of width sigma dephases as exp(-(sigma t)^2 / 2), so
        # the magnitude halves at t = sqrt(2 ln 2) / sigma; compare the
        # simulated half-decay time with that closed form
        fwhm = 40e3
        spec = EnsembleSpec(spin_fwhm=fwhm, n_spin=81)
        cfg = EchoConfig(tau=60e-6, t_init=0.5e-6, t_rephase=0.5e-6, t_readout=0.5e-6)
        seq = SequenceSpec(segments=(make_init_pulse(cfg), Wait(duration=25e-6)))
        avg = ensemble_average(seq, LambdaParams(), spec)
        mags = np.abs(avg.coherence01)
        i0 = [i for i, _ in avg.segment_starts][1]
        c0 = mags[i0]
        below = np.where(mags[i0:] <= 0.5 * c0)[0]
        t_half = avg.times[i0 + below[0]] - avg.times[i0]
        sigma = TWO_PI * fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
        assert t_half == pytest.approx(np.sqrt(2.0 * np.log(2.0)) / sigma, rel=0.05)
        # and the tail is truly gone a few widths later
        assert mags[-1] < 0.12 * c0

    def test_echo_refocuses_spin_inhomogeneity(self):
        spec = EnsembleSpec(spin_fwhm=60e3, n_spin=61)
        cfg = EchoConfig(tau=60e-6, t_init=0.25e-6, t_rephase=0.25e-6,
                         t_readout=0.25e-6)
        seq = make_echo_sequence(cfg, include_readout=False)
        avg = ensemble_average(seq, LambdaParams(), spec)
        i0 = [i for i, _ in avg.segment_starts][1]
        post_init = abs(avg.coherence01[i0])
        echo = abs(avg.coherence01[-1])
        assert echo >= 0.95 * post_init
        # without the rephasing pulse the coherence is gone at tau
        fid = make_echo_sequence(cfg, include_rephase=False, include_readout=False)
        avg_fid = ensemble_average(fid, LambdaParams(), spec)
        assert abs(avg_fid.coherence01[-1]) <= 0.1 * post_init

    def test_parallel_runs_bitwise_identical(self):
        spec = EnsembleSpec(spin_fwhm=30e3, n_spin=11, optical_fwhm=100e3,
                            n_optical=3)
        cfg = EchoConfig(tau=20e-6)
        seq = make_echo_sequence(cfg, include_readout=False)
        p = LambdaParams(gamma_spin_deph=1e3)
        a = ensemble_average(seq, p, spec, n_threads=1)
        b = ensemble_average(seq, p, spec, n_threads=4)
        assert np.array_equal(a.coherence01, b.coherence01)
        assert np.array_equal(a.populations, b.populations)
        assert np.array_equal(a.final_state.matrix, b.final_state.matrix)
