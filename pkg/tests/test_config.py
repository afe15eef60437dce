"""Unit parsing and config validation: every error reported, unknown keys rejected."""

import math

import numpy as np
import pytest

from eitecho.config import DEFAULT_CONFIG_TEXT, parse_config, validate_config
from eitecho.errors import ConfigurationError
from eitecho.units import parse_quantity, parse_ratio


class TestUnits:
    def test_times(self):
        assert parse_quantity("2us", "time") == pytest.approx(2e-6)
        assert parse_quantity("500ns", "time") == pytest.approx(500e-9)
        assert parse_quantity("1.5ms", "time") == pytest.approx(1.5e-3)

    def test_frequencies(self):
        assert parse_quantity("170kHz", "frequency") == pytest.approx(170e3)
        assert parse_quantity("10.2MHz", "frequency") == pytest.approx(10.2e6)

    def test_fields_including_micro_sign(self):
        assert parse_quantity("50uT", "field") == pytest.approx(50e-6)
        assert parse_quantity("50µT", "field") == pytest.approx(50e-6)

    def test_angles(self):
        assert parse_quantity("90deg", "angle") == pytest.approx(math.pi / 2)
        assert parse_quantity("1.2rad", "angle") == pytest.approx(1.2)

    def test_bare_number_rejected_for_dimensioned(self):
        with pytest.raises(ValueError, match="unit suffix"):
            parse_quantity(2e-6, "time")

    def test_wrong_unit_rejected(self):
        with pytest.raises(ValueError):
            parse_quantity("2us", "frequency")

    def test_g_factor_ratio(self):
        assert parse_ratio("12kHz/100uT", "frequency", "field") == pytest.approx(1.2e8)


class TestValidation:
    def test_default_config_parses(self):
        cfg = parse_config(DEFAULT_CONFIG_TEXT)
        assert cfg.sequence.tau == pytest.approx(60e-6)
        assert cfg.physics.gamma_opt_decay == pytest.approx(1.0 / 164e-6)
        assert cfg.ensemble.optical_fwhm == pytest.approx(170e3)

    def test_missing_tau_named(self):
        _, errors = validate_config({"sequence": {"t_init": "2us"}})
        assert any("sequence.tau" in e for e in errors)

    def test_missing_spin_fwhm_for_ensemble_run(self):
        tree = {"sequence": {"tau": "60us"}, "ensemble": {"n_spin": 5}}
        _, errors = validate_config(tree)
        assert any("spin_fwhm" in e for e in errors)

    def test_spin_fwhm_not_required_for_single_member(self):
        cfg, errors = validate_config({"sequence": {"tau": "60us"}})
        assert errors == []
        assert cfg.ensemble.spin_fwhm == 0.0

    def test_unknown_key_rejected_with_path(self):
        tree = {"sequence": {"tau": "60us", "t_int": "2us"}}
        _, errors = validate_config(tree)
        assert any("unknown key sequence.t_int" in e for e in errors)

    def test_negative_rate_flagged_with_path(self):
        tree = {"sequence": {"tau": "60us"}, "physics": {"t2_spin": "-5us"}}
        _, errors = validate_config(tree)
        assert any("physics.t2_spin" in e for e in errors)

    def test_all_errors_reported_at_once(self):
        tree = {
            "sequence": {"t_init": "2"},          # missing tau + bare number
            "physics": {"t1_opt": "-1us"},
            "ensemble": {"n_optical": 4},
            "bogus": {},
        }
        _, errors = validate_config(tree)
        assert len(errors) >= 4
        joined = "\n".join(errors)
        for needle in ("sequence.tau", "sequence.t_init", "physics.t1_opt",
                       "n_optical", "unknown key bogus"):
            assert needle in joined

    def test_parse_config_raises_with_all_problems(self):
        with pytest.raises(ConfigurationError) as exc:
            parse_config("sequence: {tau: 60us, nonsense: 1}\nalso_bad: {}")
        assert len(exc.value.problems) == 2

    def test_sweep_range_and_lists(self):
        tree = {
            "sequence": {"tau": "60us"},
            "studies": {
                "field_sweep": {"fields": ["0uT", "25uT", "50uT"],
                                "taus": {"min": "10us", "max": "100us", "n": 10}},
            },
        }
        cfg, errors = validate_config(tree)
        assert errors == []
        assert np.allclose(cfg.field_sweep.fields, [0.0, 25e-6, 50e-6])
        assert cfg.field_sweep.taus.size == 10

    def test_t2_opt_cannot_beat_lifetime_limit(self):
        tree = {"sequence": {"tau": "60us"},
                "physics": {"t1_opt": "100us", "t2_opt": "300us"}}
        _, errors = validate_config(tree)
        assert any("2*T1" in e for e in errors)

    def test_excitation_induced_dephasing_adds_to_spin_rate(self):
        tree = {"sequence": {"tau": "60us"},
                "physics": {"t2_spin": "500us", "excitation_spin_deph": "1kHz"}}
        cfg, errors = validate_config(tree)
        assert errors == []
        assert cfg.physics.gamma_spin_deph == pytest.approx(1.0 / 500e-6 + 1e3)

    def test_zeeman_branch_block(self):
        tree = {"sequence": {"tau": "60us"},
                "ensemble": {"zeeman_branches": [
                    {"offset": "-3kHz", "weight": 0.5},
                    {"offset": "3kHz", "weight": 0.5}]}}
        cfg, errors = validate_config(tree)
        assert errors == []
        assert cfg.ensemble.zeeman_branches == ((-3e3, 0.5), (3e3, 0.5))
