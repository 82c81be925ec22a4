"""Config resolution, CLI subcommands, reproducibility, exit codes."""
import json

import pytest
from scipy.stats import linregress

from fso_qkd.cli import cmd_coexist, cmd_plan_spectrum, cmd_stability, cmd_sweep_el, main
from fso_qkd.errors import ValidationError
from fso_qkd.scenario import default_flat_config, resolve_config


class TestConfigResolution:
    def test_defaults_reproduce_baseline(self):
        cfg = resolve_config()
        assert cfg.source.wavelength_nm == 1410.0
        assert cfg.channel.fso_loss_db == 17.8
        assert cfg.background.dark_rate == cfg.detector.dark_rate
        assert cfg.background.solar_rate == pytest.approx(4.76, abs=0.2)

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError, match="unknown config key"):
            resolve_config({"channel.mistyped": 1.0})

    def test_error_carries_field_path(self):
        with pytest.raises(ValidationError, match="channel"):
            resolve_config({"channel.excess_loss_db": -3.0})
        with pytest.raises(ValidationError, match="detector"):
            resolve_config({"detector.gate_fraction": 0.0})

    def test_type_errors_rejected(self):
        with pytest.raises(ValidationError, match="expected float"):
            resolve_config({"source.mu_q": "lots"})
        with pytest.raises(ValidationError, match="expected int"):
            resolve_config({"session.blocks": 2.5})

    def test_fiber_presets_apply(self):
        cfg = resolve_config({"channel.fiber_kind": "OM4"})
        assert cfg.channel.fso_loss_db == 7.0
        assert cfg.channel.depol_p > 0.2
        cfg = resolve_config({"channel.fiber_kind": "SMF"})
        assert not cfg.channel.alignment_stable

    def test_explicit_background_mode(self):
        cfg = resolve_config({"background.mode": "explicit",
                              "background.solar_rate": 123.0})
        assert cfg.background.solar_rate == 123.0

    def test_off_grid_wavelength_needs_explicit_background(self):
        with pytest.raises(ValidationError, match="not a CWDM channel"):
            resolve_config({"source.wavelength_nm": 1550.0})
        cfg = resolve_config({"source.wavelength_nm": 1550.0,
                              "background.mode": "explicit",
                              "background.solar_rate": 10.0})
        assert cfg.source.wavelength_nm == 1550.0

    def test_intrinsic_error_channel_offsets(self):
        base = resolve_config().intrinsic_error
        same = resolve_config({"source.wavelength_nm": 1390.0}).intrinsic_error
        elevated = resolve_config({"source.wavelength_nm": 1430.0}).intrinsic_error
        assert same == base
        assert elevated > base

    def test_config_hash_stable_and_sensitive(self):
        a = resolve_config()
        b = resolve_config()
        c = resolve_config({"rng_seed": 999})
        assert a.config_hash == b.config_hash
        assert a.config_hash != c.config_hash

    def test_every_default_key_resolves(self):
        cfg = resolve_config()
        assert set(cfg.resolved) == set(default_flat_config())
        # None survives only where it means "packaged default"
        unresolved = {k for k, v in cfg.resolved.items() if v is None}
        assert unresolved == {"background.spectrum_path"}


def small_sweep_overrides(**extra):
    base = {
        "sweep.el_db": [0.0, 4.0, 8.0],
        "sweep.symbols_per_point": 2_000_000,
        "session.blocks": 4,
        "session.symbols_per_block": 100_000_000,
    }
    base.update(extra)
    return base


class TestCliCommands:
    def test_sweep_csv_and_summary(self, tmp_path):
        cfg = resolve_config(small_sweep_overrides())
        summary = cmd_sweep_el(cfg, tmp_path)
        lines = (tmp_path / "sweep_el.csv").read_text().splitlines()
        assert lines[0] == ("el_db,qber_model,qber_mc,rawkey_model,rawkey_mc,"
                            "secure_fraction,config_hash")
        assert len(lines) == 4
        assert all(line.endswith(cfg.config_hash) for line in lines[1:])
        assert summary["agreement"]["within_3_sigma"]

    def test_sweep_rerun_byte_identical(self, tmp_path):
        cfg = resolve_config(small_sweep_overrides())
        cmd_sweep_el(cfg, tmp_path / "a")
        cmd_sweep_el(cfg, tmp_path / "b")
        assert (tmp_path / "a/sweep_el.csv").read_bytes() == \
               (tmp_path / "b/sweep_el.csv").read_bytes()
        assert (tmp_path / "a/sweep_el_summary.json").read_bytes() == \
               (tmp_path / "b/sweep_el_summary.json").read_bytes()

    def test_sweep_workers_do_not_change_output(self, tmp_path):
        cfg = resolve_config(small_sweep_overrides())
        cmd_sweep_el(cfg, tmp_path / "w1", workers=1)
        cmd_sweep_el(cfg, tmp_path / "w2", workers=2)
        assert (tmp_path / "w1/sweep_el.csv").read_bytes() == \
               (tmp_path / "w2/sweep_el.csv").read_bytes()

    def test_stability_blocks(self, tmp_path):
        cfg = resolve_config(small_sweep_overrides(**{
            "channel.excess_loss_db": 1.6,
            "session.symbols_per_block": 500_000_000}))
        summary = cmd_stability(cfg, tmp_path)
        rows = (tmp_path / "stability_blocks.csv").read_text().splitlines()[1:]
        assert len(rows) == 4
        assert summary["all_blocks_below_threshold"]

    def test_stability_without_drift_has_no_trend(self, tmp_path):
        cfg = resolve_config({
            "channel.drift_rate": 0.0,
            "session.blocks": 10,
            "session.symbols_per_block": 500_000_000,
        })
        cmd_stability(cfg, tmp_path)
        rows = (tmp_path / "stability_blocks.csv").read_text().splitlines()[1:]
        starts = [float(r.split(",")[0]) for r in rows]
        qbers = [float(r.split(",")[1]) for r in rows]
        fit = linregress(starts, qbers)
        assert fit.pvalue > 0.01  # 99% CI on the slope contains zero

    def test_coexist_summary(self, tmp_path):
        cfg = resolve_config(small_sweep_overrides(**{
            "classical.enabled": True,
            "session.blocks": 6,
            "session.symbols_per_block": 400_000_000}))
        summary = cmd_coexist(cfg, tmp_path)
        assert summary["qber_penalty"] is not None
        assert summary["classical"]["margin_db"] == pytest.approx(17.6, abs=1e-9)
        header = (tmp_path / "coexist_blocks.csv").read_text().splitlines()[0]
        assert header.split(",")[:2] == ["block_start", "kappa"]

    def test_coexist_low_launch_penalty_negligible(self, tmp_path):
        from fso_qkd.coexistence import crosstalk_background
        from fso_qkd.linkmodel import expected_rates

        cfg = resolve_config(small_sweep_overrides(**{
            "classical.enabled": True,
            "classical.launch_power_dbm": -30.0,
            "session.blocks": 6,
            "session.symbols_per_block": 2_000_000_000}))
        # linear crosstalk scaling: 1/1000th of the 0-dBm rate is invisible
        q_off = expected_rates(cfg.source, cfg.channel, cfg.detector,
                               cfg.background, cfg.intrinsic_error).qber
        bg_on = cfg.background.with_crosstalk(
            crosstalk_background(cfg.coexist, -30.0))
        q_on = expected_rates(cfg.source, cfg.channel, cfg.detector,
                              bg_on, cfg.intrinsic_error).qber
        assert q_on - q_off < 0.001
        # the measured penalty is counting noise, far below the 0.7% signal
        summary = cmd_coexist(cfg, tmp_path)
        assert abs(summary["qber_penalty"]) < 0.0035

    def test_plan_spectrum_report(self, tmp_path):
        cfg = resolve_config()
        summary = cmd_plan_spectrum(None, cfg, tmp_path)
        ranking = summary["ranking"]
        assert [row["channel_nm"] for row in ranking] == [1390.0, 1410.0, 1430.0]
        payload = json.loads((tmp_path / "channel_ranking.json").read_text())
        assert payload["ranking"] == ranking


class TestMainEntry:
    def test_success_exit_zero(self, tmp_path, capsys):
        rc = main(["sweep-el", "--out", str(tmp_path),
                   "--set", "sweep.el_db=[0.0]",
                   "--set", "sweep.symbols_per_point=1000000"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "sweep_el.csv" in out

    def test_validation_error_exit_two(self, tmp_path, capsys):
        rc = main(["sweep-el", "--out", str(tmp_path), "--set", "nope=1"])
        assert rc == 2
        assert "validation error" in capsys.readouterr().err

    def test_empty_sweep_exit_two(self, tmp_path):
        assert main(["sweep-el", "--out", str(tmp_path),
                     "--set", "sweep.el_db=[]"]) == 2

    def test_config_file_plus_flag_override(self, tmp_path):
        cfg_file = tmp_path / "c.json"
        cfg_file.write_text(json.dumps({
            "sweep.el_db": [0.0], "sweep.symbols_per_point": 500_000,
            "rng_seed": 5}))
        rc = main(["sweep-el", "--config", str(cfg_file), "--seed", "6",
                   "--out", str(tmp_path / "o")])
        assert rc == 0
        summary = json.loads((tmp_path / "o/sweep_el_summary.json").read_text())
        assert summary["config"]["rng_seed"] == 6

    def test_plan_spectrum_bad_file_exit_two(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("wavelength_nm,psd_db_hz_per_nm\n1300.0,a\n")
        assert main(["plan-spectrum", "--spectrum", str(bad),
                     "--out", str(tmp_path)]) == 2

    def test_cli_seed_changes_mc_not_model(self, tmp_path):
        for seed in ("1", "2"):
            main(["sweep-el", "--out", str(tmp_path / seed), "--seed", seed,
                  "--set", "sweep.el_db=[0.0]",
                  "--set", "sweep.symbols_per_point=1000000"])
        rows = [
            (tmp_path / s / "sweep_el.csv").read_text().splitlines()[1].split(",")
            for s in ("1", "2")
        ]
        assert rows[0][1] == rows[1][1]      # model column identical
        assert rows[0][2] != rows[1][2]      # MC column reseeded
