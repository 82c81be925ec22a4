"""Rate equations, presets, and Monte Carlo vs closed-form agreement."""
import math

import numpy as np
import pytest

from fso_qkd.errors import ValidationError
from fso_qkd.linkmodel import (
    ClickStream,
    CyclicAnalyzerSchedule,
    RandomAnalyzerSchedule,
    dead_time_corrected,
    dead_time_filter,
    expected_rates,
    simulate_clicks,
    transmittance,
)
from fso_qkd.linkparams import (
    BackgroundBudget,
    ChannelParams,
    DetectorParams,
    FiberKind,
    SourceParams,
    fiber_preset,
)
from fso_qkd.protocol import alice_generate, sift
from fso_qkd.calibration import CALIBRATION


def quiet_channel(**kwargs) -> ChannelParams:
    defaults = dict(fso_loss_db=5.0, excess_loss_db=0.0, depol_p=0.0,
                    drift_rate=0.0, rx_insertion_db=0.0)
    defaults.update(kwargs)
    return ChannelParams(**defaults)


class TestTransmittance:
    def test_zero_loss(self):
        assert transmittance(0.0) == 1.0

    def test_ten_db(self):
        assert transmittance(10.0) == pytest.approx(0.1, rel=1e-12)

    def test_7_6_db(self):
        assert transmittance(7.6) == pytest.approx(10 ** -0.76, rel=1e-12)
        assert transmittance(7.6) == pytest.approx(0.1738, abs=1e-4)

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            transmittance(-1.0)


class TestDeadTime:
    def test_zero_rate(self):
        assert dead_time_corrected(0.0, 25e-6) == 0.0

    def test_half_rate_at_unity_product(self):
        assert dead_time_corrected(40000.0, 25e-6) == pytest.approx(20000.0, rel=1e-12)

    def test_zero_dead_time(self):
        assert dead_time_corrected(12345.0, 0.0) == 12345.0

    def test_capped_by_inverse_dead_time(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            rate = 10 ** rng.uniform(0, 9)
            tau = 10 ** rng.uniform(-8, -3)
            out = dead_time_corrected(rate, tau)
            assert out <= min(rate, 1.0 / tau) + 1e-9

    def test_filter_enforces_min_gap(self):
        rng = np.random.default_rng(8)
        times = np.sort(rng.uniform(0, 1.0, size=5000))
        kept = dead_time_filter(times, 1e-3)
        gaps = np.diff(times[kept])
        assert np.all(gaps >= 1e-3)
        # every dropped event sits within dead time of the previous kept one
        assert len(kept) < 5000


class TestFiberPresets:
    def test_mmf25(self):
        ch = fiber_preset(FiberKind.MMF25)
        assert ch.fso_loss_db == 17.8
        assert ch.alignment_stable

    def test_om4_loss_and_qber_target(self):
        ch = fiber_preset(FiberKind.OM4)
        assert ch.fso_loss_db == 7.0
        pred = expected_rates(
            SourceParams(), ch, DetectorParams(),
            BackgroundBudget(solar_rate=CALIBRATION.solar_1410),
            CALIBRATION.intrinsic_error_base)
        assert pred.qber == pytest.approx(0.19, abs=1e-6)

    def test_smf_flagged_unstable(self):
        ch = fiber_preset(FiberKind.SMF)
        assert ch.fso_loss_db >= 24.0
        assert not ch.alignment_stable


class TestExpectedRates:
    def test_calibrated_baseline(self):
        pred = expected_rates(
            SourceParams(), fiber_preset(FiberKind.MMF25), DetectorParams(),
            BackgroundBudget(solar_rate=CALIBRATION.solar_1410),
            CALIBRATION.intrinsic_error_base)
        assert pred.qber == pytest.approx(0.079, abs=1e-9)
        assert pred.sifted_key_rate == pytest.approx(3.7e3, rel=1e-9)

    def test_threshold_at_7_6_db_excess(self):
        ch = fiber_preset(FiberKind.MMF25).with_excess_loss(7.6)
        pred = expected_rates(
            SourceParams(), ch, DetectorParams(),
            BackgroundBudget(solar_rate=CALIBRATION.solar_1410),
            CALIBRATION.intrinsic_error_base)
        assert pred.qber == pytest.approx(0.11, abs=1e-9)

    def test_no_signal_means_coin_flip(self):
        pred = expected_rates(
            SourceParams(mu_q=0.0), quiet_channel(), DetectorParams(),
            BackgroundBudget(solar_rate=100.0), 0.05)
        assert pred.signal_click_rate == 0.0
        assert pred.qber == 0.5

    def test_pure_intrinsic_error_passthrough(self):
        # no background, no darks, no depolarization: qber equals e exactly
        for e in (0.0, 0.03, 0.2):
            pred = expected_rates(
                SourceParams(), quiet_channel(), DetectorParams(dark_rate=0.0),
                BackgroundBudget(dark_rate=0.0), e)
            assert pred.qber == pytest.approx(e, abs=1e-15)

    def test_qber_monotone_in_excess_loss_and_backgrounds(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            ch = quiet_channel(fso_loss_db=rng.uniform(0, 20),
                               depol_p=rng.uniform(0, 0.4))
            det = DetectorParams()
            e = rng.uniform(0, 0.2)
            els = np.sort(rng.uniform(0, 25, size=6))
            qs = [expected_rates(SourceParams(), ch.with_excess_loss(el), det,
                                 BackgroundBudget(solar_rate=500.0), e).qber
                  for el in els]
            assert np.all(np.diff(qs) >= -1e-12)
            rates = [expected_rates(SourceParams(), ch.with_excess_loss(el), det,
                                    BackgroundBudget(solar_rate=500.0), e).sifted_key_rate
                     for el in els]
            assert np.all(np.diff(rates) <= 1e-12)
            solars = np.sort(rng.uniform(0, 5000, size=5))
            qs_bg = [expected_rates(SourceParams(), ch, det,
                                    BackgroundBudget(solar_rate=s), e).qber
                     for s in solars]
            assert np.all(np.diff(qs_bg) >= -1e-12)

    def test_bad_intrinsic_rejected(self):
        with pytest.raises(ValidationError):
            expected_rates(SourceParams(), quiet_channel(), DetectorParams(),
                           BackgroundBudget(), 0.7)


def mc_counts(clicks: ClickStream):
    gated_sig = int(np.count_nonzero(clicks.in_gate & clicks.is_signal))
    gated_bg = int(np.count_nonzero(clicks.in_gate & ~clicks.is_signal))
    return gated_sig, gated_bg


class TestMonteCarlo:
    def test_no_light_no_clicks(self):
        alice = alice_generate(10_000, 3)
        clicks = simulate_clicks(
            alice, SourceParams(), quiet_channel(fso_loss_db=float("inf")),
            DetectorParams(dark_rate=0.0), BackgroundBudget(dark_rate=0.0),
            rng_seed=4)
        assert len(clicks) == 0

    def test_empty_symbols_empty_stream(self):
        clicks = simulate_clicks(alice_generate(0, 1), SourceParams(),
                                 quiet_channel(), DetectorParams(),
                                 BackgroundBudget(), rng_seed=2)
        assert len(clicks) == 0

    def test_same_seed_bit_identical(self):
        alice = alice_generate(500_000, 21)
        kwargs = dict(src=SourceParams(), ch=quiet_channel(depol_p=0.1),
                      det=DetectorParams(), bg=BackgroundBudget(solar_rate=2000.0),
                      rng_seed=77, intrinsic_error=0.05)
        a = simulate_clicks(alice, **kwargs)
        b = simulate_clicks(alice, **kwargs)
        assert np.array_equal(a.timestamps, b.timestamps)
        assert np.array_equal(a.symbol_indices, b.symbol_indices)
        assert np.array_equal(a.analyzer_bits, b.analyzer_bits)
        assert np.array_equal(a.in_gate, b.in_gate)

    def test_stream_invariants(self):
        alice = alice_generate(2_000_000, 5)
        src = SourceParams()
        clicks = simulate_clicks(alice, src, quiet_channel(),
                                 DetectorParams(), BackgroundBudget(solar_rate=5000.0),
                                 rng_seed=9)
        assert np.all(np.diff(clicks.timestamps) >= 0)
        implied = np.floor(clicks.timestamps * src.symbol_rate).astype(np.int64)
        assert np.array_equal(implied, clicks.symbol_indices)
        gaps = np.diff(clicks.timestamps)
        assert np.all(gaps >= DetectorParams().dead_time)

    def test_record_view(self):
        alice = alice_generate(1_000_000, 6)
        clicks = simulate_clicks(alice, SourceParams(), quiet_channel(),
                                 DetectorParams(), BackgroundBudget(), rng_seed=10)
        rec = clicks[0]
        assert rec.origin in ("signal", "background")
        assert rec.analyzer[1] in (0, 1)
        assert isinstance(rec.in_gate, bool)

    @pytest.mark.parametrize("seed", [101, 202, 303, 404, 505])
    def test_matches_rate_equation_within_3_sigma(self, seed):
        """Random operating points: gated counts and QBER track the model."""
        rng = np.random.default_rng(seed)
        src = SourceParams()
        ch = quiet_channel(
            fso_loss_db=rng.uniform(6, 14),
            excess_loss_db=rng.uniform(0, 3),
            depol_p=rng.uniform(0, 0.3),
        )
        det = DetectorParams()
        bg = BackgroundBudget(solar_rate=rng.uniform(0, 3000.0))
        e_i = rng.uniform(0, 0.1)
        pred = expected_rates(src, ch, det, bg, e_i)

        n = 20_000_000
        alice = alice_generate(n, seed + 1)
        clicks = simulate_clicks(alice, src, ch, det, bg,
                                 rng_seed=seed + 2, intrinsic_error=e_i)
        duration = n / src.symbol_rate
        gated_sig, gated_bg = mc_counts(clicks)
        exp_sig = pred.signal_click_rate * duration
        exp_bg = pred.background_click_rate * duration
        assert abs(gated_sig - exp_sig) <= 3 * math.sqrt(exp_sig)
        if exp_bg >= 10:
            assert abs(gated_bg - exp_bg) <= 3 * math.sqrt(exp_bg)

        sifted = sift(alice, clicks)
        exp_kept = pred.sifted_key_rate * duration
        assert abs(sifted.kept - exp_kept) <= 3 * math.sqrt(exp_kept)
        sigma_q = math.sqrt(pred.qber * (1 - pred.qber) / sifted.kept)
        assert abs(sifted.mismatches / sifted.kept - pred.qber) <= 3 * sigma_q

    def test_fully_depolarized_channel_is_random(self):
        src = SourceParams()
        ch = quiet_channel(depol_p=1.0)
        alice = alice_generate(4_000_000, 31)
        clicks = simulate_clicks(alice, src, ch, DetectorParams(dark_rate=0.0),
                                 BackgroundBudget(dark_rate=0.0), rng_seed=32)
        sifted = sift(alice, clicks)
        qber = sifted.mismatches / sifted.kept
        sigma = math.sqrt(0.25 / sifted.kept)
        assert abs(qber - 0.5) <= 3 * sigma

    def test_passive_receiver_consistency(self):
        """Four-port mode without dead time: every photon clicks some port."""
        src = SourceParams()
        ch = quiet_channel(depol_p=0.1)
        det = DetectorParams(dark_rate=0.0, dead_time=0.0)
        bg = BackgroundBudget(dark_rate=0.0)
        alice = alice_generate(3_000_000, 41)
        clicks = simulate_clicks(alice, src, ch, det, bg, rng_seed=42,
                                 intrinsic_error=0.02, receiver="passive")
        q = 1 - math.exp(-src.mu_q * det.efficiency * transmittance(ch.total_loss_db))
        exp_photons = 3_000_000 * q
        assert abs(len(clicks) - exp_photons) <= 3 * math.sqrt(exp_photons)
        sifted = sift(alice, clicks)
        # with four always-on ports, every detected matched-basis photon is kept
        expected_qber = 0.5 * (1 - (1 - 0.1) * (1 - 2 * 0.02))
        sigma = math.sqrt(expected_qber * (1 - expected_qber) / sifted.kept)
        assert abs(sifted.mismatches / sifted.kept - expected_qber) <= 3 * sigma
        exp_kept = exp_photons * 0.5
        assert abs(sifted.kept - exp_kept) <= 3 * math.sqrt(exp_kept)

    def test_partial_gate_acceptance_matches_model(self):
        """Non-default gating (acceptance 0.7, gate 0.3) under heavy dead time."""
        src = SourceParams()
        ch = quiet_channel(fso_loss_db=9.0, depol_p=0.05)
        det = DetectorParams(gate_fraction=0.3, signal_gate_acceptance=0.7)
        bg = BackgroundBudget(solar_rate=4000.0)
        e_i = 0.04
        pred = expected_rates(src, ch, det, bg, e_i)
        n = 20_000_000
        alice = alice_generate(n, 5)
        clicks = simulate_clicks(alice, src, ch, det, bg, rng_seed=6,
                                 intrinsic_error=e_i)
        duration = n / src.symbol_rate
        gated_sig, _ = mc_counts(clicks)
        exp_sig = pred.signal_click_rate * duration
        assert abs(gated_sig - exp_sig) <= 3 * math.sqrt(exp_sig)
        sifted = sift(alice, clicks)
        exp_kept = pred.sifted_key_rate * duration
        assert abs(sifted.kept - exp_kept) <= 3 * math.sqrt(exp_kept)

    def test_unknown_receiver_rejected(self):
        with pytest.raises(ValidationError):
            simulate_clicks(alice_generate(10, 1), SourceParams(), quiet_channel(),
                            DetectorParams(), BackgroundBudget(), receiver="garbled")


class TestSchedules:
    def test_random_schedule_deterministic(self):
        sched = RandomAnalyzerSchedule(99)
        idx = np.arange(1000)
        b1, x1 = sched.ports_at(idx)
        b2, x2 = RandomAnalyzerSchedule(99).ports_at(idx)
        assert np.array_equal(b1, b2) and np.array_equal(x1, x2)
        assert set(np.unique(b1)) <= {0, 1}

    def test_monitor_fraction_produces_hv(self):
        sched = RandomAnalyzerSchedule(7, monitor_fraction=0.3)
        bases, _ = sched.ports_at(np.arange(20000))
        frac = np.mean(bases == 2)
        assert 0.25 < frac < 0.35

    def test_cyclic_schedule(self):
        sched = CyclicAnalyzerSchedule(dwell=2)
        bases, bits = sched.ports_at(np.arange(8))
        assert bases.tolist() == [0, 0, 0, 0, 1, 1, 1, 1]
        assert bits.tolist() == [0, 0, 1, 1, 0, 0, 1, 1]
