"""Shipped link calibration.

The test campaign quotes only end-to-end anchors for the 1410-nm / 25-um-MMF
baseline: a 3.7 kb/s sifted rate at 7.9% QBER with no excess loss, the 11%
QBER threshold reached at 7.6 dB excess loss, a 590 cts/s total in-band
noise floor on the 1430-nm channel at 9.4% QBER, a 19% QBER on the OM4
fiber, and a 0.7% QBER penalty with the classical channel live. The
individual insertion losses and error mechanisms behind those numbers are
not itemized, so this module back-solves them once, deterministically, from
the anchors:

  * receiver insertion loss (bandpass + add/drop + polarimeter, folded into
    one dB figure),
  * the combined polarization error of the baseline link, split into a
    system part and the 25-um-MMF depolarization share,
  * the total background rate consistent with the loss-margin curve,
  * per-channel intrinsic-error offsets, the OM4 depolarization, and the
    co-existence crosstalk rate.

Everything here is closed-form or a one-dimensional root solve, so the
derived constants are identical on every import.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

# Fixed instrument parameters of the testbed.
SYMBOL_RATE = 5e8           # symbols/s
MU_Q = 0.1                  # mean photons/symbol at transmitter output
DETECTOR_EFFICIENCY = 0.10
DARK_RATE = 300.0           # cts/s
DEAD_TIME = 25e-6           # s, non-paralyzable
GATE_FRACTION = 0.5         # central temporal gate, fraction of symbol
SIGNAL_GATE_ACCEPTANCE = 1.0

FSO_LOSS_MMF25_DB = 17.8
FSO_LOSS_OM4_DB = 7.0
FSO_LOSS_SMF_DB = 24.0      # best stable figure ever reached; flagged unstable

# Measured anchors the calibration reproduces.
ANCHOR_QBER_EL0 = 0.079
ANCHOR_RAWKEY_EL0 = 3.7e3   # bits/s, per detector, sifted
ANCHOR_QBER_THRESHOLD = 0.11
ANCHOR_EL_AT_THRESHOLD = 7.6     # dB excess loss where QBER hits threshold
ANCHOR_QBER_1430 = 0.094
ANCHOR_SOLAR_1430 = 290.0        # cts/s -> 590 total floor with darks
ANCHOR_QBER_OM4 = 0.19
ANCHOR_COEXIST_PENALTY = 0.007   # absolute QBER increase, classical on

# Declared split: the 25-um MMF contributes 1% QBER via depolarization
# (the measured <=1% penalty against the all-SMF reference link).
DEPOL_MMF25 = 0.02

DRIFT_RATE_DEFAULT = 2e-4   # rad/s; <=1% QBER growth over a 10-minute run


def _p_click(loss_db: float) -> float:
    t = 10.0 ** (-loss_db / 10.0)
    return 1.0 - math.exp(-MU_Q * DETECTOR_EFFICIENCY * t)


def _sifted_signal_rate(loss_db: float) -> float:
    # basis match (1/2) times single-port Malus split (1/2), before dead time
    return SYMBOL_RATE * _p_click(loss_db) * SIGNAL_GATE_ACCEPTANCE * 0.25


def combined_polarization_error(intrinsic_error: float, depol_p: float) -> float:
    """Matched-basis error of depolarization composed with system infidelity.

    Both mechanisms shrink the effective Stokes overlap multiplicatively:
    kappa = (1 - 2 e_i)(1 - p), so the error is (1 - kappa)/2. This reduces
    to e_i + p/2 for small values but stays exact at any magnitude.
    """
    return 0.5 * (1.0 - (1.0 - 2.0 * intrinsic_error) * (1.0 - depol_p))


def _intrinsic_from_combined(e_combined: float, depol_p: float) -> float:
    return (e_combined - depol_p / 2.0) / (1.0 - depol_p)


def _qber(e_combined: float, bg_to_signal: float) -> float:
    # x is the sifted background-to-signal ratio; background bits are random
    return (e_combined + 0.5 * bg_to_signal) / (1.0 + bg_to_signal)


def _solve_at(rx_insertion_db: float):
    """Solve (e, background) from the two QBER anchors at a trial insertion loss."""
    loss0 = FSO_LOSS_MMF25_DB + rx_insertion_db
    s0 = _sifted_signal_rate(loss0)
    ratio = s0 / _sifted_signal_rate(loss0 + ANCHOR_EL_AT_THRESHOLD)
    denom = ANCHOR_QBER_EL0 - 0.5 + ratio * (0.5 - ANCHOR_QBER_THRESHOLD)
    x0 = (ANCHOR_QBER_THRESHOLD - ANCHOR_QBER_EL0) / denom
    e_combined = ANCHOR_QBER_EL0 * (1.0 + x0) - 0.5 * x0
    sifted_bg = x0 * s0
    bg_total = sifted_bg * 2.0 / GATE_FRACTION
    load = SYMBOL_RATE * _p_click(loss0) * 0.5 + bg_total
    rawkey = (s0 + sifted_bg) / (1.0 + load * DEAD_TIME)
    return rawkey, e_combined, x0, s0, bg_total


@dataclass(frozen=True)
class LinkCalibration:
    """Constants derived from the measurement anchors (see module docstring)."""

    rx_insertion_db: float
    e_combined_1410: float
    intrinsic_error_base: float
    bg_total_1410: float          # cts/s incl. darks
    solar_1410: float             # cts/s
    sifted_signal_el0: float      # b/s before dead-time correction
    intrinsic_offset_1430: float  # added to intrinsic_error_base at 1430 nm
    depol_om4: float
    crosstalk_rate_at_0dbm: float # cts/s in-band, classical channel at 0 dBm

    def intrinsic_error_for(self, wavelength_nm: float) -> float:
        """Per-channel system error; 1430 nm carries a calibrated offset."""
        offset = self.intrinsic_offset_1430 if round(wavelength_nm) == 1430 else 0.0
        return self.intrinsic_error_base + offset


def _derive() -> LinkCalibration:
    rx_db = brentq(
        lambda lrx: _solve_at(lrx)[0] - ANCHOR_RAWKEY_EL0, 0.01, 30.0, xtol=1e-12
    )
    _, e_combined, x0, s0, bg_total = _solve_at(rx_db)
    solar_1410 = bg_total - DARK_RATE
    if solar_1410 < 0:
        raise RuntimeError("anchor solve produced a negative solar rate")
    intrinsic_base = _intrinsic_from_combined(e_combined, DEPOL_MMF25)

    # 1430 nm: with the 590 cts/s floor the background alone does not explain
    # the 9.4% QBER; the residual is carried as a per-channel intrinsic offset
    # (the channels were measured at different times of day and polarimeter
    # alignments, so a small per-channel error difference is expected).
    x30 = ((DARK_RATE + ANCHOR_SOLAR_1430) * GATE_FRACTION / 2.0) / s0
    e30 = ANCHOR_QBER_1430 * (1.0 + x30) - 0.5 * x30
    offset_1430 = _intrinsic_from_combined(e30, DEPOL_MMF25) - intrinsic_base

    # OM4: same system error, heavier depolarization, much stronger signal.
    s4 = _sifted_signal_rate(FSO_LOSS_OM4_DB + rx_db)
    x4 = (bg_total * GATE_FRACTION / 2.0) / s4
    e4 = ANCHOR_QBER_OM4 * (1.0 + x4) - 0.5 * x4
    depol_om4 = (e4 - intrinsic_base) / (0.5 - intrinsic_base)

    # Crosstalk rate that lifts the baseline QBER by the quoted 0.7%.
    q_on = ANCHOR_QBER_EL0 + ANCHOR_COEXIST_PENALTY
    x_on = (q_on - e_combined) / (0.5 - q_on)
    crosstalk = (x_on - x0) * s0 * 2.0 / GATE_FRACTION

    return LinkCalibration(
        rx_insertion_db=rx_db,
        e_combined_1410=e_combined,
        intrinsic_error_base=intrinsic_base,
        bg_total_1410=bg_total,
        solar_1410=solar_1410,
        sifted_signal_el0=s0,
        intrinsic_offset_1430=offset_1430,
        depol_om4=depol_om4,
        crosstalk_rate_at_0dbm=crosstalk,
    )


CALIBRATION = _derive()
