"""Co-propagating 1-Gb/s OOK channel: BER, power margin, and crosstalk.

The classical receiver is thermal-noise limited, so its Q-factor scales
with linear received optical power. The single quoted (power, BER)
sensitivity point pins the one free constant exactly; everything else
follows from the Gaussian error integral. Crosstalk into the quantum
channel is a flat in-band background rate proportional to linear launch
power, calibrated from the measured QBER penalty.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import norm

from .calibration import CALIBRATION
from .errors import ValidationError


@dataclass(frozen=True)
class ClassicalParams:
    """OOK data channel appended in the C-band."""

    wavelength_nm: float = 1547.72
    bit_rate: float = 1e9
    launch_power_dbm: float = 0.0
    sensitivity_dbm_at_fec: float = -37.4
    fec_ber: float = 2e-4
    rx_insertion_db: float = 2.0  # add/drop cascade on the classical path

    def __post_init__(self):
        if not 0.0 < self.fec_ber < 0.5:
            raise ValidationError(f"fec_ber must be in (0, 0.5), got {self.fec_ber}")
        for name in ("launch_power_dbm", "sensitivity_dbm_at_fec"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if self.bit_rate <= 0:
            raise ValidationError(f"bit_rate must be > 0, got {self.bit_rate}")
        if self.rx_insertion_db < 0:
            raise ValidationError("rx_insertion_db must be >= 0")


@dataclass(frozen=True)
class CoexistenceScenario:
    """Block-wise activation of the data channel next to the quantum one."""

    active: bool = False
    crosstalk_rate_at_0dbm: float = CALIBRATION.crosstalk_rate_at_0dbm

    def __post_init__(self):
        if self.crosstalk_rate_at_0dbm < 0:
            raise ValidationError("crosstalk_rate_at_0dbm must be >= 0")


def ook_ber(received_power_dbm: float, params: ClassicalParams) -> float:
    """OOK bit error rate at the given received power.

    Q-factor proportional to linear power, anchored so that
    ber(sensitivity) equals the FEC-threshold BER exactly.
    """
    if not math.isfinite(received_power_dbm):
        raise ValidationError("received power must be finite")
    q_anchor = norm.isf(params.fec_ber)
    q = q_anchor * 10.0 ** ((received_power_dbm - params.sensitivity_dbm_at_fec) / 10.0)
    return float(norm.sf(q))


def link_margin(params: ClassicalParams, total_loss_db: float) -> float:
    """Headroom (dB) between received power and the FEC sensitivity."""
    if total_loss_db < 0:
        raise ValidationError(f"total loss must be >= 0 dB, got {total_loss_db}")
    return (params.launch_power_dbm - total_loss_db) - params.sensitivity_dbm_at_fec


def crosstalk_background(scenario: CoexistenceScenario, launch_power_dbm: float) -> float:
    """In-band crosstalk rate (cts/s) injected into the quantum detector."""
    if not scenario.active:
        return 0.0
    return scenario.crosstalk_rate_at_0dbm * 10.0 ** (launch_power_dbm / 10.0)
