"""Scenario configuration: flat dotted-key JSON resolved into typed params.

A scenario file is a single flat JSON object ("section.field": value).
Missing keys fall back to the shipped calibration; unknown keys are
rejected so typos cannot silently change an experiment. The fully resolved
key/value map is hashed and echoed into every output row, which makes any
emitted CSV/JSON auditable after the fact.

Defaults reproduce the 1410-nm / 25-um-MMF daylight baseline with the
background budget integrated from the packaged solar spectrum.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .calibration import CALIBRATION
from .coexistence import ClassicalParams, CoexistenceScenario
from .errors import ValidationError
from .linkparams import (
    BackgroundBudget,
    ChannelParams,
    DetectorParams,
    FiberKind,
    SourceParams,
    fiber_preset,
)
from . import spectrum as spectrum_mod

_SWEEP_DEFAULT = tuple(round(0.5 * i, 1) for i in range(21))  # 0..10 dB

_SCHEMA: dict[str, str] = {
    "source.mu_q": "float",
    "source.symbol_rate": "float",
    "source.wavelength_nm": "float",
    "channel.fiber_kind": "str",
    "channel.fso_loss_db": "float",
    "channel.excess_loss_db": "float",
    "channel.depol_p": "float",
    "channel.drift_rate": "float",
    "channel.rx_insertion_db": "float",
    "detector.efficiency": "float",
    "detector.dark_rate": "float",
    "detector.dead_time": "float",
    "detector.gate_fraction": "float",
    "detector.signal_gate_acceptance": "float",
    "background.mode": "str",
    "background.spectrum_path": "optstr",
    "background.solar_rate": "float",
    "protocol.intrinsic_error": "optfloat",
    "classical.enabled": "bool",
    "classical.wavelength_nm": "float",
    "classical.bit_rate": "float",
    "classical.launch_power_dbm": "float",
    "classical.sensitivity_dbm_at_fec": "float",
    "classical.fec_ber": "float",
    "classical.crosstalk_rate_at_0dbm": "float",
    "classical.rx_insertion_db": "float",
    "sweep.el_db": "floatlist",
    "sweep.symbols_per_point": "int",
    "session.blocks": "int",
    "session.block_duration_s": "float",
    "session.symbols_per_block": "int",
    "rng_seed": "int",
    "output_path": "str",
}


def default_flat_config() -> dict:
    """Fresh copy of the default key/value map (None = derived at resolve time)."""
    return {
        "source.mu_q": 0.1,
        "source.symbol_rate": 5e8,
        "source.wavelength_nm": 1410.0,
        "channel.fiber_kind": "MMF25",
        "channel.fso_loss_db": None,
        "channel.excess_loss_db": 0.0,
        "channel.depol_p": None,
        "channel.drift_rate": None,
        "channel.rx_insertion_db": None,
        "detector.efficiency": 0.10,
        "detector.dark_rate": 300.0,
        "detector.dead_time": 25e-6,
        "detector.gate_fraction": 0.5,
        "detector.signal_gate_acceptance": 1.0,
        "background.mode": "spectrum",
        "background.spectrum_path": None,
        "background.solar_rate": 0.0,
        "protocol.intrinsic_error": None,
        "classical.enabled": False,
        "classical.wavelength_nm": 1547.72,
        "classical.bit_rate": 1e9,
        "classical.launch_power_dbm": 0.0,
        "classical.sensitivity_dbm_at_fec": -37.4,
        "classical.fec_ber": 2e-4,
        "classical.crosstalk_rate_at_0dbm": None,
        "classical.rx_insertion_db": 2.0,
        "sweep.el_db": list(_SWEEP_DEFAULT),
        "sweep.symbols_per_point": 10_000_000,
        "session.blocks": 10,
        "session.block_duration_s": 45.0,
        "session.symbols_per_block": 2_000_000_000,
        "rng_seed": 1234,
        "output_path": "results",
    }


def _coerce(key: str, value, kind: str):
    try:
        if kind == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            out = float(value)
            if not math.isfinite(out):
                raise TypeError
            return out
        if kind == "optfloat":
            return None if value is None else _coerce(key, value, "float")
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            if isinstance(value, float) and value != int(value):
                raise TypeError
            return int(value)
        if kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind == "optstr":
            return None if value is None else _coerce(key, value, "str")
        if kind == "floatlist":
            if not isinstance(value, (list, tuple)):
                raise TypeError
            return [_coerce(key, v, "float") for v in value]
    except TypeError:
        raise ValidationError(f"{key}: expected {kind}, got {value!r}") from None
    raise ValidationError(f"{key}: unhandled schema kind {kind}")


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully resolved experiment description."""

    source: SourceParams
    channel: ChannelParams
    detector: DetectorParams
    background: BackgroundBudget
    classical: ClassicalParams
    coexist: CoexistenceScenario
    intrinsic_error: float
    sweep_el_db: tuple[float, ...]
    sweep_symbols_per_point: int
    blocks: int
    block_duration_s: float
    symbols_per_block: int
    rng_seed: int
    output_path: str
    resolved: dict = field(compare=False, repr=False)

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.resolved, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]

    @property
    def classical_total_loss_db(self) -> float:
        """Loss seen by the classical channel (shares the FSO segment)."""
        return (self.channel.fso_loss_db + self.channel.excess_loss_db
                + self.classical.rx_insertion_db)


def resolve_config(overrides: dict | None = None) -> ScenarioConfig:
    """Merge overrides onto the defaults and build a validated ScenarioConfig."""
    flat = default_flat_config()
    for key, value in (overrides or {}).items():
        if key not in _SCHEMA:
            raise ValidationError(f"unknown config key {key!r}")
        flat[key] = value
    for key, value in flat.items():
        if value is not None:
            flat[key] = _coerce(key, value, _SCHEMA[key])

    def build(section, factory, **kwargs):
        try:
            return factory(**kwargs)
        except ValidationError as exc:
            raise ValidationError(f"{section}: {exc}") from None

    source = build("source", SourceParams,
                   mu_q=flat["source.mu_q"],
                   symbol_rate=flat["source.symbol_rate"],
                   wavelength_nm=flat["source.wavelength_nm"])

    try:
        kind = FiberKind(flat["channel.fiber_kind"])
    except ValueError:
        raise ValidationError(
            f"channel.fiber_kind: unknown fiber {flat['channel.fiber_kind']!r}"
        ) from None
    preset = fiber_preset(kind)
    for key, attr in (("channel.fso_loss_db", "fso_loss_db"),
                      ("channel.depol_p", "depol_p"),
                      ("channel.drift_rate", "drift_rate"),
                      ("channel.rx_insertion_db", "rx_insertion_db")):
        if flat[key] is None:
            flat[key] = getattr(preset, attr)
    channel = build("channel", ChannelParams,
                    fso_loss_db=flat["channel.fso_loss_db"],
                    excess_loss_db=flat["channel.excess_loss_db"],
                    depol_p=flat["channel.depol_p"],
                    drift_rate=flat["channel.drift_rate"],
                    fiber_kind=kind,
                    rx_insertion_db=flat["channel.rx_insertion_db"],
                    alignment_stable=preset.alignment_stable)

    detector = build("detector", DetectorParams,
                     efficiency=flat["detector.efficiency"],
                     dark_rate=flat["detector.dark_rate"],
                     dead_time=flat["detector.dead_time"],
                     gate_fraction=flat["detector.gate_fraction"],
                     signal_gate_acceptance=flat["detector.signal_gate_acceptance"])

    mode = flat["background.mode"]
    if mode == "spectrum":
        solar = _solar_from_spectrum(flat["background.spectrum_path"],
                                     source.wavelength_nm, detector)
        flat["background.solar_rate"] = solar
    elif mode == "explicit":
        solar = flat["background.solar_rate"]
    else:
        raise ValidationError(
            f"background.mode: expected 'spectrum' or 'explicit', got {mode!r}")
    background = build("background", BackgroundBudget,
                       solar_rate=solar, dark_rate=detector.dark_rate)

    if flat["protocol.intrinsic_error"] is None:
        flat["protocol.intrinsic_error"] = CALIBRATION.intrinsic_error_for(
            source.wavelength_nm)
    intrinsic = flat["protocol.intrinsic_error"]
    if not 0.0 <= intrinsic <= 0.5:
        raise ValidationError(
            f"protocol.intrinsic_error: must be in [0, 0.5], got {intrinsic}")

    classical = build("classical", ClassicalParams,
                      wavelength_nm=flat["classical.wavelength_nm"],
                      bit_rate=flat["classical.bit_rate"],
                      launch_power_dbm=flat["classical.launch_power_dbm"],
                      sensitivity_dbm_at_fec=flat["classical.sensitivity_dbm_at_fec"],
                      fec_ber=flat["classical.fec_ber"],
                      rx_insertion_db=flat["classical.rx_insertion_db"])
    if flat["classical.crosstalk_rate_at_0dbm"] is None:
        flat["classical.crosstalk_rate_at_0dbm"] = CALIBRATION.crosstalk_rate_at_0dbm
    coexist = build("classical", CoexistenceScenario,
                    active=flat["classical.enabled"],
                    crosstalk_rate_at_0dbm=flat["classical.crosstalk_rate_at_0dbm"])

    if flat["sweep.symbols_per_point"] < 1:
        raise ValidationError("sweep.symbols_per_point: must be >= 1")
    if flat["session.blocks"] < 0:
        raise ValidationError("session.blocks: must be >= 0")
    if flat["session.block_duration_s"] <= 0:
        raise ValidationError("session.block_duration_s: must be > 0")
    if flat["session.symbols_per_block"] < 1:
        raise ValidationError("session.symbols_per_block: must be >= 1")

    return ScenarioConfig(
        source=source,
        channel=channel,
        detector=detector,
        background=background,
        classical=classical,
        coexist=coexist,
        intrinsic_error=intrinsic,
        sweep_el_db=tuple(flat["sweep.el_db"]),
        sweep_symbols_per_point=flat["sweep.symbols_per_point"],
        blocks=flat["session.blocks"],
        block_duration_s=flat["session.block_duration_s"],
        symbols_per_block=flat["session.symbols_per_block"],
        rng_seed=flat["rng_seed"],
        output_path=flat["output_path"],
        resolved=dict(sorted(flat.items())),
    )


def _solar_from_spectrum(path: str | None, wavelength_nm: float,
                         detector: DetectorParams) -> float:
    table = (spectrum_mod.load_default_spectrum() if path is None
             else spectrum_mod.load_spectrum(path))
    try:
        channel = spectrum_mod.CwdmChannel(center_nm=float(round(wavelength_nm)))
    except ValidationError:
        raise ValidationError(
            f"source.wavelength_nm: {wavelength_nm} nm is not a CWDM channel; "
            "use background.mode='explicit' for off-grid wavelengths") from None
    return spectrum_mod.integrate_background(
        table, channel, spectrum_mod.default_filters(channel), detector)


def load_config_file(path: str | Path) -> dict:
    """Read a flat JSON config file; top level must be an object."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ValidationError(f"config file {path}: top level must be an object")
    return data
