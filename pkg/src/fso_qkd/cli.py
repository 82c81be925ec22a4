"""Command-line front end: sweeps, stability runs, co-existence, planning.

Subcommands emit machine-readable CSV/JSON only (plotting is left to
external tools). Outputs are byte-identical for identical config + seed:
no timestamps, sorted JSON keys, repr-formatted floats, and per-point
seeds derived from (seed, point index) so worker count cannot reorder
randomness. Every CSV row carries the resolved-config hash for audit.

Exit codes: 0 success, 2 validation error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .coexistence import link_margin, ook_ber
from .errors import SimulationError, ValidationError
from .linkmodel import RandomAnalyzerSchedule, expected_rates, simulate_clicks
from .linkparams import RatePrediction
from .protocol import (
    BlockStats,
    alice_generate,
    run_session,
    secure_fraction,
    sift,
)
from .scenario import ScenarioConfig, load_config_file, resolve_config
from .seeding import mix64
from . import spectrum as spectrum_mod

QBER_THRESHOLD = 0.11

_TAG_SWEEP_ALICE, _TAG_SWEEP_SCHEDULE, _TAG_SWEEP_CLICKS = 101, 103, 107


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _sweep_point(config: ScenarioConfig, index: int, el_db: float) -> dict:
    """Model plus Monte Carlo for one excess-loss value (worker-safe)."""
    channel = config.channel.with_excess_loss(el_db)
    model = expected_rates(config.source, channel, config.detector,
                           config.background, config.intrinsic_error)
    n = config.sweep_symbols_per_point
    alice = alice_generate(n, mix64(config.rng_seed, index, _TAG_SWEEP_ALICE))
    schedule = RandomAnalyzerSchedule(mix64(config.rng_seed, index, _TAG_SWEEP_SCHEDULE))
    clicks = simulate_clicks(
        alice, config.source, channel, config.detector, config.background,
        analyzer_schedule=schedule,
        rng_seed=mix64(config.rng_seed, index, _TAG_SWEEP_CLICKS),
        intrinsic_error=config.intrinsic_error,
    )
    sifted = sift(alice, clicks)
    duration = n / config.source.symbol_rate
    qber_mc = sifted.mismatches / sifted.kept if sifted.kept else float("nan")
    return {
        "el_db": el_db,
        "model": model,
        "qber_mc": qber_mc,
        "rawkey_mc": sifted.kept / duration,
        "kept": sifted.kept,
        "duration": duration,
    }


def _agreement_z(point: dict) -> tuple[float, float]:
    """(z_qber, z_rawkey) of the MC against the model for one sweep point."""
    model: RatePrediction = point["model"]
    kept_expected = model.sifted_key_rate * point["duration"]
    z_raw = ((point["kept"] - kept_expected) / np.sqrt(kept_expected)
             if kept_expected > 0 else 0.0)
    if point["kept"] > 0:
        sigma = np.sqrt(model.qber * (1.0 - model.qber) / point["kept"])
        z_q = (point["qber_mc"] - model.qber) / sigma if sigma > 0 else 0.0
    else:
        z_q = 0.0
    return float(z_q), float(z_raw)


def threshold_crossing(el_values, qber_values, threshold: float = QBER_THRESHOLD):
    """Linearly interpolated excess loss where the model QBER crosses threshold."""
    for (e0, q0), (e1, q1) in zip(zip(el_values, qber_values),
                                  list(zip(el_values, qber_values))[1:]):
        if q0 < threshold <= q1:
            return e0 + (threshold - q0) * (e1 - e0) / (q1 - q0)
    return None


def cmd_sweep_el(config: ScenarioConfig, out_dir: Path, workers: int = 1) -> dict:
    """Model + Monte Carlo QKD performance over the excess-loss sweep."""
    if not config.sweep_el_db:
        raise ValidationError("sweep.el_db: sweep list must be non-empty")
    points = list(enumerate(config.sweep_el_db))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, [config] * len(points),
                                    [i for i, _ in points], [el for _, el in points]))
    else:
        results = [_sweep_point(config, i, el) for i, el in points]

    chash = config.config_hash
    rows, zs = [], []
    for pt in results:
        model: RatePrediction = pt["model"]
        rows.append([pt["el_db"], model.qber, pt["qber_mc"],
                     model.sifted_key_rate, pt["rawkey_mc"],
                     secure_fraction(model.qber), chash])
        zs.append(_agreement_z(pt))
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "sweep_el.csv"
    _write_csv(csv_path,
               ["el_db", "qber_model", "qber_mc", "rawkey_model", "rawkey_mc",
                "secure_fraction", "config_hash"], rows)

    crossing = threshold_crossing([r[0] for r in rows], [r[1] for r in rows])
    summary = {
        "command": "sweep-el",
        "config": config.resolved,
        "config_hash": chash,
        "channel_stable": config.channel.alignment_stable,
        "qber_threshold": QBER_THRESHOLD,
        "threshold_crossing_el_db": crossing,
        "operating_point": {
            "el_db": rows[0][0],
            "qber_model": rows[0][1],
            "rawkey_model": rows[0][3],
        },
        "agreement": {
            "max_abs_z_qber": max(abs(z[0]) for z in zs),
            "max_abs_z_rawkey": max(abs(z[1]) for z in zs),
            "within_3_sigma": all(abs(z[0]) <= 3 and abs(z[1]) <= 3 for z in zs),
        },
        "artifacts": {"csv": csv_path.name},
    }
    _write_json(out_dir / "sweep_el_summary.json", summary)
    return summary


def _block_rows(stats: list[BlockStats], chash: str, with_kappa: bool) -> list[list]:
    rows = []
    for s in stats:
        row = [s.block_start]
        if with_kappa:
            row.append(s.kappa)
        row.extend([s.qber, s.raw_key_rate, s.gated_clicks, s.flag, chash])
        rows.append(row)
    return rows


def cmd_stability(config: ScenarioConfig, out_dir: Path) -> dict:
    """Block-wise session with polarization drift enabled."""
    if config.blocks < 1:
        raise ValidationError("session.blocks: must be >= 1 for stability runs")
    stats = run_session(config)
    chash = config.config_hash
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "stability_blocks.csv"
    _write_csv(csv_path,
               ["block_start", "qber", "raw_key_rate", "gated_clicks", "flag",
                "config_hash"],
               _block_rows(stats, chash, with_kappa=False))
    qbers = [s.qber for s in stats if s.flag == "ok"]
    rates = [s.raw_key_rate for s in stats if s.flag == "ok"]
    summary = {
        "command": "stability",
        "config": config.resolved,
        "config_hash": chash,
        "blocks": len(stats),
        "qber_mean": float(np.mean(qbers)) if qbers else None,
        "qber_max": max(qbers) if qbers else None,
        "rawkey_mean": float(np.mean(rates)) if rates else None,
        "all_blocks_below_threshold": bool(qbers) and max(qbers) < QBER_THRESHOLD,
        "artifacts": {"csv": csv_path.name},
    }
    _write_json(out_dir / "stability_summary.json", summary)
    return summary


def cmd_coexist(config: ScenarioConfig, out_dir: Path) -> dict:
    """Alternating-kappa session plus classical BER and power margin."""
    if not config.coexist.active:
        config = replace(
            config,
            coexist=replace(config.coexist, active=True),
            resolved={**config.resolved, "classical.enabled": True},
        )
    if config.blocks < 2:
        raise ValidationError("session.blocks: need >= 2 blocks to compare kappa on/off")
    stats = run_session(config)
    chash = config.config_hash
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "coexist_blocks.csv"
    _write_csv(csv_path,
               ["block_start", "kappa", "qber", "raw_key_rate", "gated_clicks",
                "flag", "config_hash"],
               _block_rows(stats, chash, with_kappa=True))

    on = [s.qber for s in stats if s.kappa and s.flag == "ok"]
    off = [s.qber for s in stats if not s.kappa and s.flag == "ok"]
    penalty = (float(np.mean(on) - np.mean(off)) if on and off else None)
    loss = config.classical_total_loss_db
    received_dbm = config.classical.launch_power_dbm - loss
    summary = {
        "command": "coexist",
        "config": config.resolved,
        "config_hash": chash,
        "qber_mean_kappa_on": float(np.mean(on)) if on else None,
        "qber_mean_kappa_off": float(np.mean(off)) if off else None,
        "qber_penalty": penalty,
        "classical": {
            "total_loss_db": loss,
            "received_power_dbm": received_dbm,
            "ber": ook_ber(received_dbm, config.classical),
            "margin_db": link_margin(config.classical, loss),
        },
        "artifacts": {"csv": csv_path.name},
    }
    _write_json(out_dir / "coexist_summary.json", summary)
    return summary


def cmd_plan_spectrum(spectrum_path: str | None, config: ScenarioConfig,
                      out_dir: Path) -> dict:
    """Rank the CWDM channels by in-band background for a given spectrum."""
    table = (spectrum_mod.load_default_spectrum() if spectrum_path is None
             else spectrum_mod.load_spectrum(spectrum_path))
    channels = [spectrum_mod.CwdmChannel(nm) for nm in spectrum_mod.CWDM_GRID_NM]
    report = spectrum_mod.ranking_report(table, channels, config.detector)
    summary = {
        "command": "plan-spectrum",
        "config_hash": config.config_hash,
        "spectrum": spectrum_path or "packaged-default",
        "dark_rate_cts_s": config.detector.dark_rate,
        "ranking": report,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "channel_ranking.json", summary)
    return summary


def _parse_set(pairs: list[str]) -> dict:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValidationError(f"--set expects KEY=VALUE, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            overrides[key] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key] = raw
    return overrides


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fso-qkd",
        description="Daylight free-space BB84 link simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("sweep-el", "QBER/raw-key vs excess loss, model and Monte Carlo"),
        ("stability", "block-wise session with polarization drift"),
        ("coexist", "alternating classical-channel activation"),
        ("plan-spectrum", "rank CWDM channels by in-band solar background"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--seed", type=int, help="override rng_seed")
        p.add_argument("--out", help="output directory (default: config output_path)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (JSON-parsed value)")
        if name == "sweep-el":
            p.add_argument("--workers", type=int, default=1,
                           help="parallel workers over sweep points")
        if name == "plan-spectrum":
            p.add_argument("--spectrum", help="spectrum CSV (default: packaged)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        overrides = {}
        if args.config:
            overrides.update(load_config_file(args.config))
        overrides.update(_parse_set(args.set))
        if args.seed is not None:
            overrides["rng_seed"] = args.seed
        if args.command == "coexist":
            overrides.setdefault("classical.enabled", True)
        config = resolve_config(overrides)
        out_dir = Path(args.out) if args.out else Path(config.output_path)

        if args.command == "sweep-el":
            if args.workers < 1:
                raise ValidationError("--workers must be >= 1")
            summary = cmd_sweep_el(config, out_dir, workers=args.workers)
        elif args.command == "stability":
            summary = cmd_stability(config, out_dir)
        elif args.command == "coexist":
            summary = cmd_coexist(config, out_dir)
        else:
            summary = cmd_plan_spectrum(args.spectrum, config, out_dir)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3

    for name in summary.get("artifacts", {}).values():
        print(out_dir / name)
    print(out_dir / f"{args.command.replace('-', '_')}_summary.json"
          if args.command != "plan-spectrum" else out_dir / "channel_ranking.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
