"""Two-party BB84 session logic: symbol generation, sifting, block statistics.

Alice and Bob exchange exactly two messages per block: Bob announces the
(symbol index, analyzer basis) of his gated clicks, Alice answers with the
subset whose bases match. The helpers below implement those flows as pure
value exchanges so the session could later be split across a transport.

Alice's random symbols are a counter-based stream: symbol i is a pure
function of (seed, i), so gigasymbol sequences are addressable without
being materialized and the sparse Monte Carlo path sees exactly the same
values as an element-by-element reader.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .coexistence import crosstalk_background
from .errors import ValidationError
from .linkmodel import (
    HV_CODE,
    CODE_BASES,
    ClickStream,
    RandomAnalyzerSchedule,
    detector_load,
    simulate_clicks,
)
from .polarization import BB84Symbol
from .scenario import ScenarioConfig
from .seeding import hash_stream, mix64, rng_from

# Sub-stream tags for deriving per-block seeds from the session seed.
_TAG_ALICE, _TAG_SCHEDULE, _TAG_CLICKS, _TAG_AXIS = 11, 13, 17, 19


class SymbolSequence:
    """Lazy i.i.d. uniform BB84 symbol stream, addressable by index."""

    __slots__ = ("n", "seed")

    def __init__(self, n: int, seed: int):
        if n < 0:
            raise ValidationError(f"symbol count must be >= 0, got {n}")
        self.n = int(n)
        self.seed = int(seed)

    def __len__(self) -> int:
        return self.n

    def _words(self, indices: np.ndarray) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise ValidationError("symbol index out of range")
        return hash_stream(self.seed, idx)

    def bases_at(self, indices: np.ndarray) -> np.ndarray:
        """Basis codes (0=RL, 1=AD) at the given indices."""
        return (self._words(indices) & np.uint64(1)).astype(np.uint8)

    def bits_at(self, indices: np.ndarray) -> np.ndarray:
        return ((self._words(indices) >> np.uint64(1)) & np.uint64(1)).astype(np.uint8)

    def __getitem__(self, i: int) -> BB84Symbol:
        if not 0 <= i < self.n:
            raise IndexError(i)
        idx = np.asarray([i])
        return BB84Symbol(
            basis=CODE_BASES[int(self.bases_at(idx)[0])],
            bit=int(self.bits_at(idx)[0]),
        )

    def __iter__(self):
        chunk = 65536
        for start in range(0, self.n, chunk):
            idx = np.arange(start, min(start + chunk, self.n))
            bases, bits = self.bases_at(idx), self.bits_at(idx)
            for b, x in zip(bases, bits):
                yield BB84Symbol(basis=CODE_BASES[int(b)], bit=int(x))


def alice_generate(n: int, rng_seed: int) -> SymbolSequence:
    """Alice's transmission schedule: n uniform (basis, bit) pairs."""
    return SymbolSequence(n, rng_seed)


@dataclass(frozen=True)
class SiftResult:
    """Outcome of basis reconciliation for one block."""

    kept_indices: np.ndarray
    alice_bits: np.ndarray
    bob_bits: np.ndarray

    def __post_init__(self):
        if not (len(self.kept_indices) == len(self.alice_bits) == len(self.bob_bits)):
            raise ValidationError("sift arrays must have equal length")

    @property
    def kept(self) -> int:
        return len(self.kept_indices)

    @property
    def mismatches(self) -> int:
        return int(np.count_nonzero(self.alice_bits != self.bob_bits))


def bob_announce(clicks: ClickStream) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bob's sifting message: (index, basis code) of gated key-basis clicks.

    His measured bits stay local. Duplicate clicks on one symbol keep the
    earliest (the dead time should make duplicates impossible; their
    presence would indicate a harness bug, not physics).
    """
    usable = clicks.in_gate & (clicks.analyzer_basis_codes != HV_CODE)
    indices = clicks.symbol_indices[usable]
    bases = clicks.analyzer_basis_codes[usable]
    bits = clicks.analyzer_bits[usable]
    # click streams are time ordered, so unique() keeps the earliest
    _, first = np.unique(indices, return_index=True)
    return indices[first], bases[first], bits[first]


def alice_match(alice: SymbolSequence, indices: np.ndarray,
                basis_codes: np.ndarray) -> np.ndarray:
    """Alice's reply: boolean mask of announcements whose basis matches hers."""
    return alice.bases_at(indices) == basis_codes


def sift(alice, clicks: ClickStream) -> SiftResult:
    """Run the two-message sifting dialogue and return the kept bits."""
    if not isinstance(alice, SymbolSequence):
        alice = _materialized(alice)
    indices, bases, bob_bits = bob_announce(clicks)
    keep = alice_match(alice, indices, bases)
    kept_idx = indices[keep]
    return SiftResult(
        kept_indices=kept_idx,
        alice_bits=alice.bits_at(kept_idx),
        bob_bits=bob_bits[keep],
    )


class _ListSymbols(SymbolSequence):
    """Adapter giving explicit BB84Symbol lists the array interface."""

    __slots__ = ("_bases", "_bits")

    def __init__(self, symbols):
        self.n = len(symbols)
        self.seed = 0
        from .linkmodel import BASIS_CODES

        self._bases = np.array([BASIS_CODES[s.basis] for s in symbols], dtype=np.uint8)
        self._bits = np.array([s.bit for s in symbols], dtype=np.uint8)

    def bases_at(self, indices):
        return self._bases[np.asarray(indices, dtype=np.int64)]

    def bits_at(self, indices):
        return self._bits[np.asarray(indices, dtype=np.int64)]


def _materialized(symbols) -> _ListSymbols:
    return _ListSymbols(list(symbols))


@dataclass(frozen=True)
class BlockStats:
    """Per-block raw-key and error statistics."""

    block_start: float
    block_duration: float
    raw_key_rate: float
    qber: float
    gated_clicks: int
    kept_bits: int = 0
    kappa: bool = False
    flag: str = "ok"

    def __post_init__(self):
        if self.block_duration <= 0:
            raise ValidationError("block duration must be > 0")
        if not 0.0 <= self.qber <= 1.0:
            raise ValidationError(f"qber must be in [0, 1], got {self.qber}")


def estimate_block_stats(
    sifted: SiftResult,
    duration: float,
    gated_clicks: int | None = None,
    block_start: float = 0.0,
    kappa: bool = False,
) -> BlockStats:
    """Raw-key rate and QBER for one block of sifted bits.

    A block with no kept bits cannot estimate a QBER and is flagged
    ``insufficient_data`` with qber 0.
    """
    if duration <= 0:
        raise ValidationError(f"duration must be > 0, got {duration}")
    kept = sifted.kept
    qber = sifted.mismatches / kept if kept else 0.0
    return BlockStats(
        block_start=block_start,
        block_duration=duration,
        raw_key_rate=kept / duration,
        qber=qber,
        gated_clicks=kept if gated_clicks is None else int(gated_clicks),
        kept_bits=kept,
        kappa=kappa,
        flag="ok" if kept else "insufficient_data",
    )


def binary_entropy(x: float) -> float:
    """Shannon entropy of a bit with bias x, in bits."""
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def secure_fraction(qber: float) -> float:
    """Asymptotic BB84 secret fraction, max(0, 1 - 2 h2(QBER)).

    Vanishes at the 11% QBER threshold; error-correction inefficiency and
    finite-key effects are out of scope.
    """
    if not 0.0 <= qber <= 0.5:
        raise ValidationError(f"qber must be in [0, 0.5], got {qber}")
    return max(0.0, 1.0 - 2.0 * binary_entropy(qber))


def run_session(config: ScenarioConfig) -> list[BlockStats]:
    """Execute a block-wise BB84 session described by ``config``.

    Blocks are spaced ``block_duration_s`` apart on the drift clock; within
    each block a contiguous stretch of ``symbols_per_block`` slots is
    simulated and its kept bits are reported as a rate over the simulated
    quantum time. With ``classical.enabled`` the data channel toggles per
    block (first block off), adding its crosstalk to the background.
    A block whose expected detector load exceeds 10 counts per dead time is
    flagged ``saturated`` and not simulated.
    """
    stats: list[BlockStats] = []
    axis_rng = rng_from(mix64(config.rng_seed, _TAG_AXIS))
    axis = axis_rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    n = config.symbols_per_block
    sim_duration = n / config.source.symbol_rate

    for block in range(config.blocks):
        kappa = config.coexist.active and block % 2 == 1
        xtalk = crosstalk_background(
            replace(config.coexist, active=kappa), config.classical.launch_power_dbm)
        bg = config.background.with_crosstalk(xtalk)

        if detector_load(config.source, config.channel, config.detector, bg) \
                * config.detector.dead_time > 10.0:
            stats.append(BlockStats(
                block_start=block * config.block_duration_s,
                block_duration=sim_duration,
                raw_key_rate=0.0, qber=0.0, gated_clicks=0,
                kappa=kappa, flag="saturated"))
            continue

        alice = alice_generate(n, mix64(config.rng_seed, block, _TAG_ALICE))
        schedule = RandomAnalyzerSchedule(mix64(config.rng_seed, block, _TAG_SCHEDULE))
        clicks = simulate_clicks(
            alice, config.source, config.channel, config.detector, bg,
            analyzer_schedule=schedule,
            rng_seed=mix64(config.rng_seed, block, _TAG_CLICKS),
            intrinsic_error=config.intrinsic_error,
            start_time=block * config.block_duration_s,
            drift_axis=axis,
        )
        sifted = sift(alice, clicks)
        stats.append(estimate_block_stats(
            sifted, sim_duration,
            gated_clicks=clicks.gated_count(),
            block_start=block * config.block_duration_s,
            kappa=kappa,
        ))
    return stats
