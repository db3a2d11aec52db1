"""Monte Carlo sweeps: BER, visited nodes, misses of m-Mw, analytic overlay.

Every trial draws from its own counter-based generator keyed by
``(base_seed, snr_index)`` with the trial index in the Philox counter, so
results do not depend on how trials are scheduled. Per-point statistics
are integer sums; the analytic overlay is averaged in a fixed order.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .analysis import NumericFailure, Scenario, expected_complexity, max_complexity_reduction
from .core import (
    ChannelPair,
    CsirModel,
    InvalidArgument,
    apply_csir_error,
    build_qam,
    enumerate_candidates,
    sample_channel,
    sample_noise,
    snr_db_to_noise_var,
    split_bits,
)
from .decode import SignalMetrics, ml_decode, mm_decode, mmw_decode

__all__ = [
    "DECODERS",
    "SweepConfig",
    "TrialRecord",
    "SweepPoint",
    "SweepResult",
    "OptimalityViolation",
    "trial_rng",
    "draw_instance",
    "run_trial",
    "run_sweep",
    "nom_study",
    "resolve_workers",
]

log = logging.getLogger(__name__)

DECODERS = ("ml", "mm", "mmw")
_DECODE = {"ml": ml_decode, "mm": mm_decode, "mmw": mmw_decode}

_TRIAL_STREAM = 0
_ANALYTIC_STREAM = 1


class OptimalityViolation(AssertionError):
    """m-M returned a different combination than exhaustive ML."""


@dataclass(frozen=True)
class SweepConfig:
    M: int
    N_t: int
    N_r: int
    snr_db_points: tuple
    csir: CsirModel = field(default_factory=CsirModel.perfect)
    trials: int = 10_000
    decoders: tuple = DECODERS
    base_seed: int = 0
    analytic_realizations: int = 200
    workers: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "snr_db_points", tuple(float(s) for s in self.snr_db_points))
        object.__setattr__(self, "decoders", tuple(d for d in DECODERS if d in set(self.decoders)))
        if self.trials < 1:
            raise InvalidArgument("trials must be >= 1")
        if not all(math.isfinite(s) for s in self.snr_db_points):
            raise InvalidArgument("SNR points must be finite")
        if not self.decoders:
            raise InvalidArgument("at least one decoder is required")
        if self.analytic_realizations < 0:
            raise InvalidArgument("analytic_realizations must be >= 0")
        if not 0 <= self.base_seed < 2**64:
            raise InvalidArgument("base_seed must be a 64-bit unsigned integer")
        build_qam(self.M)
        if self.N_t < 1 or self.N_t & (self.N_t - 1) or self.N_r < 1:
            raise InvalidArgument("N_t must be a power of two and N_r >= 1")

    @property
    def K(self) -> int:
        return self.M * self.N_t

    @property
    def bits_per_frame(self) -> int:
        return (self.K).bit_length() - 1

    def scenario(self, snr_db: float) -> Scenario:
        return Scenario(self.M, self.N_t, self.N_r, snr_db_to_noise_var(snr_db), self.csir)


@dataclass(frozen=True)
class TrialRecord:
    snr_db: float
    tx_index: int
    index: dict
    bit_errors: dict
    visited_nodes: dict
    nom_flag: Optional[bool]
    mm_matches_ml: Optional[bool]


def trial_rng(base_seed: int, snr_index: int, trial_index: int, stream: int = _TRIAL_STREAM):
    """Generator for one trial; a pure function of its arguments."""
    key = np.random.SeedSequence([base_seed, stream, snr_index]).generate_state(2, np.uint64)
    counter = np.array([0, 0, 0, trial_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def draw_instance(rng, config: SweepConfig, snr_db: float, constellation=None):
    """Draw bits, channel, receiver estimate and noise for one frame.

    Returns ``(tx_index, channel_pair, y)``. Draw order: frame bits, channel,
    estimation error (imperfect CSIR only), noise.
    """
    c = constellation if constellation is not None else build_qam(config.M)
    sigma_n2 = snr_db_to_noise_var(snr_db)
    bits = rng.integers(0, 2, size=config.bits_per_frame)
    antenna, symbol = split_bits(bits, config.N_t, config.M)
    h = sample_channel(rng, config.N_r, config.N_t)
    channel = apply_csir_error(h, config.csir, 1.0 / sigma_n2, rng)
    w = sample_noise(rng, config.N_r, sigma_n2)
    y = h[:, antenna] * c.points[symbol] + w
    return antenna * config.M + symbol, channel, y


def run_trial(rng, config: SweepConfig, snr_db: float, constellation=None) -> TrialRecord:
    """One SM frame over one channel realization, decoded by every detector.

    All detectors see the same channel, estimate, bits and noise.
    """
    c = constellation if constellation is not None else build_qam(config.M)
    tx, channel, y = draw_instance(rng, config, snr_db, c)

    metrics = SignalMetrics(y, enumerate_candidates(channel, c))
    index, errors, visited = {}, {}, {}
    for name in config.decoders:
        out = _DECODE[name](metrics)
        index[name] = out.index
        errors[name] = (out.index ^ tx).bit_count()
        visited[name] = out.visited_nodes
    nom = index["mmw"] != index["ml"] if {"ml", "mmw"} <= index.keys() else None
    match = index["mm"] == index["ml"] if {"ml", "mm"} <= index.keys() else None
    return TrialRecord(snr_db, tx, index, errors, visited, nom, match)


@dataclass
class SweepPoint:
    snr_db: float
    trials: int
    bits_per_frame: int
    bit_errors: dict
    visited_nodes: dict
    nom_count: Optional[int]
    mm_mismatches: int
    c_r_max: float
    total_nodes: int
    analytic_c_mm: float = math.nan
    analytic_error: Optional[str] = None

    def ber(self, decoder: str) -> float:
        if decoder not in self.bit_errors:
            return math.nan
        return self.bit_errors[decoder] / (self.trials * self.bits_per_frame)

    def avg_nodes(self, decoder: str) -> float:
        if decoder not in self.visited_nodes:
            return math.nan
        return self.visited_nodes[decoder] / self.trials

    def c_r(self, decoder: str) -> float:
        return 1.0 - self.avg_nodes(decoder) / self.total_nodes

    @property
    def c_r_analytic(self) -> float:
        return 1.0 - self.analytic_c_mm / self.total_nodes


@dataclass
class SweepResult:
    config: SweepConfig
    points: list

    def column(self, name: str) -> list:
        return [row[name] for row in self.rows()]

    def rows(self) -> list:
        """Flat per-SNR records in the sweep CSV schema."""
        out = []
        for p in self.points:
            out.append(
                {
                    "snr_db": p.snr_db,
                    "ber_ml": p.ber("ml"),
                    "ber_mm": p.ber("mm"),
                    "ber_mmw": p.ber("mmw"),
                    "avg_nodes_ml": p.avg_nodes("ml"),
                    "avg_nodes_mm": p.avg_nodes("mm"),
                    "c_r_mm": p.c_r("mm"),
                    "c_r_max": p.c_r_max,
                    "nom_count": p.nom_count,
                    "analytic_c_mm": p.analytic_c_mm,
                }
            )
        return out

    @property
    def numeric_failures(self) -> list:
        return [(p.snr_db, p.analytic_error) for p in self.points if p.analytic_error]


def resolve_workers(requested: Optional[int] = None) -> int:
    """Worker count, capped by ``SM_THREADS`` when set."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("SM_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise InvalidArgument(f"SM_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


def _run_chunk(config: SweepConfig, snr_index: int, start: int, stop: int):
    snr_db = config.snr_db_points[snr_index]
    c = build_qam(config.M)
    errors = dict.fromkeys(config.decoders, 0)
    visited = dict.fromkeys(config.decoders, 0)
    nom = 0
    mismatches = 0
    for t in range(start, stop):
        rec = run_trial(trial_rng(config.base_seed, snr_index, t), config, snr_db, c)
        for name in config.decoders:
            errors[name] += rec.bit_errors[name]
            visited[name] += rec.visited_nodes[name]
        nom += bool(rec.nom_flag)
        mismatches += rec.mm_matches_ml is False
    return snr_index, errors, visited, nom, mismatches


def analytic_average(config: SweepConfig, snr_index: int) -> float:
    """Predicted m-M visited nodes averaged over fresh ``(x_t, H)`` draws.

    The candidates are built from the true channel; channel-estimation
    error enters the prediction through its variances only.
    """
    snr_db = config.snr_db_points[snr_index]
    scenario = config.scenario(snr_db)
    c = scenario.constellation
    total = 0.0
    for r in range(config.analytic_realizations):
        rng = trial_rng(config.base_seed, snr_index, r, stream=_ANALYTIC_STREAM)
        h = sample_channel(rng, config.N_r, config.N_t)
        t = int(rng.integers(config.K))
        total += expected_complexity(scenario, t, enumerate_candidates(ChannelPair(h, h), c))
    return total / config.analytic_realizations


def _chunks(trials: int, n: int):
    size = -(-trials // n)
    return [(s, min(trials, s + size)) for s in range(0, trials, size)]


def run_sweep(config: SweepConfig, schedule: Optional[Sequence[int]] = None) -> SweepResult:
    """Aggregate ``config.trials`` trials at every SNR point.

    Parameters
    ----------
    config : SweepConfig
    schedule : sequence of int, optional
        Order in which trial chunks are submitted. Only useful for testing
        that the result does not depend on it.

    Raises
    ------
    OptimalityViolation
        If m-M and ML disagree on any trial.
    """
    workers = resolve_workers(config.workers)
    n_chunks = workers * 4 if workers > 1 else 1
    tasks = [
        (config, i, a, b)
        for i in range(len(config.snr_db_points))
        for a, b in _chunks(config.trials, n_chunks)
    ]
    if schedule is not None:
        tasks = [tasks[k] for k in schedule]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, *zip(*tasks)))
    else:
        parts = [_run_chunk(*task) for task in tasks]

    n_pts = len(config.snr_db_points)
    errors = [dict.fromkeys(config.decoders, 0) for _ in range(n_pts)]
    visited = [dict.fromkeys(config.decoders, 0) for _ in range(n_pts)]
    nom = [0] * n_pts
    mism = [0] * n_pts
    for i, e, v, n, m in parts:
        for name in config.decoders:
            errors[i][name] += e[name]
            visited[i][name] += v[name]
        nom[i] += n
        mism[i] += m

    has_nom = {"ml", "mmw"} <= set(config.decoders)
    c_r_max = max_complexity_reduction(config.M, config.N_t, config.N_r)
    points = []
    for i, snr_db in enumerate(config.snr_db_points):
        if mism[i]:
            raise OptimalityViolation(f"m-M missed the ML solution {mism[i]} times at {snr_db} dB")
        p = SweepPoint(
            snr_db,
            config.trials,
            config.bits_per_frame,
            errors[i],
            visited[i],
            nom[i] if has_nom else None,
            mism[i],
            c_r_max,
            config.K * config.N_r,
        )
        if config.analytic_realizations:
            try:
                p.analytic_c_mm = analytic_average(config, i)
            except NumericFailure as exc:
                log.warning("analytic prediction failed at %s dB: %s", snr_db, exc)
                p.analytic_error = str(exc)
        points.append(p)
    return SweepResult(config, points)


def nom_study(config: SweepConfig) -> list:
    """``(snr_db, nom_count, trials)`` for m-Mw against ML at each SNR."""
    if not {"ml", "mmw"} <= set(config.decoders):
        raise InvalidArgument("the miss study needs both the ml and mmw decoders")
    cfg = SweepConfig(
        config.M,
        config.N_t,
        config.N_r,
        config.snr_db_points,
        config.csir,
        config.trials,
        ("ml", "mmw"),
        config.base_seed,
        0,
        config.workers,
    )
    return [(p.snr_db, p.nom_count, p.trials) for p in run_sweep(cfg).points]
