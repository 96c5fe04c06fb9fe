"""Monte Carlo engine for the RSM link and the fully digital baseline.

One run sweeps an SNR grid; at each grid point a fixed ensemble of
channel realizations is exercised with a block of data words per
channel. Every random quantity is drawn from a stream keyed by
(master seed, purpose tag, snr index, channel index), so results are
bit-identical regardless of how blocks are scheduled across worker
threads; error counts are integers and are reduced in index order.

The channel ensemble is drawn once per run and shared by all SNR
points, which pairs the analytic and simulated curves (and different
runs under the same seed) on common randomness.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .baseline import fd_ber, svd_link
from .channel import ChannelParams, draw_channel
from .mimo import select_antennas, selection_for_indices, zf_precoder
from .phy import Constellation, build_constellation, threshold
from .training import DegenerateSample, PilotObservation, SingularFisher, estimate_amplitude

__all__ = [
    "PointAborted",
    "RsmConfig",
    "FdConfig",
    "SnrPoint",
    "ErrorReport",
    "run",
    "run_fd",
]

log = logging.getLogger(__name__)

SELECTION_MODES = ("exhaustive", "all_antennas")
THRESHOLD_SOURCES = ("perfect", "estimated")

# Purpose tags for random-stream keying.
_TAG_CHANNEL = 1
_TAG_PILOT = 2
_TAG_DATA = 3
_TAG_FD = 4

#: abort an SNR point when more than this fraction of its trials error out
ERROR_BUDGET = 0.01


class PointAborted(RuntimeError):
    """Too many trial failures at one SNR point."""

    def __init__(self, snr_db: float, failed_fraction: float):
        super().__init__(
            f"aborted SNR point {snr_db:g} dB: {failed_fraction:.1%} of trials failed"
        )
        self.snr_db = snr_db
        self.failed_fraction = failed_fraction


@dataclass(frozen=True)
class RsmConfig:
    """Complete description of one RSM simulation experiment."""

    channel: ChannelParams
    n_active: int
    snr_grid_db: tuple[float, ...]
    constellation_kind: str = "psk"
    constellation_order: int = 16
    ring_ratio: float | None = None
    threshold_mode: str = "hsa"
    threshold_source: str = "perfect"
    n_pilots: int = 1
    trials_per_point: int = 500
    channels_per_point: int = 200
    seed: int = 0
    selection: str = "exhaustive"

    def __post_init__(self) -> None:
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        if not self.snr_grid_db:
            raise ValueError("snr_grid_db must not be empty")
        if self.trials_per_point < 1 or self.channels_per_point < 1:
            raise ValueError("trials_per_point and channels_per_point must be >= 1")
        if not 1 <= self.n_active <= self.channel.n_rx:
            raise ValueError("n_active must lie in [1, n_rx]")
        if self.threshold_source not in THRESHOLD_SOURCES:
            raise ValueError(f"threshold_source must be one of {THRESHOLD_SOURCES}")
        if self.selection not in SELECTION_MODES:
            raise ValueError(f"selection must be one of {SELECTION_MODES}")
        if self.n_pilots < 1:
            raise ValueError("n_pilots must be >= 1")

    @property
    def bits_per_word(self) -> int:
        order_bits = self.constellation_order.bit_length() - 1
        return self.n_active + order_bits


@dataclass(frozen=True)
class FdConfig:
    """Fully digital SVD baseline experiment."""

    channel: ChannelParams
    snr_grid_db: tuple[float, ...]
    n_modes: int = 2
    constellation_kind: str = "qam"
    constellation_order: int = 16
    ring_ratio: float | None = None
    trials_per_point: int = 500
    channels_per_point: int = 200
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        if not self.snr_grid_db:
            raise ValueError("snr_grid_db must not be empty")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if self.trials_per_point < 1 or self.channels_per_point < 1:
            raise ValueError("trials_per_point and channels_per_point must be >= 1")


@dataclass(frozen=True)
class SnrPoint:
    """Aggregated results for one SNR grid point."""

    snr_db: float
    ber_total: float
    ber_spatial: float
    ber_modulation: float
    abep_analytic: float
    abep_analytic_estimated: float
    ci_halfwidth_95: float
    bits_counted: int


@dataclass(frozen=True)
class ErrorReport:
    """Per-SNR error rates for one experiment."""

    points: tuple[SnrPoint, ...]
    seed: int

    def snr_at_ber(self, target: float) -> float:
        """SNR (dB) where the total BER crosses ``target``, by log-linear
        interpolation; NaN when the curve never crosses."""
        snrs = np.array([p.snr_db for p in self.points])
        bers = np.array([p.ber_total for p in self.points])
        return float(interpolate_snr_at(snrs, bers, target))


def interpolate_snr_at(snr_db: np.ndarray, ber: np.ndarray, target: float) -> float:
    """Log-linear interpolation of the SNR where a BER curve hits target."""
    for i in range(len(snr_db) - 1):
        hi, lo = ber[i], ber[i + 1]
        if hi >= target > lo and lo > 0:
            t = (math.log(target) - math.log(hi)) / (math.log(lo) - math.log(hi))
            return snr_db[i] + t * (snr_db[i + 1] - snr_db[i])
    return math.nan


@dataclass
class _Link:
    """Per-channel state reused across SNR points."""

    alpha: float
    effective: np.ndarray  # H_a @ B, identity up to ZF numerics
    index: int
    analytic: dict = field(default_factory=dict)


def _build_links(config: RsmConfig) -> list[_Link]:
    links = []
    for ch_idx in range(config.channels_per_point):
        rng = np.random.default_rng([config.seed, _TAG_CHANNEL, ch_idx])
        h = draw_channel(config.channel, rng).matrix
        if config.selection == "exhaustive":
            sel = select_antennas(h, config.n_active)
        else:
            sel = selection_for_indices(h, tuple(range(config.n_active)))
        pre = zf_precoder(sel.h_active)
        links.append(
            _Link(alpha=pre.alpha, effective=sel.h_active @ pre.matrix_b, index=ch_idx)
        )
    return links


def _pilot_threshold(
    config: RsmConfig,
    link: _Link,
    constellation: Constellation,
    alpha_p: float,
    sigma2: float,
    snr_idx: int,
) -> float:
    """Estimate the detection threshold from a simulated pilot phase.

    Pilots energize every active antenna and carry the minimum-amplitude
    constellation point, so the estimated threshold matches the
    beta-scaled data threshold design.
    """
    rng = np.random.default_rng([config.seed, _TAG_PILOT, snr_idx, link.index])
    n_a = config.n_active
    x_pilot = constellation.points[int(np.argmin(np.abs(constellation.points)))]
    clean = math.sqrt(alpha_p) * x_pilot * (link.effective @ np.ones(n_a))
    noise = math.sqrt(sigma2 / 2.0) * (
        rng.standard_normal((config.n_pilots, n_a))
        + 1j * rng.standard_normal((config.n_pilots, n_a))
    )
    amps = np.abs(clean[None, :] + noise).ravel()
    obs = PilotObservation(amplitudes=amps, n_pilots=config.n_pilots, n_active=n_a)
    return 0.5 * estimate_amplitude(obs)


@dataclass
class _BlockCounts:
    spatial_errors: int = 0
    modulation_errors: int = 0
    words: int = 0
    failed: int = 0


def _run_block(
    config: RsmConfig,
    constellation: Constellation,
    link: _Link,
    snr_idx: int,
) -> _BlockCounts:
    """Simulate one (SNR point, channel) block of data words."""
    sigma2 = 1.0
    power = 10.0 ** (config.snr_grid_db[snr_idx] / 10.0) * sigma2
    alpha_p = link.alpha * power
    trials = config.trials_per_point
    if config.threshold_source == "perfect":
        gamma = threshold(
            config.threshold_mode, alpha_p, sigma2, constellation.beta
        ).gamma
    else:
        try:
            gamma = _pilot_threshold(config, link, constellation, alpha_p, sigma2, snr_idx)
        except DegenerateSample:
            return _BlockCounts(failed=trials)

    rng = np.random.default_rng([config.seed, _TAG_DATA, snr_idx, link.index])
    n_a = config.n_active
    sent = rng.integers(1, 1 << n_a, size=trials)
    s_bits = ((sent[:, None] >> np.arange(n_a)) & 1).astype(float)
    js = rng.integers(0, constellation.order, size=trials)
    symbols = constellation.points[js]
    clean = math.sqrt(alpha_p) * (s_bits * symbols[:, None]) @ link.effective.T
    noise = math.sqrt(sigma2 / 2.0) * (
        rng.standard_normal((trials, n_a)) + 1j * rng.standard_normal((trials, n_a))
    )
    y = clean + noise

    s_hat = (np.abs(y) > gamma).astype(np.int64)
    detected = (s_hat << np.arange(n_a)).sum(axis=1)
    spatial_errors = int(np.bitwise_count(sent ^ detected).sum())

    n_hat = s_hat.sum(axis=1)
    y_c = (y * s_hat).sum(axis=1)
    dists = np.abs(
        y_c[:, None] - math.sqrt(alpha_p) * n_hat[:, None] * constellation.points[None, :]
    )
    j_hat = np.argmin(dists, axis=1)
    j_hat[n_hat == 0] = 0
    modulation_errors = int(
        np.bitwise_count(constellation.labels[js] ^ constellation.labels[j_hat]).sum()
    )
    return _BlockCounts(
        spatial_errors=spatial_errors,
        modulation_errors=modulation_errors,
        words=trials,
    )


def _analytic_columns(
    config: RsmConfig, constellation: Constellation, links: list[_Link], snr_db: float
) -> tuple[float, float]:
    """Channel-averaged analytic ABEP, perfect and pilot-estimated."""
    perfect_vals, estimated_vals = [], []
    n_samples = config.n_pilots * config.n_active
    for link in links:
        key = snr_db
        if key not in link.analytic:
            (_, perfect), = analysis.abep(
                constellation,
                config.n_active,
                link.alpha,
                [snr_db],
                threshold_mode=config.threshold_mode,
            )
            try:
                (_, estimated), = analysis.abep(
                    constellation,
                    config.n_active,
                    link.alpha,
                    [snr_db],
                    n_pilot_samples=n_samples,
                )
                est_val = estimated.abep
            except SingularFisher:
                est_val = math.nan
            link.analytic[key] = (perfect.abep, est_val)
        p, e = link.analytic[key]
        perfect_vals.append(p)
        estimated_vals.append(e)
    return float(np.mean(perfect_vals)), float(np.nanmean(estimated_vals))


def analytic_curves(config: RsmConfig) -> list[tuple[float, float, float]]:
    """(snr_db, perfect ABEP, estimated ABEP) rows without any sampling.

    Uses the same channel ensemble and averaging as :func:`run`, so the
    analytic columns agree with a full simulation under the same seed.
    """
    constellation = build_constellation(
        config.constellation_kind, config.constellation_order, config.ring_ratio
    )
    links = _build_links(config)
    return [
        (snr_db, *_analytic_columns(config, constellation, links, snr_db))
        for snr_db in config.snr_grid_db
    ]


def analytic_curves_fd(config: FdConfig) -> list[tuple[float, float, float]]:
    """Analytic rows for the fully digital baseline (estimated column NaN)."""
    constellation = build_constellation(
        config.constellation_kind, config.constellation_order, config.ring_ratio
    )
    sigma2 = 1.0
    rows = []
    for snr_db in config.snr_grid_db:
        power = 10.0 ** (snr_db / 10.0) * sigma2
        values = []
        for ch_idx in range(config.channels_per_point):
            rng = np.random.default_rng([config.seed, _TAG_CHANNEL, ch_idx])
            h = draw_channel(config.channel, rng).matrix
            link = svd_link(h, power, config.n_modes)
            mode_snr = float(link.received_power_per_mode[0] / sigma2)
            values.append(analysis.constellation_bep(constellation, mode_snr))
        rows.append((snr_db, float(np.mean(values)), math.nan))
    return rows


def run(config: RsmConfig, n_threads: int = 1) -> ErrorReport:
    """Execute the full RSM experiment described by ``config``."""
    constellation = build_constellation(
        config.constellation_kind, config.constellation_order, config.ring_ratio
    )
    links = _build_links(config)
    n_snr = len(config.snr_grid_db)
    blocks = [(s, c) for s in range(n_snr) for c in range(len(links))]

    def work(block: tuple[int, int]) -> tuple[int, int, _BlockCounts]:
        snr_idx, ch_idx = block
        return snr_idx, ch_idx, _run_block(config, constellation, links[ch_idx], snr_idx)

    results: dict[tuple[int, int], _BlockCounts] = {}
    if n_threads <= 1:
        for block in blocks:
            snr_idx, ch_idx, counts = work(block)
            results[(snr_idx, ch_idx)] = counts
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            for snr_idx, ch_idx, counts in pool.map(work, blocks):
                results[(snr_idx, ch_idx)] = counts

    k = constellation.bits_per_symbol
    bits_per_word = config.n_active + k
    points = []
    for snr_idx, snr_db in enumerate(config.snr_grid_db):
        spatial = modulation = words = failed = 0
        for ch_idx in range(len(links)):
            counts = results[(snr_idx, ch_idx)]
            spatial += counts.spatial_errors
            modulation += counts.modulation_errors
            words += counts.words
            failed += counts.failed
        total_words = words + failed
        if failed > ERROR_BUDGET * total_words:
            raise PointAborted(snr_db, failed / total_words)
        bits = words * bits_per_word
        ber_total = (spatial + modulation) / bits if bits else math.nan
        ci = (
            1.96 * math.sqrt(max(ber_total * (1.0 - ber_total), 0.0) / bits)
            if bits
            else math.nan
        )
        abep_perfect, abep_estimated = _analytic_columns(
            config, constellation, links, snr_db
        )
        points.append(
            SnrPoint(
                snr_db=snr_db,
                ber_total=ber_total,
                ber_spatial=spatial / (words * config.n_active) if words else math.nan,
                ber_modulation=modulation / (words * k) if words else math.nan,
                abep_analytic=abep_perfect,
                abep_analytic_estimated=abep_estimated,
                ci_halfwidth_95=ci,
                bits_counted=bits,
            )
        )
        log.info(
            "snr=%g dB ber=%.3e (spatial %.3e, modulation %.3e, analytic %.3e)",
            snr_db,
            ber_total,
            points[-1].ber_spatial,
            points[-1].ber_modulation,
            abep_perfect,
        )
    return ErrorReport(points=tuple(points), seed=config.seed)


def run_fd(config: FdConfig, n_threads: int = 1) -> ErrorReport:
    """Execute the fully digital SVD baseline experiment."""
    constellation = build_constellation(
        config.constellation_kind, config.constellation_order, config.ring_ratio
    )
    channels = []
    for ch_idx in range(config.channels_per_point):
        rng = np.random.default_rng([config.seed, _TAG_CHANNEL, ch_idx])
        channels.append(draw_channel(config.channel, rng).matrix)

    sigma2 = 1.0
    k = constellation.bits_per_symbol
    n_snr = len(config.snr_grid_db)
    blocks = [(s, c) for s in range(n_snr) for c in range(len(channels))]

    def work(block: tuple[int, int]) -> tuple[int, int, int, float]:
        snr_idx, ch_idx = block
        power = 10.0 ** (config.snr_grid_db[snr_idx] / 10.0) * sigma2
        link = svd_link(channels[ch_idx], power, config.n_modes)
        rng = np.random.default_rng([config.seed, _TAG_FD, snr_idx, ch_idx])
        ber = fd_ber(link, constellation, sigma2, config.trials_per_point, rng)
        errors = round(ber * config.trials_per_point * config.n_modes * k)
        mode_snr = float(link.received_power_per_mode[0] / sigma2)
        return snr_idx, ch_idx, errors, mode_snr

    results: dict[tuple[int, int], tuple[int, float]] = {}
    if n_threads <= 1:
        for block in blocks:
            snr_idx, ch_idx, errors, mode_snr = work(block)
            results[(snr_idx, ch_idx)] = (errors, mode_snr)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            for snr_idx, ch_idx, errors, mode_snr in pool.map(work, blocks):
                results[(snr_idx, ch_idx)] = (errors, mode_snr)

    points = []
    bits_per_point = config.trials_per_point * config.n_modes * k
    for snr_idx, snr_db in enumerate(config.snr_grid_db):
        errors = 0
        analytic = []
        for ch_idx in range(len(channels)):
            e, mode_snr = results[(snr_idx, ch_idx)]
            errors += e
            analytic.append(analysis.constellation_bep(constellation, mode_snr))
        bits = bits_per_point * len(channels)
        ber = errors / bits
        points.append(
            SnrPoint(
                snr_db=snr_db,
                ber_total=ber,
                ber_spatial=0.0,
                ber_modulation=ber,
                abep_analytic=float(np.mean(analytic)),
                abep_analytic_estimated=math.nan,
                ci_halfwidth_95=1.96 * math.sqrt(max(ber * (1 - ber), 0.0) / bits),
                bits_counted=bits,
            )
        )
    return ErrorReport(points=tuple(points), seed=config.seed)
