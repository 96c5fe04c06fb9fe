"""Closed-form error analysis for the RSM link.

Spatial bit errors come from the Rice/Rayleigh envelope tails around
the detection threshold (Marcum Q with a perfect threshold, non-central
and doubly non-central t CDFs when the threshold is pilot-estimated).
Modulation bit errors are assembled by enumerating every transmitted/
detected spatial word pair, weighing each by its product-Bernoulli
transition probability, and applying the Gray-coded constellation BEP
at the combining SNR that pair produces. The overall average bit error
probability is the rate-weighted mix of the two.

For non-constant-modulus constellations the energized-branch envelope
depends on which symbol was sent, so the miss probability is averaged
over the constellation's power levels; for PSK this collapses to the
single-amplitude expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .phy import Constellation, threshold
from .specfun import (
    doubly_noncentral_t_cdf,
    gaussian_q,
    marcum_q1,
    noncentral_t_cdf,
)

__all__ = [
    "TransitionCounts",
    "AbepBreakdown",
    "spatial_error_probs_perfect",
    "spatial_error_probs_estimated",
    "transition_probability",
    "modulation_error_prob",
    "constellation_bep",
    "abep",
]


@dataclass(frozen=True)
class TransitionCounts:
    """Per-antenna agreement counts between a sent and a detected word.

    ``b11`` counts antennas energized and flagged, ``b10`` energized but
    missed, ``b01`` silent but flagged, ``b00`` silent and unflagged.
    """

    b11: int
    b10: int
    b01: int
    b00: int

    def __post_init__(self) -> None:
        if min(self.b11, self.b10, self.b01, self.b00) < 0:
            raise ValueError("transition counts must be nonnegative")

    @property
    def n_active(self) -> int:
        return self.b11 + self.b10 + self.b01 + self.b00

    @classmethod
    def from_words(cls, sent: int, detected: int, n_active: int) -> "TransitionCounts":
        """Counts for integer-encoded words (bit k = antenna k)."""
        mask = (1 << n_active) - 1
        sent &= mask
        detected &= mask
        b11 = bin(sent & detected).count("1")
        b10 = bin(sent & ~detected & mask).count("1")
        b01 = bin(~sent & detected & mask).count("1")
        return cls(b11=b11, b10=b10, b01=b01, b00=n_active - b11 - b10 - b01)


@dataclass(frozen=True)
class AbepBreakdown:
    """Per-SNR error probabilities: spatial, modulation, and their mix."""

    p_es: float
    p_em: float
    abep: float
    p1: float
    p0: float

    def __post_init__(self) -> None:
        for name in ("p_es", "p_em", "abep", "p1", "p0"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be a probability, got {value!r}")


def spatial_error_probs_perfect(
    gamma: float, alpha_p: float, sigma2: float
) -> tuple[float, float]:
    """Miss and false-alarm probabilities with a known threshold.

    P1 is the Rice CDF of an energized branch (amplitude sqrt(alpha_p))
    at gamma; P0 is the Rayleigh tail of a silent branch above gamma.
    """
    if gamma < 0 or alpha_p < 0 or sigma2 <= 0:
        raise ValueError("gamma, alpha_p must be >= 0 and sigma2 > 0")
    sigma = math.sqrt(sigma2)
    p1 = 1.0 - marcum_q1(math.sqrt(2.0 * alpha_p) / sigma, math.sqrt(2.0) * gamma / sigma)
    p0 = math.exp(-gamma * gamma / sigma2)
    return p1, p0


def spatial_error_probs_estimated(
    stats: tuple[float, float], alpha_p: float, sigma2: float
) -> tuple[float, float]:
    """Miss/false-alarm probabilities under a Gaussian threshold estimate.

    ``stats`` is the (mean, variance) of the estimated threshold. The
    ratio of the Gaussian threshold to a Rice envelope is a doubly
    non-central t variate (2 degrees of freedom, numerator
    non-centrality mean/std, denominator non-centrality
    2*alpha_p/sigma2); against a Rayleigh envelope the denominator
    non-centrality vanishes.
    """
    mean, variance = stats
    if variance <= 0:
        raise ValueError("threshold estimate variance must be positive")
    std = math.sqrt(variance)
    delta = mean / std
    ratio = math.sqrt(sigma2) / std
    lam = 2.0 * alpha_p / sigma2
    p1 = 1.0 - doubly_noncentral_t_cdf(ratio, 2.0, delta, lam)
    p0 = noncentral_t_cdf(ratio, 2.0, delta)
    return p1, p0


def _power_levels(constellation: Constellation) -> tuple[np.ndarray, np.ndarray]:
    """Distinct symbol power levels and their probabilities."""
    powers = np.round(np.abs(constellation.points) ** 2, 12)
    levels, counts = np.unique(powers, return_counts=True)
    return levels, counts / counts.sum()


def _level_averaged_p1(
    constellation: Constellation,
    alpha_p: float,
    sigma2: float,
    gamma: float | None,
    stats: tuple[float, float] | None,
) -> float:
    """Miss probability averaged over the constellation power levels.

    Exactly one of ``gamma`` (perfect threshold) or ``stats`` (estimated
    threshold) must be given. Constant-modulus sets reduce to a single
    evaluation at the nominal power.
    """
    levels, weights = _power_levels(constellation)
    p1 = 0.0
    for level, weight in zip(levels, weights):
        branch_power = alpha_p * float(level)
        if gamma is not None:
            p1_level, _ = spatial_error_probs_perfect(gamma, branch_power, sigma2)
        else:
            p1_level, _ = spatial_error_probs_estimated(stats, branch_power, sigma2)
        p1 += float(weight) * p1_level
    return p1


def transition_probability(counts: TransitionCounts, p1: float, p0: float) -> float:
    """Probability of one detected word given the sent word.

    Independent per-antenna decisions: misses with probability p1 on
    energized branches, false alarms with probability p0 on silent ones.
    """
    return (
        p1**counts.b10
        * (1.0 - p1) ** counts.b11
        * p0**counts.b01
        * (1.0 - p0) ** counts.b00
    )


def constellation_bep(constellation: Constellation, snr: float) -> float:
    """Gray-coded approximate bit error probability at the given SNR.

    PSK and square QAM use the standard closed forms; 16-APSK uses a
    nearest-neighbour union bound over the 4+12 layout. These are
    approximations tied to Gray labeling, good to roughly 10% through
    the waterfall region.
    """
    if snr < 0:
        raise ValueError("snr must be nonnegative")
    m = constellation.order
    k = constellation.bits_per_symbol
    if constellation.kind == "psk":
        if m == 2:
            return gaussian_q(math.sqrt(2.0 * snr))
        return min(1.0, (2.0 / k) * gaussian_q(math.sqrt(2.0 * snr) * math.sin(math.pi / m)))
    if constellation.kind == "qam":
        return min(
            1.0,
            (4.0 / k) * (1.0 - 1.0 / math.sqrt(m)) * gaussian_q(math.sqrt(3.0 * snr / (m - 1))),
        )
    # Near-neighbour union bound, weighting each pair by its Hamming
    # distance under the shipped labeling. The 4+12 layout has a second
    # distance shell under 4% beyond the first, so the neighbourhood
    # window is 1.10 * d_min; measured against Monte Carlo this keeps
    # the bound within ~6% through the 10-18 dB waterfall.
    points = constellation.points
    bits = constellation.label_bits
    total = 0.0
    for i in range(m):
        dists = np.abs(points - points[i])
        dists[i] = np.inf
        d_min = float(dists.min())
        for j in np.flatnonzero(dists <= d_min * 1.10):
            d_h = int(np.sum(bits[i] != bits[j]))
            total += d_h * gaussian_q(float(dists[j]) * math.sqrt(snr / 2.0))
    return min(1.0, total / (m * k))


def modulation_error_prob(
    constellation: Constellation,
    alpha_p: float,
    sigma2: float,
    n_active: int,
    p1: float,
    p0: float,
) -> float:
    """Average modulation bit error probability over spatial transitions.

    Enumerates every sent word (uniform over the 2^n_active - 1 legal
    ones) against every detected word including all-zero. A pair with no
    correctly flagged branch leaves the combiner with noise only, so its
    conditional BEP is 1/2; otherwise the conditional BEP is evaluated
    at the pair's combining SNR.
    """
    if not (0.0 <= p1 <= 1.0 and 0.0 <= p0 <= 1.0):
        raise ValueError("p1 and p0 must be probabilities")
    n_words = 1 << n_active
    prior = 1.0 / (n_words - 1)
    snr_base = alpha_p / sigma2
    total = 0.0
    for sent in range(1, n_words):
        for detected in range(n_words):
            counts = TransitionCounts.from_words(sent, detected, n_active)
            prob = transition_probability(counts, p1, p0)
            if prob == 0.0:
                continue
            if counts.b11 == 0:
                bep = 0.5
            else:
                snr_c = counts.b11**2 / (counts.b11 + counts.b01) * snr_base
                bep = constellation_bep(constellation, snr_c)
            total += bep * prob * prior
    return total


def abep(
    constellation: Constellation,
    n_active: int,
    alpha: float,
    snr_db_grid,
    threshold_mode: str = "hsa",
    n_pilot_samples: int | None = None,
    sigma2: float = 1.0,
) -> list[tuple[float, AbepBreakdown]]:
    """Average bit error probability across an SNR grid.

    ``alpha`` is the zero-forcing power factor of the link under study;
    each grid point has transmit power 10^(snr_db/10) * sigma2. With
    ``n_pilot_samples`` set, the spatial probabilities model a threshold
    estimated from that many pilot envelopes (high-SNR design);
    otherwise the threshold of ``threshold_mode`` is assumed known.
    """
    from .training import threshold_estimate_stats  # local: avoid cycle at import

    if alpha <= 0 or sigma2 <= 0:
        raise ValueError("alpha and sigma2 must be positive")
    beta = constellation.beta
    k = constellation.bits_per_symbol
    out: list[tuple[float, AbepBreakdown]] = []
    for snr_db in snr_db_grid:
        alpha_p = alpha * sigma2 * 10.0 ** (float(snr_db) / 10.0)
        if n_pilot_samples is None:
            gamma = threshold(threshold_mode, alpha_p, sigma2, beta).gamma
            p1 = _level_averaged_p1(constellation, alpha_p, sigma2, gamma, None)
            _, p0 = spatial_error_probs_perfect(gamma, alpha_p, sigma2)
        else:
            stats = threshold_estimate_stats(beta * alpha_p, sigma2, n_pilot_samples)
            p1 = _level_averaged_p1(constellation, alpha_p, sigma2, None, stats)
            _, p0 = spatial_error_probs_estimated(stats, alpha_p, sigma2)
        p_es = 0.5 * (p1 + p0)
        p_em = modulation_error_prob(constellation, alpha_p, sigma2, n_active, p1, p0)
        value = (n_active * p_es + k * p_em) / (n_active + k)
        out.append(
            (float(snr_db), AbepBreakdown(p_es=p_es, p_em=p_em, abep=value, p1=p1, p0=p0))
        )
    return out
