"""Fully digital SVD baseline with equal-SNR mode power allocation.

The channel is diagonalized by its SVD; the strongest ``n_modes``
singular values carry independent streams whose transmit powers are
inversely proportional to the squared singular values, so every
activated mode sees the same received SNR. Detection happens in the
mode domain, which is statistically identical to applying the unitary
decoder to the antenna-domain signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .phy import Constellation

__all__ = ["RankDeficient", "SvdLink", "svd_link", "fd_ber"]

#: singular values below this fraction of the largest count as zero
RANK_TOL = 1e-10


class RankDeficient(ArithmeticError):
    """Channel does not support the requested number of modes."""


@dataclass(frozen=True)
class SvdLink:
    """SVD factors plus the equal-SNR power split over the active modes."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    n_modes: int
    power_per_mode: np.ndarray

    @property
    def mode_gains(self) -> np.ndarray:
        return self.s[: self.n_modes]

    @property
    def received_power_per_mode(self) -> np.ndarray:
        return self.power_per_mode * self.mode_gains**2


def svd_link(h: np.ndarray, power: float, n_modes: int) -> SvdLink:
    """Split ``power`` over the top ``n_modes`` modes at equal received SNR."""
    if power <= 0 or n_modes < 1:
        raise ValueError("power must be positive and n_modes >= 1")
    u, s, vh = np.linalg.svd(np.asarray(h))
    usable = int(np.sum(s > RANK_TOL * s[0])) if s.size else 0
    if usable < n_modes:
        raise RankDeficient(
            f"channel supports {usable} modes, {n_modes} requested"
        )
    inv_sq = 1.0 / s[:n_modes] ** 2
    p = power * inv_sq / inv_sq.sum()
    return SvdLink(u=u, s=s, v=vh.conj().T, n_modes=n_modes, power_per_mode=p)


def fd_ber(
    link: SvdLink,
    constellation: Constellation,
    sigma2: float,
    trials: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo bit error rate of the baseline, all modes combined.

    Each trial sends one symbol per active mode; minimum-distance
    detection runs per mode at that mode's (equalized) received SNR.
    """
    if sigma2 <= 0 or trials < 1:
        raise ValueError("sigma2 must be positive and trials >= 1")
    k = constellation.bits_per_symbol
    points = constellation.points
    labels = constellation.labels
    gains = np.sqrt(link.received_power_per_mode)  # per-mode amplitude
    errors = 0
    js = rng.integers(0, constellation.order, size=(trials, link.n_modes))
    noise = math.sqrt(sigma2 / 2.0) * (
        rng.standard_normal((trials, link.n_modes))
        + 1j * rng.standard_normal((trials, link.n_modes))
    )
    y = gains[None, :] * points[js] + noise
    for mode in range(link.n_modes):
        dists = np.abs(y[:, mode, None] - gains[mode] * points[None, :])
        j_hat = np.argmin(dists, axis=1)
        errors += int(np.bitwise_count(labels[js[:, mode]] ^ labels[j_hat]).sum())
    return errors / (trials * link.n_modes * k)
