"""RSM transceiver primitives.

Covers constellation construction with Gray bit labeling, spatial/
modulation encoding of a data word, zero-forcing transmit-vector
construction, per-antenna envelope measurement, the three amplitude
threshold designs (exact, moderate-SNR, high-SNR), per-antenna and
joint-ML spatial detection, and switch-and-combine modulation-symbol
detection.

Conventions: complex noise samples carry total variance sigma2 (half
per real component); a spatial word is a 0/1 vector over the active
antennas, never all-zero on the transmit side; thresholds are designed
for the minimum constellation symbol power ``beta * alpha_p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .mimo import Precoder
from .specfun import lambert_w_minus1_from_log, log_bessel_i0

__all__ = [
    "UnsupportedOrder",
    "IllegalSpatialWord",
    "NoRoot",
    "Constellation",
    "ThresholdSpec",
    "THRESHOLD_MODES",
    "build_constellation",
    "encode",
    "decode",
    "transmit",
    "receive_amplitudes",
    "threshold",
    "detect_spatial",
    "joint_ml_detect",
    "combine_and_detect_modulation",
]

THRESHOLD_MODES = ("exact", "msa", "hsa")


class UnsupportedOrder(ValueError):
    """Requested constellation size/kind combination is not available."""


class IllegalSpatialWord(ValueError):
    """The all-zero spatial word cannot be transmitted."""


class NoRoot(ArithmeticError):
    """Exact-threshold root bracketing failed (SNR too low to matter)."""


def _gray(n: int) -> int:
    return n ^ (n >> 1)


@dataclass(frozen=True)
class Constellation:
    """Unit-average-power symbol set with integer bit labels.

    ``labels[k]`` is the bit pattern carried by ``points[k]``; ``beta``
    is the minimum-to-average symbol power ratio that rescales the
    spatial detection threshold for non-constant-modulus sets.
    """

    kind: str
    order: int
    points: np.ndarray
    labels: np.ndarray
    ring_ratio: float | None = None
    _index_of_label: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self) -> None:
        mean_power = float(np.mean(np.abs(self.points) ** 2))
        if abs(mean_power - 1.0) > 1e-12:
            raise ValueError(f"average symbol power must be 1, got {mean_power!r}")
        if sorted(self.labels.tolist()) != list(range(self.order)):
            raise ValueError("labels must be a bijection onto 0..order-1")
        inverse = np.empty(self.order, dtype=np.int64)
        inverse[self.labels] = np.arange(self.order)
        object.__setattr__(self, "_index_of_label", inverse)

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    @property
    def beta(self) -> float:
        powers = np.abs(self.points) ** 2
        return float(powers.min() / powers.mean())

    @property
    def label_bits(self) -> np.ndarray:
        """(order, bits_per_symbol) 0/1 array, MSB first."""
        k = self.bits_per_symbol
        shifts = np.arange(k - 1, -1, -1)
        return (self.labels[:, None] >> shifts) & 1

    def index_of_label(self, label: int) -> int:
        """Point index carrying the given bit pattern."""
        return int(self._index_of_label[label])


def _psk_points(order: int) -> tuple[np.ndarray, np.ndarray]:
    angles = 2.0 * math.pi * np.arange(order) / order
    points = np.exp(1j * angles)
    labels = np.array([_gray(k) for k in range(order)], dtype=np.int64)
    return points, labels


def _qam_points(order: int) -> tuple[np.ndarray, np.ndarray]:
    side = math.isqrt(order)
    if side * side != order:
        raise UnsupportedOrder(f"square QAM needs a square order, got {order}")
    levels = np.arange(side) * 2.0 - (side - 1)
    k_axis = side.bit_length() - 1
    points, labels = [], []
    for col in range(side):
        for row in range(side):
            points.append(levels[col] + 1j * levels[row])
            labels.append((_gray(col) << k_axis) | _gray(row))
    points = np.array(points)
    points /= math.sqrt(float(np.mean(np.abs(points) ** 2)))
    return points, np.array(labels, dtype=np.int64)


def _apsk16_points(ring_ratio: float) -> tuple[np.ndarray, np.ndarray]:
    """4+12 dual-ring layout: 4 inner points on the quadrant diagonals,
    12 outer points at radius ``ring_ratio``, three per quadrant.

    Labels use two Gray-coded quadrant bits followed by two in-quadrant
    bits (00 inner, then 01/11/10 across the outer arc).
    """
    points, labels = [], []
    inner_local = [math.pi / 4]
    outer_local = [math.pi / 12, 3 * math.pi / 12, 5 * math.pi / 12]
    for quadrant in range(4):
        base = quadrant * math.pi / 2
        quad_bits = _gray(quadrant) << 2
        points.append(np.exp(1j * (base + inner_local[0])))
        labels.append(quad_bits | 0b00)
        for sub_bits, angle in zip((0b01, 0b11, 0b10), outer_local):
            points.append(ring_ratio * np.exp(1j * (base + angle)))
            labels.append(quad_bits | sub_bits)
    points = np.array(points)
    points /= math.sqrt(float(np.mean(np.abs(points) ** 2)))
    return points, np.array(labels, dtype=np.int64)


def build_constellation(
    kind: str, order: int, ring_ratio: float | None = None
) -> Constellation:
    """Construct a PSK, square QAM, or 16-APSK constellation.

    Orders are limited to powers of two up to 64; APSK additionally
    requires order 16 and a ring ratio above 1.
    """
    kind = kind.lower()
    if order < 2 or order > 64 or order & (order - 1):
        raise UnsupportedOrder(f"order must be a power of 2 in [2, 64], got {order}")
    if kind == "psk":
        points, labels = _psk_points(order)
        ring_ratio = None
    elif kind == "qam":
        points, labels = _qam_points(order)
        ring_ratio = None
    elif kind == "apsk":
        if order != 16:
            raise UnsupportedOrder("APSK is implemented for order 16 only")
        if ring_ratio is None or ring_ratio <= 1.0:
            raise UnsupportedOrder("APSK requires ring_ratio > 1")
        points, labels = _apsk16_points(ring_ratio)
    else:
        raise UnsupportedOrder(f"unknown constellation kind {kind!r}")
    return Constellation(
        kind=kind, order=order, points=points, labels=labels, ring_ratio=ring_ratio
    )


def encode(bits: np.ndarray, constellation: Constellation) -> tuple[np.ndarray, int]:
    """Split a data word into (spatial bits, symbol index).

    The leading bits select which active antennas are energized (the
    all-zero pattern is rejected); the trailing ``bits_per_symbol`` bits
    pick the modulation symbol through the constellation labeling.
    """
    bits = np.asarray(bits, dtype=np.int64)
    k = constellation.bits_per_symbol
    if bits.size <= k:
        raise ValueError("data word too short for this constellation")
    spatial = bits[: bits.size - k]
    if not spatial.any():
        raise IllegalSpatialWord("all-zero spatial word is not allowed")
    label = 0
    for b in bits[bits.size - k :]:
        label = (label << 1) | int(b)
    return spatial.copy(), constellation.index_of_label(label)


def decode(
    spatial: np.ndarray, symbol_index: int, constellation: Constellation
) -> np.ndarray:
    """Inverse of :func:`encode` for a detected (spatial, symbol) pair."""
    k = constellation.bits_per_symbol
    label = int(constellation.labels[symbol_index])
    label_bits = [(label >> (k - 1 - i)) & 1 for i in range(k)]
    return np.concatenate([np.asarray(spatial, dtype=np.int64), label_bits])


def transmit(
    precoder: Precoder, spatial: np.ndarray, symbol: complex, power: float
) -> np.ndarray:
    """Transmit vector sqrt(alpha * power) * B @ spatial * symbol."""
    spatial = np.asarray(spatial, dtype=float)
    if spatial.shape[0] != precoder.matrix_b.shape[1]:
        raise ValueError("spatial word length must match precoder width")
    if not spatial.any():
        raise IllegalSpatialWord("all-zero spatial word is not allowed")
    return math.sqrt(precoder.alpha * power) * (precoder.matrix_b @ (spatial * symbol))


def receive_amplitudes(y_active: np.ndarray) -> np.ndarray:
    """Envelope per active antenna (what the amplitude detectors output)."""
    return np.abs(np.asarray(y_active))


@dataclass(frozen=True)
class ThresholdSpec:
    """Detection threshold plus the design inputs that produced it."""

    mode: str
    gamma: float
    alpha_p: float
    sigma2: float
    beta: float

    def __post_init__(self) -> None:
        if self.mode not in THRESHOLD_MODES:
            raise ValueError(f"mode must be one of {THRESHOLD_MODES}")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


def exact_threshold_residual(gamma: float, min_power: float, sigma2: float) -> float:
    """Likelihood-ratio residual exp(-p/s2) * I0(2*gamma*sqrt(p)/s2) - 1.

    Zero exactly at the per-antenna ML decision boundary.
    """
    return math.exp(
        log_bessel_i0(2.0 * gamma * math.sqrt(min_power) / sigma2) - min_power / sigma2
    ) - 1.0


def threshold(mode: str, alpha_p: float, sigma2: float, beta: float = 1.0) -> ThresholdSpec:
    """Design the envelope detection threshold.

    All three designs substitute the minimum constellation symbol power
    ``beta * alpha_p`` for the average received power. ``exact`` root
    finds the per-antenna ML boundary, ``msa`` uses the closed Lambert-W
    form from the large-argument Bessel approximation, and ``hsa`` is
    the high-SNR limit, half the minimum received amplitude.
    """
    if alpha_p <= 0 or sigma2 <= 0:
        raise ValueError("alpha_p and sigma2 must be positive")
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    mode = mode.lower()
    min_power = beta * alpha_p
    root_amp = math.sqrt(min_power)
    if mode == "hsa":
        gamma = 0.5 * root_amp
    elif mode == "msa":
        # Argument of the Lambert branch, kept in log form so the design
        # survives SNRs where exp(-2*min_power/sigma2) underflows.
        log_neg_arg = -2.0 * min_power / sigma2 - math.log(math.pi)
        gamma = -sigma2 / (4.0 * root_amp) * lambert_w_minus1_from_log(log_neg_arg)
    elif mode == "exact":
        rho = min_power / sigma2
        # Solve log I0(u) = rho for u = 2*gamma*sqrt(min_power)/sigma2;
        # log I0 grows from 0 to infinity, so a root always brackets.
        hi = max(2.0 * rho + 2.0, 2.0)
        for _ in range(200):
            if log_bessel_i0(hi) >= rho:
                break
            hi *= 2.0
        else:
            raise NoRoot(f"could not bracket the exact threshold at rho={rho:.3e}")
        u = optimize.brentq(
            lambda v: log_bessel_i0(v) - rho, 0.0, hi, xtol=1e-14, rtol=1e-15
        )
        gamma = u * sigma2 / (2.0 * root_amp)
        if gamma <= 0.0:
            raise NoRoot(f"exact threshold degenerated to zero at rho={rho:.3e}")
    else:
        raise ValueError(f"mode must be one of {THRESHOLD_MODES}, got {mode!r}")
    return ThresholdSpec(mode=mode, gamma=gamma, alpha_p=alpha_p, sigma2=sigma2, beta=beta)


def detect_spatial(amplitudes: np.ndarray, spec: ThresholdSpec) -> np.ndarray:
    """Per-antenna one-bit decision: 1 where the envelope exceeds gamma.

    The all-zero output is possible and handled by the combiner.
    """
    return (np.asarray(amplitudes) > spec.gamma).astype(np.int64)


def joint_ml_detect(
    amplitudes: np.ndarray, alpha_p: float, sigma2: float
) -> np.ndarray:
    """Exhaustive joint-ML spatial detection over all candidate words.

    Scores every 0/1 word (including all-zero) under the product
    Rice/Rayleigh likelihood of the envelopes; exponential in the number
    of active antennas, so intended as a reference detector for small
    arrays. Ties resolve toward the word with fewer ones, then
    lexicographically.
    """
    amplitudes = np.asarray(amplitudes, dtype=float)
    n = amplitudes.size
    # Per-antenna log-likelihood gain of deciding "on" versus "off".
    gain = np.array(
        [
            log_bessel_i0(2.0 * a * math.sqrt(alpha_p) / sigma2) - alpha_p / sigma2
            for a in amplitudes
        ]
    )
    candidates = sorted(range(1 << n), key=lambda w: (bin(w).count("1"), w))
    best_word, best_score = 0, -math.inf
    for word in candidates:
        bits = [(word >> k) & 1 for k in range(n)]
        score = float(np.dot(bits, gain))
        if score > best_score:
            best_word, best_score = word, score
    return np.array([(best_word >> k) & 1 for k in range(n)], dtype=np.int64)


def combine_and_detect_modulation(
    y_active: np.ndarray,
    s_hat: np.ndarray,
    alpha_p: float,
    constellation: Constellation,
) -> tuple[int, np.ndarray]:
    """Combine the branches flagged active and detect the symbol.

    The receiver sums the flagged branch outputs and compares against
    sqrt(alpha_p) times its own count of combined branches (it cannot
    know how many were truly energized). An all-zero flag vector yields
    the fixed erasure fallback, symbol index 0.
    """
    s_hat = np.asarray(s_hat)
    n_combined = int(s_hat.sum())
    if n_combined == 0:
        index = 0
    else:
        y_c = complex(np.sum(np.asarray(y_active)[s_hat == 1]))
        refs = math.sqrt(alpha_p) * n_combined * constellation.points
        index = int(np.argmin(np.abs(y_c - refs)))
    k = constellation.bits_per_symbol
    label = int(constellation.labels[index])
    bits = np.array([(label >> (k - 1 - i)) & 1 for i in range(k)], dtype=np.int64)
    return index, bits
