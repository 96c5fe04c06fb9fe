"""Zero-forcing precoding and exhaustive receive-antenna selection.

The precoder is the right pseudoinverse of the active-antenna channel,
so every active antenna receives its own stream without interference.
The per-link power normalization factor ``alpha`` equals
1 / trace((H_a H_a^H)^-1); antenna selection maximizes it over all
subsets of the requested size.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SingularChannel",
    "TooManySubsets",
    "AntennaSelection",
    "Precoder",
    "zf_precoder",
    "select_antennas",
    "selection_for_indices",
]

#: reciprocal-condition floor below which the active channel is treated as singular
RCOND_MIN = 1e-12

#: default cap on the number of enumerated subsets
MAX_SUBSETS = 10**6


class SingularChannel(ArithmeticError):
    """The active-antenna channel is numerically rank deficient."""


class TooManySubsets(ValueError):
    """Exhaustive enumeration would exceed the configured subset cap."""


@dataclass(frozen=True)
class Precoder:
    """Zero-forcing precoding matrix (n_tx, n_active) and its power factor."""

    matrix_b: np.ndarray
    alpha: float


@dataclass(frozen=True)
class AntennaSelection:
    """Chosen active-antenna subset, its power factor, and its channel rows."""

    active_indices: tuple[int, ...]
    alpha: float
    h_active: np.ndarray


def _gram_alpha(h_active: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Gram matrix of the rows, its reciprocal condition, and alpha."""
    gram = h_active @ h_active.conj().T
    eigs = np.linalg.eigvalsh(gram)
    if eigs[-1] <= 0.0:
        return gram, 0.0, 0.0
    rcond = float(eigs[0] / eigs[-1])
    if eigs[0] <= 0.0 or rcond < RCOND_MIN:
        return gram, max(rcond, 0.0), 0.0
    alpha = 1.0 / float(np.sum(1.0 / eigs))
    return gram, rcond, alpha


def zf_precoder(h_active: np.ndarray) -> Precoder:
    """Build the zero-forcing precoder B = H_a^H (H_a H_a^H)^-1.

    Raises :class:`SingularChannel` when the row Gram matrix has
    reciprocal condition below ``RCOND_MIN``.
    """
    h_active = np.asarray(h_active)
    gram, rcond, alpha = _gram_alpha(h_active)
    if alpha == 0.0:
        raise SingularChannel(
            f"active channel is numerically singular (rcond={rcond:.3e})"
        )
    b = h_active.conj().T @ np.linalg.inv(gram)
    # Both alpha expressions coincide for a zero-forcing precoder; a large
    # gap flags numerical trouble upstream of the rcond guard.
    alpha_from_b = 1.0 / float(np.real(np.trace(b.conj().T @ b)))
    if not math.isclose(alpha, alpha_from_b, rel_tol=1e-6):
        raise SingularChannel(
            f"inconsistent power factor: {alpha:.6e} vs {alpha_from_b:.6e}"
        )
    return Precoder(matrix_b=b, alpha=alpha)


def selection_for_indices(h: np.ndarray, indices: tuple[int, ...]) -> AntennaSelection:
    """Selection record for a caller-chosen antenna subset (no search)."""
    indices = tuple(sorted(int(i) for i in indices))
    h_active = np.asarray(h)[list(indices), :]
    _, rcond, alpha = _gram_alpha(h_active)
    if alpha == 0.0:
        raise SingularChannel(
            f"subset {indices} is numerically singular (rcond={rcond:.3e})"
        )
    return AntennaSelection(active_indices=indices, alpha=alpha, h_active=h_active)


def select_antennas(
    h: np.ndarray,
    n_active: int,
    max_subsets: int = MAX_SUBSETS,
    method: str = "exhaustive",
) -> AntennaSelection:
    """Pick the antenna subset maximizing the received power factor.

    ``method="exhaustive"`` enumerates every subset (ties broken toward
    the lexicographically smallest index tuple). ``method="greedy"``
    drops one antenna at a time, keeping the drop that hurts alpha
    least; it is a fast heuristic and carries no optimality guarantee.
    """
    h = np.asarray(h)
    n_rx = h.shape[0]
    if n_active > n_rx:
        raise ValueError(f"n_active={n_active} exceeds n_rx={n_rx}")
    if method == "greedy":
        return _select_greedy(h, n_active)
    if method != "exhaustive":
        raise ValueError(f"unknown selection method {method!r}")
    n_subsets = math.comb(n_rx, n_active)
    if n_subsets > max_subsets:
        raise TooManySubsets(
            f"C({n_rx},{n_active}) = {n_subsets} subsets exceeds cap {max_subsets}"
        )
    combos = np.array(list(itertools.combinations(range(n_rx), n_active)))
    rows = h[combos]  # (n_subsets, n_active, n_tx)
    grams = rows @ rows.conj().transpose(0, 2, 1)
    eigs = np.linalg.eigvalsh(grams)
    with np.errstate(divide="ignore", invalid="ignore"):
        alphas = 1.0 / np.sum(1.0 / eigs, axis=1)
    valid = (eigs[:, 0] > 0) & (eigs[:, 0] / eigs[:, -1] >= RCOND_MIN)
    alphas = np.where(valid, alphas, -np.inf)
    best = int(np.argmax(alphas))  # first hit wins: lexicographic tie-break
    if not np.isfinite(alphas[best]):
        raise SingularChannel("every candidate subset is numerically singular")
    indices = tuple(int(i) for i in combos[best])
    return AntennaSelection(
        active_indices=indices, alpha=float(alphas[best]), h_active=h[list(indices)]
    )


def _select_greedy(h: np.ndarray, n_active: int) -> AntennaSelection:
    remaining = list(range(h.shape[0]))
    while len(remaining) > n_active:
        best_alpha, best_drop = -np.inf, None
        for drop in remaining:
            kept = [i for i in remaining if i != drop]
            _, _, alpha = _gram_alpha(h[kept])
            if alpha > best_alpha:
                best_alpha, best_drop = alpha, drop
        if best_drop is None or best_alpha == -np.inf:
            raise SingularChannel("greedy selection found only singular subsets")
        remaining.remove(best_drop)
    return selection_for_indices(h, tuple(remaining))
