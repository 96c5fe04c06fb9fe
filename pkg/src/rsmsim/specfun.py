"""Scalar special-function kernel shared by the analytical modules.

Everything in here is a pure function of its arguments: modified Bessel
I0/I1 (linear and log domain), the first-order Marcum Q function, the
lower real branch of the Lambert W function, the Gaussian tail function,
Rice envelope moments, and the CDFs of the non-central and doubly
non-central t distributions.

The doubly non-central t CDF is evaluated as a Poisson mixture of
non-central t CDFs (the denominator's non-central chi-square expanded
over central chi-squares), which reduces exactly to the singly
non-central case when the denominator non-centrality vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

__all__ = [
    "Accuracy",
    "DEFAULT_ACCURACY",
    "DomainError",
    "bessel_i0",
    "bessel_i1",
    "log_bessel_i0",
    "gaussian_q",
    "marcum_q1",
    "lambert_w_minus1",
    "lambert_w_minus1_from_log",
    "noncentral_t_cdf",
    "doubly_noncentral_t_cdf",
    "rice_moments",
]

#: largest-magnitude negative argument of the Lambert W real branches, -1/e
_BRANCH_POINT = -math.exp(-1.0)


class DomainError(ValueError):
    """Argument lies outside the mathematical domain of a kernel."""


@dataclass(frozen=True)
class Accuracy:
    """Absolute/relative tolerance pair for the iterative kernels.

    At least one of the two tolerances must be strictly positive.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise ValueError("at least one tolerance must be strictly positive")

    def met(self, error: float, scale: float) -> bool:
        """True if ``error`` is within tolerance for a quantity of size ``scale``."""
        return abs(error) <= max(self.abs_tol, self.rel_tol * abs(scale))


DEFAULT_ACCURACY = Accuracy()


def bessel_i0(x: float) -> float:
    """Modified Bessel function of the first kind, order zero.

    Computed from the exponentially scaled form so the result stays
    accurate for large arguments; overflows to ``inf`` only past the
    double-precision range (x > ~709), where :func:`log_bessel_i0`
    should be used instead.
    """
    if not (x >= 0) or math.isinf(x):
        raise DomainError(f"bessel_i0 requires finite x >= 0, got {x!r}")
    return float(special.i0e(x)) * math.exp(x) if x < 700 else math.exp(log_bessel_i0(x))


def bessel_i1(x: float) -> float:
    """Modified Bessel function of the first kind, order one."""
    if not (x >= 0) or math.isinf(x):
        raise DomainError(f"bessel_i1 requires finite x >= 0, got {x!r}")
    return float(special.i1e(x)) * math.exp(x) if x < 700 else float(
        special.i1e(x)
    ) * math.exp(x - 700.0) * math.exp(700.0)


def log_bessel_i0(x: float) -> float:
    """Natural log of I0(x), stable for arbitrarily large x."""
    if not (x >= 0) or math.isinf(x):
        raise DomainError(f"log_bessel_i0 requires finite x >= 0, got {x!r}")
    return x + math.log(float(special.i0e(x)))


def gaussian_q(x: float) -> float:
    """Standard normal tail probability Q(x) = P(Z > x)."""
    return 0.5 * float(special.erfc(x / math.sqrt(2.0)))


def marcum_q1(a: float, b: float) -> float:
    """First-order Marcum Q function Q1(a, b).

    Tail probability of a Rice envelope with unit per-component noise
    variance: Q1(a, b) = P(sqrt((a + Z1)^2 + Z2^2) > b). Evaluated
    through the non-central chi-square survival function with two
    degrees of freedom and non-centrality a^2.
    """
    if not (a >= 0 and b >= 0) or math.isinf(a) or math.isinf(b):
        raise DomainError(f"marcum_q1 requires finite a, b >= 0, got {(a, b)!r}")
    if b == 0.0:
        return 1.0
    if a == 0.0:
        return math.exp(-0.5 * b * b)
    # For b well below a, 1 - Q1 <= 0.5*exp(-(a-b)^2/2) (standard Rice tail
    # bound), so the result rounds to 1.0 long before scipy's non-central
    # chi-square backend starts failing on extreme arguments.
    if b < a and (a - b) ** 2 > 76.0:
        return 1.0
    q = float(stats.ncx2.sf(b * b, 2, a * a))
    if math.isnan(q):
        # ncx2.sf NaNs for subnormal arguments with large non-centrality;
        # the CDF path is well behaved there.
        q = 1.0 - float(stats.ncx2.cdf(b * b, 2, a * a))
    return min(max(q, 0.0), 1.0)


def lambert_w_minus1(x: float, accuracy: Accuracy = DEFAULT_ACCURACY) -> float:
    """Lower real branch W_{-1}(x) of the Lambert W function.

    Solves w * exp(w) = x for the branch with w <= -1; defined for
    x in [-1/e, 0).
    """
    if not (_BRANCH_POINT <= x < 0.0):
        raise DomainError(f"lambert_w_minus1 requires x in [-1/e, 0), got {x!r}")
    w = float(special.lambertw(x, k=-1).real)
    if math.isnan(w):
        # lambertw can fail within a few ulp of the branch point; the
        # expansion in p = -sqrt(2(1 + e*x)) is accurate there.
        p = -math.sqrt(max(2.0 * (1.0 + math.e * x), 0.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 * p**3 / 72.0
    # One Newton polish in the log form log|w| + w = log|x| keeps the
    # round-trip within tolerance away from the branch point.
    if w < -1.0 - 1e-9:
        f = math.log(-w) + w - math.log(-x)
        w -= f / (1.0 + 1.0 / w)
    residual = w * math.exp(w) - x
    if not accuracy.met(residual, x):
        raise ArithmeticError(
            f"lambert_w_minus1 failed to converge at x={x!r} (residual {residual:.3e})"
        )
    return w


def lambert_w_minus1_from_log(log_neg_x: float) -> float:
    """W_{-1}(x) for x = -exp(log_neg_x), usable when x itself underflows.

    Requires log_neg_x <= -1 (i.e. x in [-1/e, 0)). For representable
    arguments this defers to :func:`lambert_w_minus1`; deep in the tail
    it switches to the standard two-log asymptotic expansion, whose
    truncation error is far below the default tolerances there.
    """
    if not log_neg_x <= -1.0:
        raise DomainError(
            f"lambert_w_minus1_from_log requires log_neg_x <= -1, got {log_neg_x!r}"
        )
    if log_neg_x >= -700.0:
        return lambert_w_minus1(-math.exp(log_neg_x))
    l1 = log_neg_x
    l2 = math.log(-l1)
    return (
        l1
        - l2
        + l2 / l1
        + l2 * (l2 - 2.0) / (2.0 * l1 * l1)
        + l2 * (6.0 - 9.0 * l2 + 2.0 * l2 * l2) / (6.0 * l1**3)
    )


def noncentral_t_cdf(x: float, dof: float, delta: float) -> float:
    """CDF of the non-central t distribution.

    Distribution of (Z + delta) / sqrt(V / dof) with Z standard normal
    and V central chi-square with ``dof`` degrees of freedom.
    """
    if not dof > 0:
        raise DomainError(f"noncentral_t_cdf requires dof > 0, got {dof!r}")
    if math.isnan(x):
        raise DomainError("noncentral_t_cdf requires x to be a number")
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0
    p = float(stats.nct.cdf(x, dof, delta))
    if math.isnan(p):
        p = _nct_cdf_normal_approx(np.array([x]), np.array([dof]), delta)[0]
    return min(max(p, 0.0), 1.0)


def _nct_cdf_normal_approx(x: np.ndarray, dof: np.ndarray, delta: float) -> np.ndarray:
    """Large-dof normal approximation of the non-central t CDF.

    Used only where the exact backend fails (extreme dof or
    non-centrality); its error there is far below the surrounding
    cancellation floor.
    """
    shrink = 1.0 - 3.0 / (4.0 * dof - 1.0)
    z = (x * shrink - delta) / np.sqrt(1.0 + x * x / (2.0 * (dof - 1.0)))
    return special.ndtr(z)


def doubly_noncentral_t_cdf(x: float, dof: float, delta: float, lam: float) -> float:
    """CDF of the doubly non-central t distribution.

    Distribution of (Z + delta) / sqrt(W / dof) where W is non-central
    chi-square with ``dof`` degrees of freedom and non-centrality
    ``lam``. The non-central chi-square is expanded as a Poisson(lam/2)
    mixture of central chi-squares with dof + 2j degrees of freedom, so
    each mixture term is a rescaled non-central t CDF. Truncation keeps
    all terms until the remaining Poisson mass is below 1e-14.
    """
    if not dof > 0:
        raise DomainError(f"doubly_noncentral_t_cdf requires dof > 0, got {dof!r}")
    if not lam >= 0:
        raise DomainError(f"doubly_noncentral_t_cdf requires lam >= 0, got {lam!r}")
    if math.isnan(x):
        raise DomainError("doubly_noncentral_t_cdf requires x to be a number")
    if lam == 0.0:
        return noncentral_t_cdf(x, dof, delta)
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0

    half = 0.5 * lam
    width = 10.0 * math.sqrt(half) + 12.0
    j_lo = max(0, int(half - width))
    j_hi = int(half + width)
    j = np.arange(j_lo, j_hi + 1)
    # Window mass outside +-10 sigma is below 1e-20, so renormalizing the
    # enclosed weights both absorbs the truncation and cancels the common
    # floating-point drift of the log-pmf at very large means.
    log_w = -half + j * math.log(half) - special.gammaln(j + 1.0)
    log_w -= log_w.max()
    weights = np.exp(log_w)
    weights /= weights.sum()
    df = dof + 2.0 * j
    args = x * np.sqrt(df / dof)
    terms = stats.nct.cdf(args, df, delta)
    bad = np.isnan(terms)
    if bad.any():
        terms[bad] = _nct_cdf_normal_approx(args[bad], df[bad], delta)
    p = float(np.dot(weights, terms))
    return min(max(p, 0.0), 1.0)


def rice_moments(nu: float, sigma2: float) -> tuple[float, float]:
    """First two moments of a Rice envelope.

    The envelope is |nu + n| of a complex Gaussian sample n with total
    variance ``sigma2`` (sigma2/2 per real component). Returns
    (E[a], E[a^2]); the second moment is nu^2 + sigma2 exactly, and the
    mean uses the exponentially scaled Bessel closed form so it is
    stable at any SNR.
    """
    if not (nu >= 0) or math.isinf(nu):
        raise DomainError(f"rice_moments requires finite nu >= 0, got {nu!r}")
    if not sigma2 > 0 or math.isinf(sigma2):
        raise DomainError(f"rice_moments requires finite sigma2 > 0, got {sigma2!r}")
    z = nu * nu / (2.0 * sigma2)
    mu1 = 0.5 * math.sqrt(math.pi * sigma2) * (
        (1.0 + 2.0 * z) * float(special.i0e(z)) + 2.0 * z * float(special.i1e(z))
    )
    mu2 = nu * nu + sigma2
    return mu1, mu2
