"""Confidence measures derived from fitted scaling models.

The frequentist p-value of a one-sided region extrapolates the normalized
bootstrap z-value psi(sigma^2) to sigma^2 = -1: exactly for polynomial psi
(the series terminates), or through the first k Taylor terms around a
positive expansion point for families with no value there (the singular
family).  Two-sided and Bayesian measures combine the two one-sided tails:

    p_two_sided = 1 - |p1 - p2|
    pi_bayes    = 1 - (p1 + p2)          (clamped to [0, 1])
    p_s(s)      = pi_bayes_raw + s * min(p1, p2), clipped to [0, 1]

so that p_s(0) is the Bayesian measure and p_s(2) the two-sided p-value,
exactly, including when the clamp fired.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import std_normal_cdf
from .errors import InvalidParameterError
from .models import (
    PsiFamily,
    ScalingModel,
    ThreeRegionModel,
    psi_derivatives,
)

__all__ = [
    "ConfidenceReport",
    "p_extrapolate_exact",
    "p_taylor",
    "p_from_psi",
    "combine_three_region",
    "p_sided",
    "exact_slab_p_values",
]

DEFAULT_K = 3
DEFAULT_SIGMA0_SQ = 1.0


@dataclass
class ConfidenceReport:
    """Confidence measures for one region at one observation.

    Two-region fits populate only p_one_sided; three-region fits populate
    the tail pair and the combined measures.
    """

    p_one_sided: float | None = None
    p1: float | None = None
    p2: float | None = None
    p_two_sided: float | None = None
    pi_bayes: float | None = None
    bayes_clamped: bool = False
    k: int = DEFAULT_K
    sigma0_sq: float = DEFAULT_SIGMA0_SQ
    provenance: dict = field(default_factory=dict)

    def p_sided(self, s: float) -> float:
        return p_sided(self, s)

    def to_dict(self) -> dict:
        return {
            "p_one_sided": self.p_one_sided,
            "p1": self.p1,
            "p2": self.p2,
            "p_two_sided": self.p_two_sided,
            "pi_bayes": self.pi_bayes,
            "bayes_clamped": self.bayes_clamped,
            "k": self.k,
            "sigma0_sq": self.sigma0_sq,
            "provenance": self.provenance,
        }


def p_extrapolate_exact(psi: PsiFamily) -> float:
    """Phi(-psi(-1)) for families with a value at sigma^2 = -1.

    For a polynomial this is the alternating sum Phi(-beta0 + beta1 - ...).
    Raises NoExactExtrapolationError for the singular family.
    """
    return float(std_normal_cdf(-psi.value_at_minus_one()))


def p_taylor(psi: PsiFamily, k: int, sigma0_sq: float = DEFAULT_SIGMA0_SQ) -> float:
    """Extrapolation to sigma^2 = -1 through the first k Taylor terms.

    p_k = Phi(- sum_{j<k} ((-1 - sigma0^2)^j / j!) psi^(j)(sigma0^2)).
    """
    if k < 1 or int(k) != k:
        raise InvalidParameterError(f"k must be a positive integer, got {k}")
    if sigma0_sq <= 0:
        raise InvalidParameterError(f"sigma0_sq must be > 0, got {sigma0_sq}")
    total = 0.0
    step = -1.0 - sigma0_sq
    fact = 1.0
    for j in range(int(k)):
        if j > 0:
            fact *= j
        total += (step**j / fact) * float(psi_derivatives(psi, j, sigma0_sq))
    return float(std_normal_cdf(-total))


def p_from_psi(
    psi: PsiFamily, k: int = DEFAULT_K, sigma0_sq: float = DEFAULT_SIGMA0_SQ
) -> float:
    """Exact extrapolation when the family admits one, else the k-term Taylor."""
    try:
        return p_extrapolate_exact(psi)
    except Exception:
        return p_taylor(psi, k, sigma0_sq)


def _combined_report(p1: float, p2: float, k: int, sigma0_sq: float) -> ConfidenceReport:
    pi_raw = 1.0 - (p1 + p2)
    clamped = pi_raw < 0.0 or pi_raw > 1.0
    return ConfidenceReport(
        p1=p1,
        p2=p2,
        p_two_sided=1.0 - abs(p1 - p2),
        pi_bayes=float(np.clip(pi_raw, 0.0, 1.0)),
        bayes_clamped=clamped,
        k=k,
        sigma0_sq=sigma0_sq,
    )


def combine_three_region(
    model: ScalingModel,
    k: int = DEFAULT_K,
    sigma0_sq: float = DEFAULT_SIGMA0_SQ,
) -> ConfidenceReport:
    """Two-sided and Bayesian measures from a fitted three-region model."""
    if not isinstance(model, ThreeRegionModel):
        raise InvalidParameterError("combine_three_region needs a three-region model")
    p1 = p_from_psi(model.psi1, k, sigma0_sq)
    p2 = p_from_psi(model.psi2, k, sigma0_sq)
    return _combined_report(p1, p2, k, sigma0_sq)


def p_sided(report: ConfidenceReport, s: float) -> float:
    """The s-sided measure pi + s*min(p1, p2): s=0 Bayesian, s=2 two-sided."""
    if report.p1 is None or report.p2 is None:
        raise InvalidParameterError("p_sided needs a report with both tail p-values")
    pi_raw = 1.0 - (report.p1 + report.p2)
    return float(np.clip(pi_raw + s * min(report.p1, report.p2), 0.0, 1.0))


def exact_slab_p_values(y_last: float, d: float) -> ConfidenceReport:
    """Closed-form slab report: tails, two-sided, Bayesian, and one-sided.

    p1 = Phi(y_last) is the tail toward the upper surface, p2 = Phi(-d-y_last)
    toward the lower one; the one-sided p-value of the half-space view is
    Phi(-y_last), which equals its flat-prior posterior probability.
    """
    if d <= 0:
        raise InvalidParameterError(f"d must be > 0, got {d}")
    p1 = float(std_normal_cdf(y_last))
    p2 = float(std_normal_cdf(-d - y_last))
    report = _combined_report(p1, p2, DEFAULT_K, DEFAULT_SIGMA0_SQ)
    report.p_one_sided = float(std_normal_cdf(-y_last))
    report.provenance = {"oracle": "slab", "y_last": y_last, "d": d}
    return report
