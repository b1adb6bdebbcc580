"""Parametric models for the scaling law of bootstrap probabilities.

A psi family describes the normalized bootstrap z-value as a function of the
sampling variance scale s = sigma^2.  Two families are supported:

* polynomial: psi(s) = beta0 + beta1*s + ... + beta_q*s^q, the model for
  smooth boundary surfaces;
* singular:   psi(s) = beta0 + beta1 / (1 + beta2*(sqrt(s) - 1)), the model
  for cone-like (nonsmooth) surfaces.

A scaling model combines psi functions with a region shape.  The two-region
shape uses one psi; the three-region shapes pair psi1 with a mirrored psi2
that shares the curvature parameters:

* same direction  (polynomial): psi2(s) = d - beta0 - beta1*s
* opposite direction (singular): psi2(s) = d - beta0 + beta1/(1+beta2*(sqrt(s)-1))

The marginal bootstrap probability is Phi(-psi(s)/sigma) for two regions and
1 - Phi(-psi1/sigma) - Phi(-psi2/sigma) for three; the joint probability of
(Y*, Y**) hitting the region couples the scales through a bivariate normal
with correlation rho = sigma/tau, optionally adjusted by the higher-order
delta-rho correction with curvature coefficients (a, b) and an effective
dimension m.  The correction modifies only the correlation; the marginals
keep their Phi(-psi/sigma) form.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Union

import numpy as np

from .distributions import (
    bivariate_normal_cdf,
    bvn_rectangle,
    clamp_correlation,
    std_normal_cdf,
)
from .errors import InvalidParameterError, NoExactExtrapolationError

__all__ = [
    "PolyPsi",
    "SingularPsi",
    "PsiFamily",
    "RhoCorrection",
    "rho_correction_for",
    "TwoRegionModel",
    "ThreeRegionModel",
    "ScalingModel",
    "three_region_same_dir",
    "three_region_opp_dir",
    "marginal_prob",
    "joint_prob",
    "two_step_probs",
    "delta_rho",
    "psi_derivatives",
    "ModelSpec",
    "REGISTRY",
    "PROB_EPS",
]

PROB_EPS = 1e-12
MAX_DERIVATIVE_ORDER = 8


@dataclass(frozen=True)
class PolyPsi:
    """psi(s) = sum_j beta[j] * s^j; degree = len(beta) - 1 >= 1."""

    beta: tuple[float, ...]

    def __post_init__(self):
        if len(self.beta) < 2:
            raise InvalidParameterError("polynomial psi needs degree >= 1")

    def value(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for coef in reversed(self.beta):
            out = out * s + coef
        return out

    def derivative(self, order: int, s):
        s = np.asarray(s, dtype=float)
        if order == 0:
            return self.value(s)
        out = np.zeros_like(s)
        for j in range(order, len(self.beta)):
            out += self.beta[j] * (factorial(j) / factorial(j - order)) * s ** (j - order)
        return out

    def value_at_minus_one(self) -> float:
        return float(sum(((-1.0) ** j) * b for j, b in enumerate(self.beta)))


@lru_cache(maxsize=None)
def _singular_term_derivative(order: int):
    """Lambdified d^order/ds^order of b1/(1 + b2*(sqrt(s)-1))."""
    import sympy as sp

    s, b1, b2 = sp.symbols("s b1 b2")
    expr = b1 / (1 + b2 * (sp.sqrt(s) - 1))
    for _ in range(order):
        expr = sp.diff(expr, s)
    return sp.lambdify((s, b1, b2), sp.simplify(expr), modules="numpy")


@dataclass(frozen=True)
class SingularPsi:
    """psi(s) = beta0 + beta1 / (1 + beta2*(sqrt(s) - 1)); no value at s = -1."""

    beta0: float
    beta1: float
    beta2: float

    def _w(self, s):
        sigma = np.sqrt(np.asarray(s, dtype=float))
        w = 1.0 + self.beta2 * (sigma - 1.0)
        if w.min() <= 0.0:
            raise InvalidParameterError(
                f"singular psi pole: 1 + beta2*(sigma-1) <= 0 at beta2={self.beta2}"
            )
        return w

    def value(self, s):
        return self.beta0 + self.beta1 / self._w(s)

    def derivative(self, order: int, s):
        if order == 0:
            return self.value(s)
        if order > MAX_DERIVATIVE_ORDER:
            raise InvalidParameterError(
                f"singular psi derivatives supported up to order {MAX_DERIVATIVE_ORDER}"
            )
        self._w(s)  # pole check
        fn = _singular_term_derivative(order)
        return np.asarray(fn(np.asarray(s, dtype=float), self.beta1, self.beta2))

    def value_at_minus_one(self) -> float:
        raise NoExactExtrapolationError(
            "singular psi has no value at sigma^2 = -1; use the Taylor extrapolation"
        )


PsiFamily = Union[PolyPsi, SingularPsi]


def psi_derivatives(family: PsiFamily, order: int, at_sigma2):
    """Analytic d^order psi / d(sigma^2)^order evaluated at at_sigma2."""
    if order < 0 or int(order) != order:
        raise InvalidParameterError(f"order must be a nonnegative integer, got {order}")
    return family.derivative(int(order), at_sigma2)


@dataclass(frozen=True)
class RhoCorrection:
    """Delta-rho coefficients: curvature terms (a, b) and effective dimension m."""

    a: float
    b: float
    m: float

    def __post_init__(self):
        if self.m <= 0:
            raise InvalidParameterError(f"effective dimension m must be > 0, got {self.m}")


def rho_correction_for(psi: PsiFamily, m: float) -> RhoCorrection:
    """Curvature coefficients implied by the psi family.

    Polynomial: (a, b) = (0, beta1).  Singular: a = beta1*beta2*(3 - 2*beta2),
    b = beta1*(beta2 - 1)^2.
    """
    if isinstance(psi, PolyPsi):
        return RhoCorrection(a=0.0, b=psi.beta[1], m=m)
    if isinstance(psi, SingularPsi):
        return RhoCorrection(
            a=psi.beta1 * psi.beta2 * (3.0 - 2.0 * psi.beta2),
            b=psi.beta1 * (psi.beta2 - 1.0) ** 2,
            m=m,
        )
    raise TypeError(f"unknown psi family {type(psi)!r}")


def delta_rho(corr: RhoCorrection, sigma, tau):
    """Higher-order correlation correction.

    delta_rho = -(1/2m) * (a^2 rho (1-rho) + 2 b^2 rho (tau^2-sigma^2)
                           + 2 a b sigma (1-rho^2)),  rho = sigma/tau.
    """
    sigma = np.asarray(sigma, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if sigma.min() <= 0 or (tau - sigma).min() < 0:
        raise InvalidParameterError("need 0 < sigma <= tau")
    rho = sigma / tau
    out = -(
        corr.a**2 * rho * (1.0 - rho)
        + 2.0 * corr.b**2 * rho * (tau**2 - sigma**2)
        + 2.0 * corr.a * corr.b * sigma * (1.0 - rho**2)
    ) / (2.0 * corr.m)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class TwoRegionModel:
    """Scaling model for a single boundary surface (region vs complement)."""

    psi: PsiFamily
    correction: RhoCorrection | None = None


@dataclass(frozen=True)
class ThreeRegionModel:
    """Scaling model for a slab-like region between two mirrored surfaces."""

    psi1: PsiFamily
    psi2: PsiFamily
    d: float
    correction: RhoCorrection | None = None

    def __post_init__(self):
        if self.d <= 0:
            raise InvalidParameterError(f"separation d must be > 0, got {self.d}")
        beta0 = (
            self.psi1.beta[0] if isinstance(self.psi1, PolyPsi) else self.psi1.beta0
        )
        if beta0 <= -self.d / 2.0:
            raise InvalidParameterError(
                f"beta0 must exceed -d/2, got beta0={beta0}, d={self.d}"
            )


ScalingModel = Union[TwoRegionModel, ThreeRegionModel]


def three_region_same_dir(
    beta0: float, beta1: float, d: float, m: float | None = None
) -> ThreeRegionModel:
    """Polynomial pair curved in the same direction:
    psi1 = beta0 + beta1*s, psi2 = d - beta0 - beta1*s."""
    psi1 = PolyPsi((beta0, beta1))
    psi2 = PolyPsi((d - beta0, -beta1))
    corr = None if m is None else rho_correction_for(psi1, m)
    return ThreeRegionModel(psi1=psi1, psi2=psi2, d=d, correction=corr)


def three_region_opp_dir(
    beta0: float, beta1: float, beta2: float, d: float, m: float | None = None
) -> ThreeRegionModel:
    """Singular pair curved in opposite directions:
    psi1 = beta0 + beta1/(1+beta2(sigma-1)), psi2 = d - beta0 + beta1/(1+beta2(sigma-1))."""
    psi1 = SingularPsi(beta0, beta1, beta2)
    psi2 = SingularPsi(d - beta0, beta1, beta2)
    corr = None if m is None else rho_correction_for(psi1, m)
    return ThreeRegionModel(psi1=psi1, psi2=psi2, d=d, correction=corr)


def marginal_prob(model: ScalingModel, sigma2):
    """Model bootstrap probability at scale sigma^2, clamped away from {0, 1}."""
    s = np.asarray(sigma2, dtype=float)
    if s.min() <= 0:
        raise InvalidParameterError("sigma2 must be > 0")
    sigma = np.sqrt(s)
    if isinstance(model, TwoRegionModel):
        p = std_normal_cdf(-model.psi.value(s) / sigma)
    else:
        p = 1.0 - std_normal_cdf(-model.psi1.value(s) / sigma) - std_normal_cdf(
            -model.psi2.value(s) / sigma
        )
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return p if p.ndim else float(p)


def _effective_rho(model: ScalingModel, sigma, tau):
    rho = sigma / tau
    if model.correction is not None:
        rho = rho + delta_rho(model.correction, sigma, tau)
    return clamp_correlation(rho)


def two_step_probs(model: ScalingModel, sigma2, tau2):
    """(f(sigma^2), f(tau^2), joint) sharing the psi evaluations.

    The workhorse of the two-step likelihood: equivalent to calling
    marginal_prob twice and joint_prob once, evaluating each psi function at
    each scale only once.
    """
    s = np.asarray(sigma2, dtype=float)
    t = np.asarray(tau2, dtype=float)
    if s.min() <= 0 or (t - s).min() <= 0:
        raise InvalidParameterError("need tau2 > sigma2 > 0")
    sigma = np.sqrt(s)
    tau = np.sqrt(t)
    rho = _effective_rho(model, sigma, tau)
    if isinstance(model, TwoRegionModel):
        z1 = -model.psi.value(s) / sigma
        w1 = -model.psi.value(t) / tau
        f_s = std_normal_cdf(z1)
        f_t = std_normal_cdf(w1)
        g = bivariate_normal_cdf(z1, w1, rho)
    else:
        z1 = model.psi1.value(s) / sigma
        w1 = model.psi1.value(t) / tau
        z2 = -model.psi2.value(s) / sigma
        w2 = -model.psi2.value(t) / tau
        if (z1 - z2).min() < 0 or (w1 - w2).min() < 0:
            raise InvalidParameterError(
                "inconsistent psi values: rectangle limits out of order "
                "(psi1 + psi2 < 0 at some scale)"
            )
        f_s = std_normal_cdf(z1) - std_normal_cdf(z2)
        f_t = std_normal_cdf(w1) - std_normal_cdf(w2)
        g = bvn_rectangle(z1, w1, z2, w2, rho)
    eps = PROB_EPS
    return (
        np.clip(f_s, eps, 1.0 - eps),
        np.clip(f_t, eps, 1.0 - eps),
        g,
    )


def joint_prob(model: ScalingModel, sigma2, tau2):
    """Model probability that both bootstrap steps land in the region."""
    s = np.asarray(sigma2, dtype=float)
    out = two_step_probs(model, s, tau2)[2]
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# model templates for fitting and AIC selection


@dataclass(frozen=True)
class ModelSpec:
    """A named model template: shape, psi family, fixed parameters.

    Free parameters (in param_names order, minus fixed) are what the fitter
    estimates; `fixed` pins submodel restrictions such as beta1=0 or beta2=1.
    """

    name: str
    shape: str  # "two_region" | "three_region_same" | "three_region_opp"
    family: str  # "poly" | "singular"
    degree: int = 1
    with_correction: bool = False
    fixed: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.shape not in ("two_region", "three_region_same", "three_region_opp"):
            raise InvalidParameterError(f"unknown shape {self.shape!r}")
        if self.family not in ("poly", "singular"):
            raise InvalidParameterError(f"unknown family {self.family!r}")
        if self.shape == "three_region_same" and self.family != "poly":
            raise InvalidParameterError("same-direction pairing is polynomial only")
        if self.shape == "three_region_opp" and self.family != "singular":
            raise InvalidParameterError("opposite-direction pairing is singular only")
        bad = set(dict(self.fixed)) - set(self.param_names())
        if bad:
            raise InvalidParameterError(f"fixed parameters {sorted(bad)} not in model")

    def param_names(self) -> tuple[str, ...]:
        if self.family == "poly":
            names = tuple(f"beta{j}" for j in range(self.degree + 1))
        else:
            names = ("beta0", "beta1", "beta2")
        if self.shape != "two_region":
            names = names + ("d",)
        if self.with_correction:
            names = names + ("m",)
        return names

    def free_names(self) -> tuple[str, ...]:
        fixed = dict(self.fixed)
        return tuple(n for n in self.param_names() if n not in fixed)

    def full_params(self, free: dict[str, float]) -> dict[str, float]:
        params = dict(self.fixed)
        params.update(free)
        missing = set(self.param_names()) - set(params)
        if missing:
            raise InvalidParameterError(f"missing parameters {sorted(missing)}")
        return params

    def build(self, params: dict[str, float]) -> ScalingModel:
        """Instantiate the model at a full parameter dict (fixed + free)."""
        p = dict(params)
        m = p.get("m") if self.with_correction else None
        if self.shape == "two_region":
            if self.family == "poly":
                psi = PolyPsi(tuple(p[f"beta{j}"] for j in range(self.degree + 1)))
            else:
                psi = SingularPsi(p["beta0"], p["beta1"], p["beta2"])
            corr = None if m is None else rho_correction_for(psi, m)
            return TwoRegionModel(psi=psi, correction=corr)
        if self.shape == "three_region_same":
            return three_region_same_dir(p["beta0"], p["beta1"], p["d"], m=m)
        return three_region_opp_dir(p["beta0"], p["beta1"], p["beta2"], p["d"], m=m)

    def to_dict(self, params: dict[str, float] | None = None) -> dict:
        out = {
            "name": self.name,
            "family": self.family,
            "shape": self.shape,
            "fixed": sorted(dict(self.fixed)),
        }
        if params is not None:
            out["params"] = {k: float(v) for k, v in params.items()}
        return out


def _make_registry() -> dict[str, ModelSpec]:
    specs = [
        # two-region, smooth boundary
        ModelSpec("tr-poly1", "two_region", "poly", degree=1),
        ModelSpec("tr-poly1-rho", "two_region", "poly", degree=1, with_correction=True),
        ModelSpec("tr-poly2", "two_region", "poly", degree=2),
        ModelSpec("tr-poly2-rho", "two_region", "poly", degree=2, with_correction=True),
        # two-region, flat boundary (beta1 = 0 submodel)
        ModelSpec("tr-flat", "two_region", "poly", degree=1, fixed=(("beta1", 0.0),)),
        # two-region, cone-like boundary
        ModelSpec("tr-sing", "two_region", "singular"),
        ModelSpec("tr-sing-rho", "two_region", "singular", with_correction=True),
        ModelSpec("tr-sing-b2one", "two_region", "singular", fixed=(("beta2", 1.0),)),
        ModelSpec(
            "tr-sing-b2one-rho",
            "two_region",
            "singular",
            with_correction=True,
            fixed=(("beta2", 1.0),),
        ),
        # three-region shapes
        ModelSpec("th-same-poly1", "three_region_same", "poly", degree=1),
        ModelSpec(
            "th-flat", "three_region_same", "poly", degree=1, fixed=(("beta1", 0.0),)
        ),
        ModelSpec("th-opp-sing", "three_region_opp", "singular"),
        ModelSpec(
            "th-opp-sing-b2one",
            "three_region_opp",
            "singular",
            fixed=(("beta2", 1.0),),
        ),
    ]
    return {s.name: s for s in specs}


REGISTRY = _make_registry()
