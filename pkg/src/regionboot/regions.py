"""Region geometries, membership classification, and exact oracles.

Four concrete geometries are supported: a half-space, a slab between two
parallel hyperplanes, a spherical shell, and a planar cone.  The first three
admit closed-form bootstrap probabilities and exact p-values, which serve as
oracles for the sampling/fitting pipeline; the cone does not (no unbiased
test exists for it) and is exercised only through simulation.

Conventions
-----------
Membership uses closed regions, so boundary points are labeled H0.  The
"H1" side is above the upper surface (outer shell, counterclockwise of the
cone), "H2" below the lower one (inner shell, clockwise of the cone); the
half-space has no H2.  The last coordinate plays the role of the scalar
test direction for half-space and slab.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .distributions import noncentral_chisq_cdf, std_normal_cdf
from .errors import (
    ConfigError,
    DimensionMismatchError,
    InvalidParameterError,
    NumericalError,
    UnsupportedOracleError,
)

__all__ = [
    "HalfSpace",
    "Slab",
    "SphericalShell",
    "Cone2D",
    "Region",
    "classify",
    "label_points",
    "exact_bootstrap_prob",
    "slab_critical_constant",
    "exact_p_slab",
    "shell_critical_constants",
    "exact_p_shell",
    "exact_one_sided_shell",
    "region_to_dict",
    "region_from_dict",
]

LABELS = ("H0", "H1", "H2")


@dataclass(frozen=True)
class HalfSpace:
    """H0 = {x in R^(m+1) : x_last <= offset}."""

    m: int
    offset: float = 0.0

    @property
    def ambient_dim(self) -> int:
        return self.m + 1


@dataclass(frozen=True)
class Slab:
    """H0 = {x in R^(m+1) : -d <= x_last <= 0} with width d > 0."""

    m: int
    d: float

    def __post_init__(self):
        if self.d <= 0:
            raise InvalidParameterError(f"slab width must be > 0, got {self.d}")

    @property
    def ambient_dim(self) -> int:
        return self.m + 1


@dataclass(frozen=True)
class SphericalShell:
    """H0 = {x in R^(m+1) : a2 <= ||x|| <= a1} with 0 < a2 < a1."""

    m: int
    a1: float
    a2: float

    def __post_init__(self):
        if not (0 < self.a2 < self.a1):
            raise InvalidParameterError(
                f"shell radii must satisfy 0 < a2 < a1, got a1={self.a1}, a2={self.a2}"
            )

    @property
    def ambient_dim(self) -> int:
        return self.m + 1


@dataclass(frozen=True)
class Cone2D:
    """H0 = planar cone of points within half_angle of the axis direction.

    The axis points along `orientation` (radians from the x-axis); edges sit
    at orientation +/- half_angle.  H1 is the counterclockwise side, H2 the
    clockwise side.  Setting orientation = half_angle puts one edge on the
    x-axis, the layout used by the sweep harness.
    """

    half_angle: float
    orientation: float = 0.0

    def __post_init__(self):
        if not (0 < self.half_angle < np.pi / 2):
            raise InvalidParameterError(
                f"half_angle must be in (0, pi/2), got {self.half_angle}"
            )

    @property
    def ambient_dim(self) -> int:
        return 2


Region = Union[HalfSpace, Slab, SphericalShell, Cone2D]


def _check_dim(region: Region, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != region.ambient_dim:
        raise DimensionMismatchError(
            f"point dimension {pts.shape[-1]} != region ambient dimension "
            f"{region.ambient_dim}"
        )
    return pts


def label_points(region: Region, pts) -> np.ndarray:
    """Vectorized partition labels: 0 for H0, 1 for H1, 2 for H2.

    `pts` has shape (n, ambient_dim) or (ambient_dim,).
    """
    pts = _check_dim(region, pts)
    if isinstance(region, HalfSpace):
        v = pts[:, -1] - region.offset
        return np.where(v <= 0.0, 0, 1).astype(np.int8)
    if isinstance(region, Slab):
        v = pts[:, -1]
        out = np.zeros(pts.shape[0], dtype=np.int8)
        out[v > 0.0] = 1
        out[v < -region.d] = 2
        return out
    if isinstance(region, SphericalShell):
        r = np.linalg.norm(pts, axis=-1)
        out = np.zeros(pts.shape[0], dtype=np.int8)
        out[r > region.a1] = 1
        out[r < region.a2] = 2
        return out
    if isinstance(region, Cone2D):
        ang = np.arctan2(pts[:, 1], pts[:, 0]) - region.orientation
        ang = np.mod(ang + np.pi, 2.0 * np.pi) - np.pi
        out = np.zeros(pts.shape[0], dtype=np.int8)
        out[ang > region.half_angle] = 1
        out[ang < -region.half_angle] = 2
        out[(pts[:, 0] == 0.0) & (pts[:, 1] == 0.0)] = 0  # vertex is in H0
        return out
    raise TypeError(f"unknown region type {type(region)!r}")


def classify(region: Region, point) -> str:
    """Partition label of a single point: 'H0', 'H1', or 'H2'."""
    return LABELS[int(label_points(region, point)[0])]


def exact_bootstrap_prob(region: Region, y, sigma2: float, label: str = "H0") -> float:
    """Closed-form P(Y* in region-part | y) under Y* ~ N(y, sigma2 * I).

    Available for half-space, slab, and shell; `label` selects which part of
    the partition the probability refers to (default the region H0 itself).
    """
    if sigma2 <= 0:
        raise InvalidParameterError(f"sigma2 must be > 0, got {sigma2}")
    if label not in LABELS:
        raise ConfigError(f"label must be one of {LABELS}, got {label!r}")
    y = _check_dim(region, y)[0]
    sigma = np.sqrt(sigma2)

    if isinstance(region, HalfSpace):
        v = y[-1] - region.offset
        p0 = std_normal_cdf(-v / sigma)
        if label == "H0":
            return float(p0)
        if label == "H1":
            return float(1.0 - p0)
        return 0.0
    if isinstance(region, Slab):
        v = y[-1]
        upper = std_normal_cdf(-v / sigma)
        lower = std_normal_cdf(-(region.d + v) / sigma)
        if label == "H0":
            return float(upper - lower)
        if label == "H1":
            return float(1.0 - upper)
        return float(lower)
    if isinstance(region, SphericalShell):
        df = region.ambient_dim
        nc = float(np.dot(y, y)) / sigma2
        f_outer = noncentral_chisq_cdf(region.a1**2 / sigma2, df, nc)
        f_inner = noncentral_chisq_cdf(region.a2**2 / sigma2, df, nc)
        if label == "H0":
            return float(f_outer - f_inner)
        if label == "H1":
            return float(1.0 - f_outer)
        return float(f_inner)
    raise UnsupportedOracleError(
        f"no closed-form bootstrap probability for {type(region).__name__}"
    )


def slab_critical_constant(alpha: float, d: float) -> float:
    """Solve Phi(-c) + Phi(-d-c) = alpha for c (unique by monotonicity)."""
    if not (0.0 < alpha < 1.0):
        raise InvalidParameterError(f"alpha must be in (0,1), got {alpha}")
    if d <= 0:
        raise InvalidParameterError(f"d must be > 0, got {d}")

    def gap(c):
        return std_normal_cdf(-c) + std_normal_cdf(-d - c) - alpha

    return float(brentq(gap, -50.0, 50.0, xtol=1e-13, rtol=8.9e-16))


def exact_p_slab(y_last: float, d: float) -> float:
    """Exact two-sided p-value for the slab, continuous at y_last = -d/2."""
    if d <= 0:
        raise InvalidParameterError(f"d must be > 0, got {d}")
    if y_last >= -d / 2.0:
        return float(std_normal_cdf(-y_last) + std_normal_cdf(-d - y_last))
    return float(std_normal_cdf(y_last) + std_normal_cdf(d + y_last))


def _shell_f(t: float, a: float, df: int) -> float:
    """P(chi2_df(a^2) < t^2) with the empty-region convention for t <= 0."""
    if t <= 0.0:
        return 0.0
    return noncentral_chisq_cdf(t * t, df, a * a)


def shell_critical_constants(
    alpha: float, a1: float, a2: float, df: int, tol: float = 1e-10
) -> tuple[float, float]:
    """Critical constants (c1, c2) of the shell test at level alpha.

    The rejection regions are ||y|| < a2 - c1 (inside, beyond the inner
    boundary) and ||y|| > a1 + c2 (outside the outer boundary); (c1, c2)
    solve the two level equations

        P(chi2_df(a_i^2) < (a2-c1)^2) + P(chi2_df(a_i^2) > (a1+c2)^2) = alpha

    for i = 1, 2 simultaneously.  Solved by nesting one-dimensional
    bracketing solves: for a trial inner threshold the first equation pins
    the outer threshold, and the second equation closes the loop.
    """
    if not (0.0 < alpha < 1.0):
        raise InvalidParameterError(f"alpha must be in (0,1), got {alpha}")
    if not (0 < a2 < a1):
        raise InvalidParameterError("need 0 < a2 < a1")

    big = a1 + 50.0 * np.sqrt(df + a1 * a1)

    def t2_given_t1(t1: float) -> float:
        # from the level equation at the outer boundary (i=1)
        need = alpha - _shell_f(t1, a1, df)  # required upper-tail mass
        if need <= 0.0:
            raise NumericalError("inner threshold already exceeds level")
        return brentq(
            lambda t2: (1.0 - _shell_f(t2, a1, df)) - need,
            1e-9, big, xtol=1e-13, rtol=8.9e-16,
        )

    # cap t1 where the inner term reaches 99% of the level at the outer
    # boundary, so the outer-threshold solve keeps a resolvable tail mass
    t1_cap = brentq(
        lambda t: _shell_f(t, a1, df) - 0.99 * alpha,
        1e-12, big, xtol=1e-13, rtol=8.9e-16,
    )

    def resid2(t1: float) -> float:
        # level equation at the inner boundary (i=2)
        t2 = t2_given_t1(t1)
        return _shell_f(t1, a2, df) + (1.0 - _shell_f(t2, a2, df)) - alpha

    lo, hi = 1e-10, t1_cap * (1.0 - 1e-10)
    r_lo, r_hi = resid2(lo), resid2(hi)
    if not (r_lo < 0.0 < r_hi):
        raise NumericalError(
            f"shell critical system lost its bracket at alpha={alpha}: "
            f"resid({lo:.3g})={r_lo:.3g}, resid({hi:.3g})={r_hi:.3g}"
        )
    t1 = brentq(resid2, lo, hi, xtol=1e-13, rtol=8.9e-16)
    t2 = t2_given_t1(t1)

    res = max(
        abs(_shell_f(t1, a1, df) + 1.0 - _shell_f(t2, a1, df) - alpha),
        abs(_shell_f(t1, a2, df) + 1.0 - _shell_f(t2, a2, df) - alpha),
    )
    if res > tol:
        raise NumericalError(f"shell critical system residual {res:.2e} > {tol:.2e}")
    return float(a2 - t1), float(t2 - a1)


def exact_p_shell(
    norm_y: float, a1: float, a2: float, df: int, tol: float = 1e-6
) -> float:
    """Exact two-sided shell p-value: the smallest level whose rejection
    region contains ||y||.

    Both rejection thresholds move toward ||y|| monotonically in alpha, so
    the first-entry level is a bracketed root.
    """
    if norm_y < 0:
        raise InvalidParameterError("norm_y must be >= 0")

    def entry_gap(alpha: float) -> float:
        c1, c2 = shell_critical_constants(alpha, a1, a2, df)
        return max((a2 - c1) - norm_y, norm_y - (a1 + c2))

    lo, hi = 1e-8, 1.0 - 1e-9
    if entry_gap(lo) >= 0.0:
        return lo
    if entry_gap(hi) <= 0.0:
        return 1.0
    return float(brentq(entry_gap, lo, hi, xtol=min(tol, 1e-9)))


def exact_one_sided_shell(norm_y: float, a: float, df: int, side: str) -> float:
    """Exact one-sided shell p-values.

    side='outer': P(chi2_df(a^2) <= ||y||^2), the p-value of the outer
    region ||mu|| >= a; side='inner': the complementary tail for the inner
    region ||mu|| <= a.
    """
    if a <= 0:
        raise InvalidParameterError("a must be > 0")
    p_le = noncentral_chisq_cdf(norm_y * norm_y, df, a * a)
    if side == "outer":
        return float(p_le)
    if side == "inner":
        return float(1.0 - p_le)
    raise ConfigError(f"side must be 'inner' or 'outer', got {side!r}")


_REGION_KINDS = {
    "half_space": HalfSpace,
    "slab": Slab,
    "spherical_shell": SphericalShell,
    "cone2d": Cone2D,
}


def region_to_dict(region: Region) -> dict:
    """JSON-ready dict with a 'kind' discriminator."""
    for kind, cls in _REGION_KINDS.items():
        if isinstance(region, cls):
            out = {"kind": kind}
            out.update({k: v for k, v in region.__dict__.items()})
            return out
    raise TypeError(f"unknown region type {type(region)!r}")


def region_from_dict(data: dict) -> Region:
    """Inverse of region_to_dict; raises ConfigError on malformed input."""
    if not isinstance(data, dict) or "kind" not in data:
        raise ConfigError("region spec must be an object with a 'kind' field")
    kind = data["kind"]
    cls = _REGION_KINDS.get(kind)
    if cls is None:
        raise ConfigError(
            f"unknown region kind {kind!r}; expected one of {sorted(_REGION_KINDS)}"
        )
    fields = {k: v for k, v in data.items() if k != "kind"}
    try:
        return cls(**fields)
    except (TypeError, InvalidParameterError) as exc:
        raise ConfigError(f"bad region spec {data!r}: {exc}") from exc
