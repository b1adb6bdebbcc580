"""Normal and noncentral chi-square distribution kernels.

Everything downstream (closed-form region probabilities, scaling-law models,
likelihoods) is built on the four primitives here: the univariate normal CDF
and quantile, the bivariate normal CDF (plus rectangle probabilities and the
joint density), and the noncentral chi-square CDF.

The bivariate CDF integrates the conditional decomposition

    Phi_rho(a, b) = int_{-inf}^{a} phi(t) Phi((b - rho*t)/sqrt(1-rho^2)) dt

with a vectorized Gauss-Kronrod 7/15 rule on a fixed panel ladder, bisecting
panels until the per-point error estimate is below tolerance.  This keeps a
single code path accurate from rho = 0 up to |rho| = 1 - 1e-9, where the
conditional factor turns into a near-step that the bisection resolves.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import chdtr, gammaln, ndtr, ndtri

from .errors import CorrelationClampWarning, InvalidParameterError

__all__ = [
    "BivariateArgs",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "clamp_correlation",
    "bivariate_normal_cdf",
    "bivariate_normal_pdf",
    "bivariate_rectangle_prob",
    "bvn_rectangle",
    "noncentral_chisq_cdf",
]

RHO_MAX = 1.0 - 1e-9

_SQRT_2PI = np.sqrt(2.0 * np.pi)

# Gauss-Kronrod 7/15 pair on [-1, 1]: the 7 Gauss nodes are the odd-indexed
# Kronrod abscissae, so one evaluation pass yields both estimates.
_XGK = np.array([
    -0.9914553711208126, -0.9491079123427585, -0.8648644233597691,
    -0.7415311855993944, -0.5860872354676911, -0.4058451513773972,
    -0.2077849550078985, 0.0,
    0.2077849550078985, 0.4058451513773972, 0.5860872354676911,
    0.7415311855993944, 0.8648644233597691, 0.9491079123427585,
    0.9914553711208126,
])
_WGK = np.array([
    0.0229353220105292, 0.0630920926299785, 0.1047900103222502,
    0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
    0.2044329400752989, 0.2094821410847278,
    0.2044329400752989, 0.1903505780647854, 0.1690047266392679,
    0.1406532597155259, 0.1047900103222502, 0.0630920926299785,
    0.0229353220105292,
])
_WG7 = np.zeros(15)
_WG7[1::2] = [
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189,
    0.4179591836734694, 0.3818300505051189, 0.2797053914892767,
    0.1294849661688697,
]

# Integration cutoff: Phi(-7.5) ~ 3.2e-14, far below every tolerance used here.
_TAIL_CUT = 7.5
_PANEL_W = 1.25


def std_normal_cdf(z):
    """Standard normal CDF; accepts scalars or arrays."""
    return ndtr(z)


def std_normal_pdf(z):
    """Standard normal density."""
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * z * z) / _SQRT_2PI
    return out if out.ndim else float(out)


def std_normal_quantile(p):
    """Inverse standard normal CDF on (0, 1).

    Raises InvalidParameterError outside the open interval.
    """
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr <= 0.0) or np.any(p_arr >= 1.0):
        raise InvalidParameterError(f"quantile argument must be in (0,1), got {p!r}")
    out = ndtri(p_arr)
    return out if out.ndim else float(out)


def clamp_correlation(rho, warn: bool = True):
    """Clamp correlations into [-RHO_MAX, RHO_MAX], warning when it fires.

    Higher-order corrections can push sigma/tau + delta_rho out of range at
    extreme scales; the clamp keeps the CDF well defined there.
    """
    rho_arr = np.asarray(rho, dtype=float)
    clipped = np.clip(rho_arr, -RHO_MAX, RHO_MAX)
    if warn and np.any(clipped != rho_arr):
        warnings.warn(
            "correlation outside (-1, 1) clamped to +/-(1 - 1e-9)",
            CorrelationClampWarning,
            stacklevel=2,
        )
    return clipped if clipped.ndim else float(clipped)


def _gk_pass(lo, hi, b1, b2, rho, inv_s):
    """GK7/15 estimates per panel of int phi(t) * W(t) dt where
    W(t) = Phi((b1 - rho t) inv_s) - Phi((b2 - rho t) inv_s), b2 = -inf allowed."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    t = mid[:, None] + half[:, None] * _XGK[None, :]
    w = ndtr((b1[:, None] - rho[:, None] * t) * inv_s[:, None])
    finite2 = np.isfinite(b2)
    if finite2.any():
        w[finite2] -= ndtr(
            (b2[finite2, None] - rho[finite2, None] * t[finite2]) * inv_s[finite2, None]
        )
    f = (np.exp(-0.5 * t * t) / _SQRT_2PI) * w
    i15 = half * (f @ _WGK)
    i7 = half * (f @ _WG7)
    # QUADPACK-style error model: the Kronrod error scales like the 3/2 power
    # of the Gauss-Kronrod discrepancy, so |i15 - i7| alone is far too
    # pessimistic for smooth panels.
    delta = np.abs(i15 - i7)
    err = delta * np.sqrt(np.minimum(1.0, 200.0 * delta))
    return i15, err


def _cond_integral(t_lo, t_hi, b1, b2, rho, inv_s, tol):
    """Adaptive conditional-decomposition integral over [t_lo, t_hi] per point.

    Starts from panels of width <= _PANEL_W and bisects the panels whose
    GK7/15 discrepancy exceeds the per-point error budget.
    """
    n = t_lo.size
    k = np.maximum(1, np.ceil((t_hi - t_lo) / _PANEL_W).astype(int))
    width = (t_hi - t_lo) / k
    own = np.repeat(np.arange(n), k)
    starts = np.concatenate(([0], np.cumsum(k)[:-1]))
    pos = np.arange(own.size) - starts[own]
    lo = t_lo[own] + pos * width[own]
    hi = np.where(pos == k[own] - 1, t_hi[own], lo + width[own])

    acc = np.zeros(n)  # accepted panel contributions per point
    budget = np.full(n, tol)
    for _ in range(64):
        i15, err = _gk_pass(lo, hi, b1[own], b2[own], rho[own], inv_s[own])
        counts = np.bincount(own, minlength=n)
        split = (err > budget[own] / (2.0 * counts[own])) & (hi - lo > 1e-13)
        keep = ~split
        acc += np.bincount(own[keep], weights=i15[keep], minlength=n)
        budget -= np.bincount(own[keep], weights=err[keep], minlength=n)
        if not split.any():
            break
        mid = 0.5 * (lo[split] + hi[split])
        lo = np.concatenate([lo[split], mid])
        hi = np.concatenate([mid, hi[split]])
        own = np.concatenate([own[split], own[split]])
    else:
        # split depth exhausted; accept the leftover panels at their estimate
        i15, _ = _gk_pass(lo, hi, b1[own], b2[own], rho[own], inv_s[own])
        acc += np.bincount(own, weights=i15, minlength=n)
    return acc


def bivariate_normal_cdf(a1, b1, rho, tol: float = 1e-10):
    """P(X <= a1, Y <= b1) for standard bivariate normal with correlation rho.

    Vectorized over broadcastable array arguments.  Requires |rho| <= 1 - 1e-9
    (callers clamp first, see clamp_correlation).
    """
    a = np.asarray(a1, dtype=float)
    b = np.asarray(b1, dtype=float)
    r = np.asarray(rho, dtype=float)
    a, b, r = np.broadcast_arrays(a, b, r)
    shape = a.shape
    a = a.ravel()
    b = b.ravel()
    r = r.ravel()
    if np.any(np.abs(r) > RHO_MAX):
        raise InvalidParameterError("|rho| must be <= 1 - 1e-9; clamp first")

    out = np.zeros(a.size)
    done = (a <= -_TAIL_CUT) | (b <= -_TAIL_CUT)
    hi_a = (a >= _TAIL_CUT) & ~done
    out[hi_a] = ndtr(b[hi_a])
    done |= hi_a
    hi_b = (b >= _TAIL_CUT) & ~done
    out[hi_b] = ndtr(a[hi_b])
    done |= hi_b

    idx = np.nonzero(~done)[0]
    if idx.size:
        ac, bc, rc = a[idx], b[idx], r[idx]
        inv_s = 1.0 / np.sqrt((1.0 - rc) * (1.0 + rc))
        # integrate the shorter tail: below a when a <= 0, above a otherwise
        lower = ac <= 0.0
        t_lo = np.where(lower, -_TAIL_CUT, ac)
        t_hi = np.where(lower, ac, _TAIL_CUT)
        part = _cond_integral(
            t_lo, t_hi, bc, np.full(idx.size, -np.inf), rc, inv_s, tol
        )
        out[idx] = np.where(lower, part, ndtr(bc) - part)
    out = np.clip(out, 0.0, 1.0)
    return out.reshape(shape) if shape else float(out[0])


def bivariate_normal_pdf(a1, b1, rho):
    """Joint density of the standard bivariate normal at (a1, b1)."""
    a = np.asarray(a1, dtype=float)
    b = np.asarray(b1, dtype=float)
    r = np.asarray(rho, dtype=float)
    if np.any(np.abs(r) >= 1.0):
        raise InvalidParameterError("|rho| must be < 1")
    inv_s = 1.0 / np.sqrt((1.0 - r) * (1.0 + r))
    out = inv_s * std_normal_pdf(inv_s * (b - r * a)) * std_normal_pdf(a)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class BivariateArgs:
    """Rectangle limits (a2 <= X <= a1, b2 <= Y <= b1) and a correlation."""

    a1: float
    b1: float
    a2: float
    b2: float
    rho: float

    def __post_init__(self):
        if not (self.a2 <= self.a1 and self.b2 <= self.b1):
            raise InvalidParameterError(
                f"rectangle limits must be ordered: a2 <= a1 and b2 <= b1, "
                f"got a=({self.a2}, {self.a1}), b=({self.b2}, {self.b1})"
            )
        if abs(self.rho) > RHO_MAX:
            raise InvalidParameterError("|rho| must be <= 1 - 1e-9; clamp first")


def bvn_rectangle(a1, b1, a2, b2, rho, tol: float = 1e-10):
    """Vectorized P(a2 <= X <= a1, b2 <= Y <= b1).

    Evaluates the four-term inclusion-exclusion of bivariate_normal_cdf as a
    single conditional integral over [a2, a1], which avoids the cancellation
    of the differenced CDFs.  Round-off can still leave tiny negative values
    (tolerated to -1e-10); the result is clamped to [0, 1].
    """
    a1, b1, a2, b2, rho = np.broadcast_arrays(
        *[np.asarray(v, dtype=float) for v in (a1, b1, a2, b2, rho)]
    )
    shape = a1.shape
    a1f, b1f, a2f, b2f, rf = (v.ravel() for v in (a1, b1, a2, b2, rho))
    if np.any(a2f > a1f) or np.any(b2f > b1f):
        raise InvalidParameterError("rectangle limits must satisfy a2 <= a1, b2 <= b1")
    if np.any(np.abs(rf) > RHO_MAX):
        raise InvalidParameterError("|rho| must be <= 1 - 1e-9; clamp first")

    lo = np.maximum(a2f, -_TAIL_CUT)
    hi = np.minimum(a1f, _TAIL_CUT)
    val = np.zeros(a1f.size)
    live = (lo < hi) & (b1f > -_TAIL_CUT) & (b2f < _TAIL_CUT)
    if live.any():
        sub = np.nonzero(live)[0]
        rc = rf[sub]
        inv_s = 1.0 / np.sqrt((1.0 - rc) * (1.0 + rc))
        b_hi = np.minimum(b1f[sub], _TAIL_CUT + 1.0)
        b_lo = np.where(b2f[sub] <= -_TAIL_CUT, -np.inf, b2f[sub])
        val[sub] = _cond_integral(lo[sub], hi[sub], b_hi, b_lo, rc, inv_s, tol)
    val = np.clip(val, 0.0, 1.0)
    return val.reshape(shape) if shape else float(val[0])


def bivariate_rectangle_prob(args: BivariateArgs) -> float:
    """Rectangle probability for validated scalar arguments."""
    return float(bvn_rectangle(args.a1, args.b1, args.a2, args.b2, args.rho))


def noncentral_chisq_cdf(x, df: int, noncentrality: float):
    """Noncentral chi-square CDF via the Poisson mixture of central CDFs.

    The mixture index is truncated to a window around the Poisson mean that
    leaves total neglected mass below 1e-13, which bounds the truncation
    error by the same amount (each central CDF is <= 1).  Vectorized over x.
    """
    if df <= 0 or int(df) != df:
        raise InvalidParameterError(f"df must be a positive integer, got {df}")
    if noncentrality < 0:
        raise InvalidParameterError("noncentrality must be >= 0")
    x_arr = np.asarray(x, dtype=float)
    scalar = x_arr.ndim == 0
    x_arr = np.atleast_1d(x_arr).astype(float)
    out = np.zeros_like(x_arr)
    pos = x_arr > 0
    if pos.any():
        half = 0.5 * noncentrality
        if half == 0.0:
            out[pos] = chdtr(df, x_arr[pos])
        else:
            spread = 12.0 * np.sqrt(half) + 30.0
            j_lo = max(0, int(np.floor(half - spread)))
            j_hi = int(np.ceil(half + spread))
            while True:
                js = np.arange(j_lo, j_hi + 1)
                logw = js * np.log(half) - half - gammaln(js + 1)
                w = np.exp(logw)
                if 1.0 - w.sum() < 1e-13:
                    break
                j_lo = max(0, j_lo - 40)
                j_hi += 40
            cdfs = chdtr(df + 2.0 * js[:, None], x_arr[None, pos])
            out[pos] = w @ cdfs
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out
