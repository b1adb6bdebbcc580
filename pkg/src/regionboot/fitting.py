"""Maximum-likelihood estimation of scaling-model parameters and AIC selection.

One-step counts give a binomial likelihood per scale; two-step counts give a
four-category likelihood coupling each scale pair through the joint
probability.  Constrained parameters are optimized through smooth
reparameterizations (d = exp(.), beta0 = -d/2 + exp(.), logistic maps for
beta2 and m), so the simplex search and the Newton polish both work on an
unconstrained vector.  The search itself is a fixed, deterministic schedule:
a coarse grid of data-informed guesses, Nelder-Mead from the five best, then
a finite-difference Newton polish of the winner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .errors import ConfigError, InvalidParameterError, SelectionError
from .models import (
    PROB_EPS,
    ModelSpec,
    ScalingModel,
    marginal_prob,
    two_step_probs,
)
from .sampling import MultiscaleCounts
from .distributions import std_normal_quantile

__all__ = [
    "FitResult",
    "ModelSelection",
    "loglik_one_step",
    "loglik_two_step",
    "fit",
    "select",
]

M_BOUNDS = (0.5, 1e6)
GRAD_TOL = 1e-5


def loglik_one_step(model: ScalingModel, counts: MultiscaleCounts) -> float:
    """Binomial log-likelihood sum_i C_i log f_i + (B_i - C_i) log(1 - f_i)."""
    if counts.mode != "one-step":
        raise ConfigError("one-step likelihood requires one-step counts")
    sigma2, _, b, c, _, _ = counts.arrays()
    f = np.clip(marginal_prob(model, sigma2), PROB_EPS, 1.0 - PROB_EPS)
    return float(np.sum(c * np.log(f) + (b - c) * np.log1p(-f)))


def loglik_two_step(model: ScalingModel, counts: MultiscaleCounts) -> float:
    """Four-category log-likelihood of the two-step counts (C, D, E per scale)."""
    if counts.mode != "two-step":
        raise ConfigError("two-step likelihood requires two-step counts")
    sigma2, tau2, b, c, d, e = counts.arrays()
    f_s, f_t, g = two_step_probs(model, sigma2, tau2)
    p11 = np.clip(g, PROB_EPS, 1.0)
    p10 = np.clip(f_s - g, PROB_EPS, 1.0)
    p01 = np.clip(f_t - g, PROB_EPS, 1.0)
    p00 = np.clip(1.0 - f_s - f_t + g, PROB_EPS, 1.0)
    return float(
        np.sum(
            e * np.log(p11)
            + (c - e) * np.log(p10)
            + (d - e) * np.log(p01)
            + (b - c - d + e) * np.log(p00)
        )
    )


@dataclass
class FitResult:
    """A fitted model: parameters, likelihood, AIC, and convergence diagnostics."""

    spec: ModelSpec
    params: dict[str, float]  # full parameter dict (free + fixed)
    log_lik: float
    aic: float
    n_free: int
    converged: bool
    grad_norm: float  # inf-norm of the FD gradient in unconstrained coordinates
    active_constraints: tuple[str, ...]
    se: dict[str, float] | None
    n_eval: int

    @property
    def name(self) -> str:
        return self.spec.name

    def build(self) -> ScalingModel:
        return self.spec.build(self.params)

    def to_dict(self) -> dict:
        out = self.spec.to_dict(self.params)
        out.update(
            {
                "logLik": self.log_lik,
                "aic": self.aic,
                "n_free": self.n_free,
                "converged": self.converged,
                "grad_norm": self.grad_norm,
                "active_constraints": list(self.active_constraints),
                "se": None if self.se is None else {k: float(v) for k, v in self.se.items()},
            }
        )
        return out


@dataclass
class ModelSelection:
    """Fit results for every candidate plus the AIC-minimizing choice."""

    results: list[FitResult]
    chosen_index: int

    @property
    def chosen(self) -> FitResult:
        return self.results[self.chosen_index]

    def aic_table(self) -> list[dict]:
        best = self.chosen.aic
        return [
            {
                "name": r.name,
                "aic": r.aic,
                "delta_aic": r.aic - best,
                "logLik": r.log_lik,
                "n_free": r.n_free,
                "converged": r.converged,
                "chosen": i == self.chosen_index,
            }
            for i, r in enumerate(self.results)
        ]


class _Transform:
    """Bijection between the free parameters and an unconstrained vector."""

    def __init__(self, spec: ModelSpec, sigmas: np.ndarray):
        self.spec = spec
        self.names = spec.free_names()
        self.three_region = spec.shape != "two_region"
        # feasible interval for beta2: 1 + beta2*(sigma-1) >= 0.05 across every
        # sigma and tau the model is evaluated at
        lo, hi = -np.inf, np.inf
        for s in sigmas:
            if s > 1.0:
                lo = max(lo, -0.95 / (s - 1.0))
            elif s < 1.0:
                hi = min(hi, 0.95 / (1.0 - s))
        if not np.isfinite(lo) or not np.isfinite(hi):
            lo, hi = -5.0, 5.0
        self.beta2_bounds = (lo, hi)
        self.log_m_bounds = (np.log(M_BOUNDS[0]), np.log(M_BOUNDS[1]))

    def _box(self, x: float, lo: float, hi: float) -> float:
        return lo + (hi - lo) * expit(x)

    def _unbox(self, v: float, lo: float, hi: float) -> float:
        frac = np.clip((v - lo) / (hi - lo), 1e-12, 1.0 - 1e-12)
        return float(logit(frac))

    def to_params(self, x: np.ndarray) -> dict[str, float]:
        vals = dict(zip(self.names, x))
        out: dict[str, float] = {}
        if "d" in vals:
            out["d"] = float(np.exp(np.clip(vals["d"], -40.0, 40.0)))
        for name, xv in vals.items():
            if name == "d":
                continue
            if name == "beta0" and self.three_region:
                out["beta0"] = -out["d"] / 2.0 + float(np.exp(np.clip(xv, -40.0, 40.0)))
            elif name == "beta2":
                out["beta2"] = self._box(xv, *self.beta2_bounds)
            elif name == "m":
                out["m"] = float(np.exp(self._box(xv, *self.log_m_bounds)))
            else:
                out[name] = float(xv)
        return out

    def from_params(self, params: dict[str, float]) -> np.ndarray:
        x = []
        for name in self.names:
            v = params[name]
            if name == "d":
                x.append(np.log(max(v, 1e-12)))
            elif name == "beta0" and self.three_region:
                x.append(np.log(max(v + params["d"] / 2.0, 1e-12)))
            elif name == "beta2":
                x.append(self._unbox(v, *self.beta2_bounds))
            elif name == "m":
                x.append(self._unbox(np.log(max(v, 1e-300)), *self.log_m_bounds))
            else:
                x.append(float(v))
        return np.asarray(x, dtype=float)

    def active_flags(self, x: np.ndarray) -> tuple[str, ...]:
        flags = []
        for name, xv in zip(self.names, x):
            if name in ("beta2", "m") and abs(xv) > 12.0:
                flags.append(name)
            elif name == "d" and xv < -12.0:
                flags.append(name)
            elif name == "beta0" and self.three_region and xv < -12.0:
                flags.append(name)
        return tuple(flags)


def _observed_psi(counts: MultiscaleCounts) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed normalized bootstrap z-values at every sampled scale."""
    sigma2, tau2, b, c, d, _ = counts.arrays()
    s_list = [sigma2]
    p_list = [(c + 0.5) / (b + 1.0)]
    if counts.mode == "two-step":
        s_list.append(tau2)
        p_list.append((d + 0.5) / (b + 1.0))
    s = np.concatenate(s_list)
    p = np.clip(np.concatenate(p_list), 1e-7, 1.0 - 1e-7)
    psi_hat = -np.sqrt(s) * std_normal_quantile(p)
    return s, psi_hat


def _ls_coeffs(basis: np.ndarray, target: np.ndarray) -> np.ndarray:
    coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
    return coef


def _initial_guesses(spec: ModelSpec, counts: MultiscaleCounts) -> list[dict[str, float]]:
    """Deterministic coarse-grid parameter guesses in the original space."""
    s, psi_hat = _observed_psi(counts)
    sigma = np.sqrt(s)
    fixed = dict(spec.fixed)
    guesses: list[dict[str, float]] = []

    if spec.shape == "two_region":
        if spec.family == "poly":
            if "beta1" in fixed:  # flat submodel
                base = {"beta0": float(np.mean(psi_hat))}
                deltas = (0.0, 0.4, -0.4, 1.0, -1.0)
                guesses = [{"beta0": base["beta0"] + dv} for dv in deltas]
            else:
                q = spec.degree
                basis = np.vander(s, q + 1, increasing=True)
                coef = _ls_coeffs(basis, psi_hat)
                base = {f"beta{j}": float(coef[j]) for j in range(q + 1)}
                guesses.append(dict(base))
                shrunk = dict(base)
                for j in range(1, q + 1):
                    shrunk[f"beta{j}"] *= 0.3
                guesses.append(shrunk)
                bumped = dict(base)
                bumped["beta0"] += 0.3
                guesses.append(bumped)
        else:
            b2_fixed = fixed.get("beta2")
            cands = [b2_fixed] if b2_fixed is not None else [-0.3, 0.2, 0.6, 1.0, 1.3]
            scored = []
            for b2 in cands:
                w = 1.0 + b2 * (sigma - 1.0)
                if np.any(w <= 0.05):
                    continue
                basis = np.column_stack([np.ones_like(s), 1.0 / w])
                coef = _ls_coeffs(basis, psi_hat)
                resid = basis @ coef - psi_hat
                scored.append((float(resid @ resid), b2, coef))
            scored.sort(key=lambda t: t[0])
            for _, b2, coef in scored[:3]:
                g = {"beta0": float(coef[0]), "beta1": float(coef[1])}
                if b2_fixed is None:
                    g["beta2"] = float(b2)
                guesses.append(g)
            if not guesses:
                g = {"beta0": float(np.mean(psi_hat)), "beta1": 0.1}
                if b2_fixed is None:
                    g["beta2"] = 0.5
                guesses.append(g)
    else:
        # three-region shapes: coarse grid over separation and offset fraction
        basis = np.column_stack([np.ones_like(s), s])
        coef = _ls_coeffs(basis, psi_hat)
        slope = float(coef[1])
        for d0 in (0.5, 1.0, 2.0, 4.0):
            for frac in (0.12, 0.4):
                g = {"beta0": frac * d0, "d": d0}
                if "beta1" not in fixed:
                    g["beta1"] = 0.0
                if spec.family == "singular" and "beta2" not in fixed:
                    g["beta2"] = 0.5
                guesses.append(g)
        informed = {"beta0": max(float(coef[0]), 0.05), "d": max(2.2 * float(coef[0]), 0.3)}
        if "beta1" not in fixed:
            informed["beta1"] = slope
        if spec.family == "singular" and "beta2" not in fixed:
            informed["beta2"] = 0.5
        guesses.insert(0, informed)

    if spec.with_correction:
        with_m = []
        for g in guesses:
            for m0 in (3.0, 25.0):
                gm = dict(g)
                gm["m"] = m0
                with_m.append(gm)
        guesses = with_m
    return guesses


def _fd_gradient(fun, x, h=1.2e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h * max(1.0, abs(x[i]))
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * e[i])
    return g


def _fd_hessian(fun, x, h=1e-4):
    n = x.size
    hs = h * np.maximum(1.0, np.abs(x))
    hess = np.zeros((n, n))
    f0 = fun(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = hs[i]
        fp = fun(x + ei)
        fm = fun(x - ei)
        hess[i, i] = (fp - 2.0 * f0 + fm) / hs[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = hs[j]
            fpp = fun(x + ei + ej)
            fpm = fun(x + ei - ej)
            fmp = fun(x - ei + ej)
            fmm = fun(x - ei - ej)
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * hs[i] * hs[j])
    return hess


def _newton_polish(fun, x, max_iter=8):
    """Levenberg-damped FD-Newton refinement.

    Returns (x, f, grad_inf): regularizes the Hessian when a step fails to
    improve, which handles the near-flat directions left by weakly
    identified parameters (beta2, m) without giving up on the others.
    Stops early when iterations stop moving the objective (noise floor).
    """
    fx = fun(x)
    grad = _fd_gradient(fun, x)
    lam = 0.0
    for _ in range(max_iter):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < GRAD_TOL / 2.0 or not np.isfinite(fx):
            break
        hess = _fd_hessian(fun, x)
        scale = max(1.0, float(np.max(np.abs(np.diag(hess)))))
        improved = False
        f_before = fx
        for _ in range(6):
            try:
                step = np.linalg.solve(
                    hess + lam * scale * np.eye(x.size), -grad
                )
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                x_new = x + step
                f_new = fun(x_new)
                if np.isfinite(f_new) and f_new <= fx + 1e-11:
                    x, fx = x_new, f_new
                    improved = True
                    lam = max(lam / 10.0, 0.0) if lam > 1e-8 else 0.0
                    break
            lam = 1e-6 if lam == 0.0 else lam * 30.0
        if not improved:
            break
        grad = _fd_gradient(fun, x)
        if f_before - fx < 1e-10 * (1.0 + abs(fx)):
            break  # objective at its noise floor
    gnorm = float(np.max(np.abs(grad)))
    return x, fx, gnorm


def fit(
    spec: ModelSpec,
    counts: MultiscaleCounts,
    allow_one_step_three_region: bool = False,
    warm_start: dict[str, float] | None = None,
    compute_se: bool = True,
) -> FitResult:
    """Maximize the appropriate likelihood for one model template.

    Deterministic given the counts: grid guesses (plus an optional warm
    start), Nelder-Mead from the five best, then a Newton polish of the
    winner.  Non-convergence is reported in the result rather than raised.
    """
    two_step = counts.mode == "two-step"
    if spec.shape != "two_region" and not two_step and not allow_one_step_three_region:
        raise ConfigError(
            "three-region fits require two-step counts (one-step counts cannot "
            "separate a small separation from strong curvature); pass "
            "allow_one_step_three_region=True to override"
        )
    loglik = loglik_two_step if two_step else loglik_one_step
    transform = _Transform(spec, counts.grid().all_sigmas)
    names = transform.names
    dim = max(1, len(names))
    n_eval = 0

    def nll(x: np.ndarray) -> float:
        nonlocal n_eval
        n_eval += 1
        try:
            model = spec.build(spec.full_params(transform.to_params(x)))
            return -loglik(model, counts)
        except InvalidParameterError:
            return np.inf

    # rank the coarse guesses, keep the five best as simplex starts
    guesses = _initial_guesses(spec, counts)
    warmed = False
    if warm_start is not None:
        fixed = dict(spec.fixed)
        adapted = {
            n: warm_start[n] for n in names if n in warm_start and n not in fixed
        }
        if len(adapted) == len(names):
            guesses.insert(0, adapted)
            warmed = True
    starts = []
    for g in guesses:
        try:
            x0 = transform.from_params(g)
        except (KeyError, ValueError):
            continue
        starts.append((nll(x0), x0))
    if not starts:
        raise InvalidParameterError(f"no feasible starting point for {spec.name}")
    if warmed and starts[0][0] <= min(f for f, _ in starts[1:]) - 5.0:
        # the warm start from a same-family fit clearly dominates: refine it
        # alone instead of probing the coarse grid
        starts = starts[:1]
    else:
        starts.sort(key=lambda t: t[0])
        # drop hopeless starts (way above the best guess) but keep up to five
        cutoff = starts[0][0] + 3000.0
        starts = [s for s in starts[:5] if s[0] <= cutoff] or starts[:1]

    best_x, best_f = starts[0][1], starts[0][0]
    for rank, (f0, x0) in enumerate(starts):
        budget = (50 if rank == 0 else 25) * dim
        res = minimize(
            nll,
            x0,
            method="Nelder-Mead",
            options={"maxfev": budget, "xatol": 1e-3, "fatol": 1e-4},
        )
        if res.fun < best_f:
            best_x, best_f = res.x, res.fun
    res = minimize(
        nll,
        best_x,
        method="Nelder-Mead",
        options={"maxfev": 120 * dim, "xatol": 1e-6, "fatol": 1e-9},
    )
    if res.fun < best_f:
        best_x, best_f = res.x, res.fun

    best_x, best_f, grad_norm = _newton_polish(nll, np.asarray(best_x))

    params = spec.full_params(transform.to_params(best_x))
    log_lik = -best_f
    n_free = len(names)
    flags = transform.active_flags(best_x)
    converged = bool(np.isfinite(log_lik) and grad_norm < GRAD_TOL)

    se = _standard_errors(spec, counts, params, names, loglik) if compute_se else None

    return FitResult(
        spec=spec,
        params=params,
        log_lik=log_lik,
        aic=-2.0 * log_lik + 2.0 * n_free,
        n_free=n_free,
        converged=converged,
        grad_norm=grad_norm,
        active_constraints=flags,
        se=se,
        n_eval=n_eval,
    )


def _standard_errors(spec, counts, params, names, loglik):
    """Observed-information SEs from an FD Hessian in the original space."""

    def ll_of(vec: np.ndarray) -> float:
        p = dict(params)
        p.update(dict(zip(names, vec)))
        try:
            return loglik(spec.build(p), counts)
        except InvalidParameterError:
            return np.nan

    phi = np.asarray([params[n] for n in names], dtype=float)
    try:
        hess = _fd_hessian(ll_of, phi, h=1e-4)
        if not np.all(np.isfinite(hess)):
            return None
        cov = np.linalg.inv(-hess)
        diag = np.diag(cov)
        if np.any(diag <= 0):
            return None
        return {n: float(np.sqrt(v)) for n, v in zip(names, diag)}
    except np.linalg.LinAlgError:
        return None


def select(
    specs: list[ModelSpec],
    counts: MultiscaleCounts,
    allow_one_step_three_region: bool = False,
    compute_se: bool = True,
) -> ModelSelection:
    """Fit every candidate and choose the AIC minimizer.

    Ties break toward fewer free parameters, then earlier position in the
    candidate list.  Candidates that error out are dropped; if none remain
    usable a SelectionError carries the diagnostics.
    """
    if not specs:
        raise SelectionError("empty candidate list")
    results: list[FitResult] = []
    failures: list[str] = []
    warm: dict[tuple[str, str], dict[str, float]] = {}
    for spec in specs:
        try:
            res = fit(
                spec,
                counts,
                allow_one_step_three_region,
                warm_start=warm.get((spec.shape, spec.family)),
                compute_se=compute_se,
            )
            results.append(res)
            key = (spec.shape, spec.family)
            if np.isfinite(res.log_lik) and key not in warm:
                warm[key] = res.params
        except (InvalidParameterError, ConfigError) as exc:
            failures.append(f"{spec.name}: {exc}")
    usable = [i for i, r in enumerate(results) if np.isfinite(r.aic)]
    if not usable:
        raise SelectionError(
            "no candidate model produced a usable fit: " + "; ".join(failures)
        )
    chosen = min(usable, key=lambda i: (results[i].aic, results[i].n_free, i))
    return ModelSelection(results=results, chosen_index=chosen)
