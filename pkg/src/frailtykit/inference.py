"""Posterior sampling via component-blocked adaptive random-walk Metropolis.

Positive parameters (baseline rates or basis coefficients, frailty
variance) are sampled on the log scale with the change-of-variables
Jacobian folded into the target, so proposals are unconstrained.  Each
scalar coordinate is its own Metropolis block with a private proposal
scale; scales adapt toward a 0.44 acceptance rate during burn-in only and
are frozen afterwards, which keeps the retained chain Markov.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .data import ObservationRecord, as_clustered_arrays
from .diagnostics import ChainDiagnostics, compute_diagnostics
from .likelihood import (
    LikelihoodEvaluator,
    ModelSpec,
    ParameterVector,
)
from .waic import WaicResult, waic

_LOG_2PI = math.log(2.0 * math.pi)


class InitializationError(RuntimeError):
    """The chain initializer landed in a zero-posterior region."""


@dataclass(frozen=True)
class PriorSpec:
    """Weakly-informative default priors, all hyperparameters configurable.

    Baseline rates / basis coefficients: independent Gamma(shape, rate).
    Regression coefficients: independent Normal(0, sd).
    Frailty variance: Gamma(shape, rate).
    """

    baseline_shape: float = 0.01
    baseline_rate: float = 0.01
    beta_sd: float = 10.0
    frailty_shape: float = 0.01
    frailty_rate: float = 0.01

    def __post_init__(self):
        for name in ("baseline_shape", "baseline_rate", "beta_sd", "frailty_shape", "frailty_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ParameterLayout:
    """Flat-vector layout of the free parameters for one model.

    Order: baseline block (log scale in z-space), regression coefficients,
    then log frailty variance when the model has gamma frailty.
    """

    spec: ModelSpec
    n_covariates: int
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self):
        names = self.covariate_names or tuple(
            f"x{j + 1}" for j in range(self.n_covariates)
        )
        if len(names) != self.n_covariates:
            raise ValueError("covariate_names length does not match n_covariates")
        object.__setattr__(self, "covariate_names", tuple(names))

    @property
    def n_baseline(self) -> int:
        return self.spec.n_baseline_params

    @property
    def has_frailty(self) -> bool:
        return self.spec.frailty == "gamma"

    @property
    def dim(self) -> int:
        return self.n_baseline + self.n_covariates + (1 if self.has_frailty else 0)

    @property
    def names(self) -> list[str]:
        if self.spec.baseline == "pe":
            base = [f"rate_{j + 1}" for j in range(self.n_baseline)]
        else:
            base = [f"basis_{k}" for k in range(self.n_baseline)]
        out = base + [f"beta_{name}" for name in self.covariate_names]
        if self.has_frailty:
            out.append("frailty_var")
        return out

    def unpack_raw(self, z: np.ndarray):
        """z-space vector -> (baseline params, beta, frailty_var), no validation."""
        nb, p = self.n_baseline, self.n_covariates
        with np.errstate(over="ignore"):
            baseline = np.exp(z[:nb])
            fv = float(np.exp(z[nb + p])) if self.has_frailty else 0.0
        return baseline, z[nb:nb + p], fv

    def constrain(self, z: np.ndarray) -> np.ndarray:
        """Map a z-space vector to the original scale, same layout."""
        out = np.array(z, dtype=float)
        nb, p = self.n_baseline, self.n_covariates
        out[:nb] = np.exp(out[:nb])
        if self.has_frailty:
            out[nb + p] = np.exp(out[nb + p])
        return out

    def pack(self, params: ParameterVector) -> np.ndarray:
        baseline = params.rates if self.spec.baseline == "pe" else params.basis_coefs
        z = np.concatenate([np.log(baseline), params.beta])
        if self.has_frailty:
            z = np.append(z, np.log(params.frailty_var))
        return z

    def to_parameter_vector(self, constrained: np.ndarray) -> ParameterVector:
        nb, p = self.n_baseline, self.n_covariates
        baseline = constrained[:nb]
        beta = constrained[nb:nb + p]
        fv = float(constrained[nb + p]) if self.has_frailty else 0.0
        if self.spec.baseline == "pe":
            return ParameterVector(rates=baseline, beta=beta, frailty_var=fv)
        return ParameterVector(basis_coefs=baseline, beta=beta, frailty_var=fv)


def log_prior(z, layout: ParameterLayout, priors: PriorSpec) -> float:
    """Log prior density of a z-space point, Jacobian of the log transform
    included (the Gamma terms appear as a*z - rate*exp(z))."""
    z = np.asarray(z, dtype=float)
    nb, p = layout.n_baseline, layout.n_covariates
    a, b = priors.baseline_shape, priors.baseline_rate
    with np.errstate(over="ignore"):
        zb = z[:nb]
        lp = a * np.sum(zb) - b * np.sum(np.exp(zb))
        lp += nb * (a * math.log(b) - gammaln(a))
        if p:
            beta = z[nb:nb + p]
            lp += -0.5 * np.sum((beta / priors.beta_sd) ** 2)
            lp += -p * (math.log(priors.beta_sd) + 0.5 * _LOG_2PI)
        if layout.has_frailty:
            at, bt = priors.frailty_shape, priors.frailty_rate
            zt = z[nb + p]
            lp += at * zt - bt * np.exp(zt) + at * math.log(bt) - gammaln(at)
    return float(lp) if np.isfinite(lp) else -np.inf


def log_posterior(
    z,
    dataset: Sequence[ObservationRecord],
    spec: ModelSpec,
    priors: PriorSpec | None = None,
    covariate_names: Sequence[str] = (),
) -> float:
    """Unnormalized log posterior at a transformed (z-space) point.

    Sum of the marginal log-likelihood, the log priors, and the Jacobian
    of the log transform on positive parameters.  Returns -inf for invalid
    regions (e.g. overflowing frailty variance) instead of raising.
    """
    priors = priors or PriorSpec()
    data = as_clustered_arrays(dataset)
    layout = ParameterLayout(spec, data.covariates.shape[1], tuple(covariate_names))
    evaluator = LikelihoodEvaluator(data, spec)
    return _log_posterior(np.asarray(z, dtype=float), evaluator, layout, priors)


def _log_posterior(z, evaluator, layout, priors) -> float:
    lp = log_prior(z, layout, priors)
    if lp == -np.inf:
        return -np.inf
    baseline, beta, fv = layout.unpack_raw(z)
    if not np.all(np.isfinite(baseline)) or not np.isfinite(fv):
        return -np.inf
    ll = float(np.sum(evaluator.pointwise_raw(baseline, beta, fv)))
    return ll + lp


@dataclass(frozen=True)
class ChainConfig:
    """Sampler settings for one chain."""

    iterations: int = 10000
    burnin: int = 5000
    thin: int = 1
    seed: object = 0
    initial_scale: float = 0.5
    adapt_window: int = 50
    target_acceptance: float = 0.44

    def __post_init__(self):
        if self.burnin < 0 or self.iterations <= self.burnin:
            raise ValueError("need iterations > burnin >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")


@dataclass
class PosteriorDraws:
    """Retained MCMC draws on the original parameter scale.

    draws has shape (S, D) with the S draws of all chains stacked in chain
    order; `pointwise_ll` (S, n) holds the per-unit log-likelihood at each
    retained draw and feeds WAIC.  `acceptance` is the post-burn-in
    acceptance rate per chain and scalar block.
    """

    draws: np.ndarray
    param_names: list[str]
    pointwise_ll: np.ndarray | None
    acceptance: np.ndarray
    n_chains: int
    chain_length: int
    iterations: int
    burnin: int
    thin: int
    seed: object

    def __post_init__(self):
        if self.draws.ndim != 2 or self.draws.shape[0] < 1:
            raise ValueError("draws must be a nonempty (S, D) matrix")
        if self.draws.shape[0] != self.n_chains * self.chain_length:
            raise ValueError("draw count does not match chains x chain_length")
        if self.pointwise_ll is not None and self.pointwise_ll.shape[0] != self.draws.shape[0]:
            raise ValueError("pointwise_ll rows must match the number of draws")

    @property
    def n_draws(self) -> int:
        return int(self.draws.shape[0])

    def chain_array(self) -> np.ndarray:
        """Draws reshaped to (chains, draws per chain, dim)."""
        return self.draws.reshape(self.n_chains, self.chain_length, -1)


def _seed_tuple(seed) -> tuple:
    if isinstance(seed, (tuple, list)):
        return tuple(int(s) for s in seed)
    return (int(seed),)


def run_chain(
    init,
    target: Callable[[np.ndarray], float],
    config: ChainConfig,
    constrain: Callable[[np.ndarray], np.ndarray] | None = None,
    pointwise_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    param_names: Sequence[str] | None = None,
) -> PosteriorDraws:
    """Run one adaptive random-walk Metropolis chain.

    Parameters
    ----------
    init : array_like
        Starting point in the (transformed) sampling space.
    target : callable
        Log target density; may return -inf to reject a region.
    config : ChainConfig
    constrain : callable, optional
        Maps a sampling-space point to the reported (original) scale;
        identity when omitted.
    pointwise_fn : callable, optional
        Per-unit log-likelihood at a sampling-space point, recorded for
        every retained draw.
    """
    z = np.array(init, dtype=float).ravel()
    dim = z.size
    lp = float(target(z))
    if not np.isfinite(lp):
        raise InitializationError(
            f"initial point has non-finite log target ({lp}); "
            "choose a different initializer"
        )
    rng = np.random.default_rng(_seed_tuple(config.seed))
    normals = rng.standard_normal((config.iterations, dim))
    with np.errstate(divide="ignore"):
        log_unif = np.log(rng.random((config.iterations, dim)))

    scales = np.full(dim, config.initial_scale)
    n_keep = (config.iterations - config.burnin) // config.thin
    if n_keep < 1:
        raise ValueError("thinning leaves no retained draws")
    draws = np.empty((n_keep, dim))
    pointwise = None
    window_acc = np.zeros(dim)
    post_acc = np.zeros(dim)
    windows_done = 0
    in_window = 0
    kept = 0

    for it in range(config.iterations):
        warm = it < config.burnin
        for d in range(dim):
            old = z[d]
            z[d] = old + scales[d] * normals[it, d]
            lp_new = float(target(z))
            if log_unif[it, d] < lp_new - lp:
                lp = lp_new
                accepted = 1.0
            else:
                z[d] = old
                accepted = 0.0
            if warm:
                window_acc[d] += accepted
            else:
                post_acc[d] += accepted
        if warm:
            in_window += 1
            if in_window == config.adapt_window:
                windows_done += 1
                step = min(1.0, 4.0 / math.sqrt(windows_done))
                scales *= np.exp(
                    step * (window_acc / config.adapt_window - config.target_acceptance)
                )
                np.clip(scales, 1e-8, 1e4, out=scales)
                window_acc[:] = 0.0
                in_window = 0
        elif (it - config.burnin) % config.thin == config.thin - 1:
            draws[kept] = constrain(z) if constrain is not None else z
            if pointwise_fn is not None:
                row = pointwise_fn(z)
                if pointwise is None:
                    pointwise = np.empty((n_keep, row.shape[0]))
                pointwise[kept] = row
            kept += 1

    acceptance = post_acc / max(config.iterations - config.burnin, 1)
    names = list(param_names) if param_names else [f"param_{d}" for d in range(dim)]
    return PosteriorDraws(
        draws=draws,
        param_names=names,
        pointwise_ll=pointwise,
        acceptance=acceptance[None, :],
        n_chains=1,
        chain_length=n_keep,
        iterations=config.iterations,
        burnin=config.burnin,
        thin=config.thin,
        seed=config.seed,
    )


def sample_posterior(
    init,
    target,
    config: ChainConfig,
    n_chains: int = 4,
    constrain=None,
    pointwise_fn=None,
    param_names=None,
    init_jitter: float = 0.05,
) -> PosteriorDraws:
    """Run independent chains and stack their retained draws in chain order.

    Chain c draws its randomness from the stream (seed, c); starting points
    are lightly jittered (deterministically per chain) so split-R-hat has
    between-chain dispersion to work with.
    """
    if n_chains < 1:
        raise ValueError("n_chains must be >= 1")
    base = _seed_tuple(config.seed)
    z0 = np.array(init, dtype=float).ravel()
    results = []
    for c in range(n_chains):
        chain_cfg = replace(config, seed=base + (c, 0))
        start = z0
        if init_jitter > 0 and n_chains > 1:
            jit_rng = np.random.default_rng(base + (c, 1))
            candidate = z0 + init_jitter * jit_rng.standard_normal(z0.size)
            if np.isfinite(target(candidate)):
                start = candidate
        results.append(
            run_chain(start, target, chain_cfg, constrain, pointwise_fn, param_names)
        )
    draws = np.vstack([r.draws for r in results])
    pointwise = None
    if results[0].pointwise_ll is not None:
        pointwise = np.vstack([r.pointwise_ll for r in results])
    return PosteriorDraws(
        draws=draws,
        param_names=results[0].param_names,
        pointwise_ll=pointwise,
        acceptance=np.vstack([r.acceptance for r in results]),
        n_chains=n_chains,
        chain_length=results[0].chain_length,
        iterations=config.iterations,
        burnin=config.burnin,
        thin=config.thin,
        seed=config.seed,
    )


@dataclass(frozen=True)
class ParamSummary:
    mean: float
    sd: float
    lower: float
    upper: float


def summarize_posterior(draws: PosteriorDraws, level: float = 0.95) -> dict[str, ParamSummary]:
    """Posterior mean, sample sd, and equal-tailed credible interval per
    parameter, with linearly interpolated quantiles."""
    if not 0 < level < 1:
        raise ValueError(f"level must be in (0, 1), got {level}")
    if draws.n_draws < 2:
        raise ValueError("need at least 2 retained draws to summarize")
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(draws.draws, [alpha, 1.0 - alpha], axis=0)
    means = draws.draws.mean(axis=0)
    sds = draws.draws.std(axis=0, ddof=1)
    return {
        name: ParamSummary(float(means[d]), float(sds[d]), float(lo[d]), float(hi[d]))
        for d, name in enumerate(draws.param_names)
    }


@dataclass
class FitResult:
    """Everything a fit produces: draws, summaries, diagnostics, WAIC."""

    spec: ModelSpec
    priors: PriorSpec
    draws: PosteriorDraws
    summary: dict[str, ParamSummary]
    diagnostics: ChainDiagnostics
    waic: WaicResult
    level: float
    seed: object
    n_records: int
    n_clusters: int

    @property
    def param_names(self) -> list[str]:
        return self.draws.param_names


def _initial_point(data, layout: ParameterLayout) -> np.ndarray:
    """Crude constant-hazard initializer: overall events per unit exposure."""
    events = max(float(np.sum(data.status)), 1.0)
    crude = events / float(np.sum(data.time))
    z = np.concatenate([
        np.full(layout.n_baseline, math.log(crude)),
        np.zeros(layout.n_covariates),
    ])
    if layout.has_frailty:
        z = np.append(z, math.log(0.2))
    return z


def fit_model(
    dataset: Sequence[ObservationRecord],
    spec: ModelSpec,
    priors: PriorSpec | None = None,
    *,
    iterations: int = 10000,
    burnin: int = 5000,
    thin: int = 1,
    chains: int = 4,
    seed: object = 0,
    level: float = 0.95,
    covariate_names: Sequence[str] = (),
) -> FitResult:
    """Fit a model by MCMC and assemble summaries, diagnostics, and WAIC.

    The spec must be fully evaluable (grid attached for PE, degree and
    horizon for BP); use :func:`frailtykit.likelihood.resolve_model_spec`
    to derive those from data.
    """
    priors = priors or PriorSpec()
    data = as_clustered_arrays(dataset)
    layout = ParameterLayout(spec, data.covariates.shape[1], tuple(covariate_names))
    evaluator = LikelihoodEvaluator(data, spec)

    def target(z):
        return _log_posterior(z, evaluator, layout, priors)

    def pointwise_fn(z):
        baseline, beta, fv = layout.unpack_raw(z)
        return evaluator.pointwise_raw(baseline, beta, fv)

    config = ChainConfig(iterations=iterations, burnin=burnin, thin=thin, seed=seed)
    draws = sample_posterior(
        _initial_point(data, layout),
        target,
        config,
        n_chains=chains,
        constrain=layout.constrain,
        pointwise_fn=pointwise_fn,
        param_names=layout.names,
    )
    return FitResult(
        spec=spec,
        priors=priors,
        draws=draws,
        summary=summarize_posterior(draws, level),
        diagnostics=compute_diagnostics(draws.chain_array()),
        waic=waic(draws.pointwise_ll),
        level=level,
        seed=seed,
        n_records=data.n_records,
        n_clusters=data.n_clusters,
    )
