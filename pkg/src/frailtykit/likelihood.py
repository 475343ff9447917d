"""Model specification and frailty-marginalized log-likelihoods.

A model couples a baseline hazard family (piecewise exponential on a time
grid, or Bernstein polynomial on a rescaled axis) with proportional-hazards
covariate effects and an optional cluster-shared gamma frailty.  The gamma
frailty has mean 1 and variance `frailty_var`; it is integrated out in
closed form, so the likelihood of a cluster with d events and cumulative
hazard total A (covariates included) is

    Gamma(1/v + d) / Gamma(1/v) * v^d
        * prod_events[h0(t) e^{x'b}] * (1 + v A)^{-(1/v + d)}

with v = frailty_var.  All computation is carried out in log space; an
invalid parameter region is signalled with -inf rather than an exception
so a sampler can reject the move.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .data import ObservationRecord, as_clustered_arrays, ClusteredArrays
from .hazards import (
    TimeGrid,
    bernstein_basis,
    bernstein_cum_basis,
    build_time_grid,
    interval_index,
)

BASELINES = ("pe", "bp")
FRAILTIES = ("gamma", "none")

# Default horizon margin keeps u = t/horizon strictly below 1 at the data.
HORIZON_MARGIN = 1.01


@dataclass(frozen=True)
class ModelSpec:
    """Baseline family, frailty family, and their structural settings.

    For the piecewise-exponential baseline the concrete `grid` must be
    attached (the interval count J is `grid.n_intervals`); for the
    Bernstein baseline `degree` and `horizon` are required.
    """

    baseline: str
    frailty: str
    grid: TimeGrid | None = None
    degree: int | None = None
    horizon: float | None = None

    def __post_init__(self):
        if self.baseline not in BASELINES:
            raise ValueError(f"baseline must be one of {BASELINES}, got {self.baseline!r}")
        if self.frailty not in FRAILTIES:
            raise ValueError(f"frailty must be one of {FRAILTIES}, got {self.frailty!r}")
        if self.baseline == "pe":
            if self.grid is None:
                raise ValueError("piecewise-exponential baseline requires a grid")
        else:
            if self.degree is None or self.degree < 1:
                raise ValueError("Bernstein baseline requires degree >= 1")
            if self.horizon is None or not self.horizon > 0:
                raise ValueError("Bernstein baseline requires a positive horizon")

    @property
    def n_intervals(self) -> int | None:
        return None if self.grid is None else self.grid.n_intervals

    @property
    def n_baseline_params(self) -> int:
        if self.baseline == "pe":
            return self.grid.n_intervals
        return self.degree + 1


def resolve_model_spec(
    dataset: Sequence[ObservationRecord],
    baseline: str,
    frailty: str,
    n_intervals: int | None = None,
    cutpoints=None,
    degree: int | None = None,
    horizon: float | None = None,
) -> ModelSpec:
    """Build a fully evaluable ModelSpec, deriving data-dependent pieces.

    PE: uses explicit `cutpoints` when given, otherwise builds an
    event-quantile grid with `n_intervals` intervals.  BP: `horizon`
    defaults to 1.01 times the largest observed time.
    """
    if baseline == "pe":
        if cutpoints is not None:
            grid = TimeGrid(cutpoints=np.asarray(cutpoints, dtype=float))
        else:
            if n_intervals is None:
                raise ValueError("pe baseline needs n_intervals or explicit cutpoints")
            events = [r.time for r in dataset if r.status == 1]
            grid = build_time_grid(events, n_intervals)
        return ModelSpec(baseline="pe", frailty=frailty, grid=grid)
    if degree is None:
        raise ValueError("bp baseline needs a degree")
    if horizon is None:
        horizon = HORIZON_MARGIN * max(r.time for r in dataset)
    return ModelSpec(baseline="bp", frailty=frailty, degree=degree, horizon=horizon)


@dataclass(frozen=True)
class ParameterVector:
    """All free parameters of a model.

    rates        positive PE interval rates (length J), PE baseline only.
    basis_coefs  nonnegative Bernstein coefficients (length degree + 1),
                 BP baseline only; at least one coefficient positive.
    beta         covariate log hazard ratios (length p).
    frailty_var  variance of the mean-1 gamma frailty (0 when no frailty).
    """

    rates: np.ndarray | None = None
    basis_coefs: np.ndarray | None = None
    beta: np.ndarray = ()
    frailty_var: float = 0.0

    def __post_init__(self):
        if self.rates is not None:
            rates = np.asarray(self.rates, dtype=float).ravel()
            object.__setattr__(self, "rates", rates)
            if np.any(rates <= 0):
                raise ValueError("all rates must be positive")
        if self.basis_coefs is not None:
            coefs = np.asarray(self.basis_coefs, dtype=float).ravel()
            object.__setattr__(self, "basis_coefs", coefs)
            if np.any(coefs < 0) or not np.any(coefs > 0):
                raise ValueError(
                    "basis coefficients must be nonnegative with at least one positive"
                )
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float).ravel())
        if self.frailty_var < 0:
            raise ValueError(f"frailty_var must be >= 0, got {self.frailty_var}")


def _check_params(params: ParameterVector, spec: ModelSpec) -> None:
    if spec.baseline == "pe":
        if params.rates is None or params.rates.size != spec.grid.n_intervals:
            raise ValueError("params.rates does not match the model grid")
    else:
        if params.basis_coefs is None or params.basis_coefs.size != spec.degree + 1:
            raise ValueError("params.basis_coefs does not match the model degree")
    if spec.frailty == "gamma" and not params.frailty_var > 0:
        raise ValueError("gamma frailty requires frailty_var > 0")


class LikelihoodEvaluator:
    """Repeated-evaluation engine for one dataset and model structure.

    Precomputes everything that depends on the data and the model
    structure but not on the parameter values: grid interval indices for
    the PE baseline, basis and integrated-basis matrices for the BP
    baseline.  Each evaluation is then a handful of vectorized array
    operations, which is what makes MCMC affordable.
    """

    def __init__(self, dataset: Sequence[ObservationRecord] | ClusteredArrays, spec: ModelSpec):
        self.spec = spec
        self.data = dataset if isinstance(dataset, ClusteredArrays) else as_clustered_arrays(dataset)
        d = self.data
        if spec.baseline == "pe":
            cuts = spec.grid.cutpoints
            self._idx = interval_index(d.time, spec.grid)
            self._dt = d.time - cuts[self._idx]
            self._widths = np.diff(cuts)
        else:
            u = d.time / spec.horizon
            uc = np.minimum(u, 1.0)
            self._basis = bernstein_basis(uc, spec.degree)
            cum = spec.horizon * bernstein_cum_basis(uc, spec.degree)
            over = u > 1.0
            if np.any(over):
                # frozen-hazard tail adds (t - horizon) * last coefficient
                cum = cum.copy()
                cum[over, -1] += d.time[over] - spec.horizon
            self._cum_basis = cum

    @property
    def n_units(self) -> int:
        """Number of pointwise log-likelihood entries (clusters under
        gamma frailty, records otherwise)."""
        if self.spec.frailty == "gamma":
            return self.data.n_clusters
        return self.data.n_records

    def _baseline(self, baseline_params: np.ndarray):
        if self.spec.baseline == "pe":
            h0 = baseline_params[self._idx]
            base = np.concatenate(
                [[0.0], np.cumsum(baseline_params[:-1] * self._widths)]
            )
            H0 = base[self._idx] + h0 * self._dt
        else:
            h0 = self._basis @ baseline_params
            H0 = self._cum_basis @ baseline_params
        return h0, H0

    def pointwise_raw(self, baseline_params, beta, frailty_var) -> np.ndarray:
        """Pointwise log-likelihood without parameter validation.

        Invalid regions (zero hazard at an event, overflow, nonpositive
        frailty variance under gamma frailty) yield -inf entries instead
        of raising, so a Metropolis sampler can reject the proposal.
        """
        d = self.data
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            h0, H0 = self._baseline(np.asarray(baseline_params, dtype=float))
            eta = d.covariates @ np.asarray(beta, dtype=float) if d.covariates.shape[1] else np.zeros(d.n_records)
            event_term = np.where(d.status > 0, np.log(h0) + eta, 0.0)
            risk = H0 * np.exp(eta)
            if self.spec.frailty == "none":
                out = event_term - risk
            else:
                v = float(frailty_var)
                if not v > 0:
                    return np.full(d.n_clusters, -np.inf)
                inv = 1.0 / v
                a_tot = np.add.reduceat(risk, d.cluster_start)
                ev_tot = np.add.reduceat(event_term, d.cluster_start)
                n_ev = d.n_events
                out = (
                    gammaln(inv + n_ev)
                    - gammaln(inv)
                    + n_ev * np.log(v)
                    + ev_tot
                    - (inv + n_ev) * np.log1p(v * a_tot)
                )
            return np.where(np.isnan(out), -np.inf, out)

    def pointwise(self, params: ParameterVector) -> np.ndarray:
        _check_params(params, self.spec)
        baseline = params.rates if self.spec.baseline == "pe" else params.basis_coefs
        return self.pointwise_raw(baseline, params.beta, params.frailty_var)

    def total(self, params: ParameterVector) -> float:
        return float(np.sum(self.pointwise(params)))


def pointwise_log_likelihood(
    dataset: Sequence[ObservationRecord], params: ParameterVector, spec: ModelSpec
) -> np.ndarray:
    """Per-unit log-likelihood contributions.

    Under gamma frailty the exchangeable unit is the cluster, so the
    vector has one entry per cluster (ascending cluster id); without
    frailty it has one entry per record (canonical order).  Entries sum
    to :func:`total_log_likelihood`.
    """
    return LikelihoodEvaluator(dataset, spec).pointwise(params)


def total_log_likelihood(
    dataset: Sequence[ObservationRecord], params: ParameterVector, spec: ModelSpec
) -> float:
    """Dataset log-likelihood: the sum of the pointwise contributions."""
    return float(np.sum(pointwise_log_likelihood(dataset, params, spec)))


def cluster_log_likelihood(
    records: Sequence[ObservationRecord], params: ParameterVector, spec: ModelSpec
) -> float:
    """Log-likelihood of a single cluster (frailty marginalized).

    With gamma frailty this is the closed-form marginal over the shared
    frailty; without frailty it is the usual sum of censored log-hazard
    contributions.  Raises if the records span more than one cluster.
    """
    records = list(records)
    if not records:
        raise ValueError("cluster is empty")
    ids = {r.cluster_id for r in records}
    if len(ids) != 1:
        raise ValueError(f"records span {len(ids)} clusters, expected exactly one")
    return total_log_likelihood(records, params, spec)
