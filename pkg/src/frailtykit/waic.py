"""Widely applicable information criterion and model ranking.

Given an S x n matrix of pointwise log-likelihoods (S posterior draws,
n data units) the criterion combines the log pointwise predictive density
with an effective-parameter penalty computed from the posterior variance
of the pointwise log-likelihood.  The variance deliberately uses the 1/S
population normalization rather than 1/(S-1).  Lower values indicate a
better predictive fit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import logsumexp


def _check_matrix(ll_matrix, min_draws: int = 1) -> np.ndarray:
    ll = np.asarray(ll_matrix, dtype=float)
    if ll.ndim != 2:
        raise ValueError(f"expected an S x n matrix, got shape {ll.shape}")
    s, n = ll.shape
    if s < min_draws:
        raise ValueError(f"need at least {min_draws} posterior draws, got {s}")
    if n < 1:
        raise ValueError("need at least one data point")
    bad = ~np.isfinite(ll)
    if np.any(bad):
        si, ni = np.argwhere(bad)[0]
        raise ValueError(
            f"non-finite log-likelihood entry at draw {si}, point {ni}"
        )
    return ll


def lppd(ll_matrix) -> float:
    """Log pointwise predictive density.

    sum_i log( (1/S) sum_s exp(ll[s, i]) ), evaluated with log-sum-exp so
    entries as low as -700 stay stable.
    """
    ll = _check_matrix(ll_matrix, min_draws=1)
    s = ll.shape[0]
    return float(np.sum(logsumexp(ll, axis=0) - np.log(s)))


def p_waic(ll_matrix) -> float:
    """Effective number of parameters: the summed posterior variance of the
    pointwise log-likelihood, with 1/S (population) normalization."""
    ll = _check_matrix(ll_matrix, min_draws=2)
    return float(np.sum(np.var(ll, axis=0, ddof=0)))


@dataclass(frozen=True)
class WaicResult:
    """Criterion value with its components.

    `pointwise` holds the per-unit contributions lppd_i - p_waic_i, whose
    sum is `elppd_waic`; `waic` is -2 times that sum.
    """

    lppd: float
    p_waic: float
    elppd_waic: float
    waic: float
    pointwise: np.ndarray

    @property
    def n_points(self) -> int:
        return int(self.pointwise.shape[0])


def waic(ll_matrix) -> WaicResult:
    """Compute WAIC = -2 * (lppd - p_waic) from pointwise log-likelihoods."""
    ll = _check_matrix(ll_matrix, min_draws=2)
    s = ll.shape[0]
    lppd_i = logsumexp(ll, axis=0) - np.log(s)
    p_i = np.var(ll, axis=0, ddof=0)
    pointwise = lppd_i - p_i
    elppd = float(np.sum(pointwise))
    return WaicResult(
        lppd=float(np.sum(lppd_i)),
        p_waic=float(np.sum(p_i)),
        elppd_waic=elppd,
        waic=-2.0 * elppd,
        pointwise=pointwise,
    )


def compare(results: Mapping[str, WaicResult]) -> list[dict]:
    """Rank models by ascending WAIC (lower predicts better).

    All results must come from the same dataset with the same pointwise
    unit, i.e. equal n_points.  Ties are broken by model name.  Returns one
    row per model: name, lppd, p_waic, elppd_waic, waic, and delta versus
    the best model.
    """
    if len(results) < 2:
        raise ValueError(f"need at least two models to compare, got {len(results)}")
    sizes = {name: res.n_points for name, res in results.items()}
    if len(set(sizes.values())) != 1:
        raise ValueError(f"models are not comparable: pointwise sizes differ {sizes}")
    ranked = sorted(results.items(), key=lambda kv: (kv[1].waic, kv[0]))
    best = ranked[0][1].waic
    return [
        {
            "model": name,
            "lppd": res.lppd,
            "p_waic": res.p_waic,
            "elppd_waic": res.elppd_waic,
            "waic": res.waic,
            "delta_waic": res.waic - best,
        }
        for name, res in ranked
    ]
