"""Baseline hazard families: piecewise exponential and Bernstein polynomial.

Both families expose a hazard and a cumulative hazard.  The piecewise
exponential (PE) baseline is constant within the intervals of a
:class:`TimeGrid`; its last interval is open-ended so the cumulative hazard
grows without bound.  The Bernstein polynomial (BP) baseline is a
nonnegative combination of Bernstein basis polynomials on the rescaled
axis t / horizon; beyond the horizon the hazard is frozen at its value at
the horizon, so the cumulative hazard continues linearly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class TimeGrid:
    """Ordered cutpoints 0 = a_0 < a_1 < ... < a_{J-1} partitioning time.

    Interval j (1-based) is (a_{j-1}, a_j]; the last interval
    (a_{J-1}, infinity) is open-ended and uses the last rate.
    """

    cutpoints: np.ndarray

    def __post_init__(self):
        cuts = np.asarray(self.cutpoints, dtype=float).ravel()
        object.__setattr__(self, "cutpoints", cuts)
        if cuts.size < 1:
            raise ValueError("grid needs at least one cutpoint")
        if cuts[0] != 0.0:
            raise ValueError(f"first cutpoint must be 0, got {cuts[0]}")
        if cuts.size > 1 and not np.all(np.diff(cuts) > 0):
            raise ValueError("cutpoints must be strictly increasing")

    @property
    def n_intervals(self) -> int:
        return int(self.cutpoints.size)


def build_time_grid(event_times, n_intervals: int) -> TimeGrid:
    """Place cutpoints at empirical quantiles of the observed event times.

    Internal cutpoints sit at the j / n_intervals quantiles
    (j = 1, ..., n_intervals - 1) of the event times, which balances the
    expected number of events per interval.  The first cutpoint is always 0
    and the last interval is open-ended.

    Parameters
    ----------
    event_times : array_like
        Times of observed events (status == 1 only).
    n_intervals : int
        Number of hazard intervals J >= 1.

    Raises
    ------
    ValueError
        If there are fewer distinct event times than intervals, or the
        quantiles collapse to duplicate cutpoints.
    """
    times = np.asarray(event_times, dtype=float).ravel()
    if n_intervals < 1:
        raise ValueError(f"n_intervals must be >= 1, got {n_intervals}")
    if times.size == 0:
        raise ValueError("no event times supplied")
    if np.unique(times).size < n_intervals:
        raise ValueError(
            f"degenerate grid: need at least {n_intervals} distinct event "
            f"times, got {np.unique(times).size}"
        )
    if n_intervals == 1:
        return TimeGrid(cutpoints=np.array([0.0]))
    probs = np.arange(1, n_intervals) / n_intervals
    internal = np.quantile(times, probs)
    cuts = np.concatenate([[0.0], internal])
    if np.unique(cuts).size != cuts.size:
        raise ValueError("degenerate grid: duplicate quantile cutpoints")
    return TimeGrid(cutpoints=cuts)


def _check_rates(rates, grid: TimeGrid) -> np.ndarray:
    rates = np.asarray(rates, dtype=float).ravel()
    if rates.size != grid.n_intervals:
        raise ValueError(
            f"expected {grid.n_intervals} rates for the grid, got {rates.size}"
        )
    if np.any(rates <= 0):
        raise ValueError("all interval rates must be positive")
    return rates


def interval_index(t, grid: TimeGrid) -> np.ndarray:
    """0-based interval index of each time; times beyond the last cutpoint
    fall in the open-ended final interval."""
    return np.searchsorted(grid.cutpoints, np.asarray(t, dtype=float), side="left") - 1


def pe_hazard(t, rates, grid: TimeGrid):
    """Piecewise-exponential hazard: the rate of the interval containing t."""
    rates = _check_rates(rates, grid)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0):
        raise ValueError("t must be positive")
    out = rates[interval_index(t_arr, grid)]
    return float(out[0]) if np.ndim(t) == 0 else out


def pe_cum_hazard(t, rates, grid: TimeGrid):
    """Piecewise-exponential cumulative hazard.

    H0(t) = sum_j rate_j * |(a_{j-1}, a_j] intersect (0, t]|, i.e. the
    piecewise-linear, continuous, strictly increasing integral of
    :func:`pe_hazard`.

    Parameters
    ----------
    t : float or array_like
        Positive evaluation times.
    rates : array_like
        One positive rate per grid interval.
    grid : TimeGrid

    Returns
    -------
    float or ndarray
        Cumulative hazard, matching the shape of `t`.
    """
    rates = _check_rates(rates, grid)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0):
        raise ValueError("t must be positive")
    base = np.concatenate([[0.0], np.cumsum(rates[:-1] * np.diff(grid.cutpoints))])
    idx = interval_index(t_arr, grid)
    out = base[idx] + rates[idx] * (t_arr - grid.cutpoints[idx])
    return float(out[0]) if np.ndim(t) == 0 else out


def bernstein_basis(u, degree: int) -> np.ndarray:
    """Bernstein basis b_{k,m}(u) = C(m,k) u^k (1-u)^(m-k) for k = 0..m.

    Evaluated through the binomial pmf, which is numerically stable near
    the endpoints.  Returns shape (m+1,) for scalar u and (len(u), m+1)
    for a vector.
    """
    u_arr = np.asarray(u, dtype=float)
    k = np.arange(degree + 1)
    if u_arr.ndim == 0:
        return stats.binom.pmf(k, degree, u_arr)
    return stats.binom.pmf(k[None, :], degree, u_arr[..., None])


def bernstein_cum_basis(u, degree: int) -> np.ndarray:
    """Integrals of the Bernstein basis, int_0^u b_{k,m}(v) dv for k = 0..m.

    Uses the degree-elevation identity: the integral equals
    (1/(m+1)) * sum_{j=k+1}^{m+1} b_{j,m+1}(u).
    """
    elevated = bernstein_basis(u, degree + 1)
    tail = np.cumsum(elevated[..., ::-1], axis=-1)[..., ::-1]
    return tail[..., 1:] / (degree + 1)


def _check_bp(coefs, degree: int, horizon: float) -> np.ndarray:
    coefs = np.asarray(coefs, dtype=float).ravel()
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    if coefs.size != degree + 1:
        raise ValueError(
            f"expected {degree + 1} coefficients for degree {degree}, "
            f"got {coefs.size}"
        )
    if np.any(coefs < 0):
        raise ValueError("basis coefficients must be nonnegative")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    return coefs


def bp_hazard(t, coefs, degree: int, horizon: float):
    """Bernstein-polynomial hazard sum_k coef_k * b_{k,m}(t / horizon).

    For t beyond the horizon the hazard is held constant at its value at
    the horizon (the extrapolation rule used by the simulator).

    Parameters
    ----------
    t : float or array_like
        Nonnegative evaluation times.
    coefs : array_like
        Nonnegative basis coefficients, length degree + 1.
    degree : int
        Polynomial degree m >= 1.
    horizon : float
        Positive rescaling horizon.
    """
    coefs = _check_bp(coefs, degree, horizon)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("t must be nonnegative")
    u = np.minimum(t_arr / horizon, 1.0)
    out = bernstein_basis(u, degree) @ coefs
    return float(out[0]) if np.ndim(t) == 0 else out


def bp_cum_hazard(t, coefs, degree: int, horizon: float):
    """Cumulative hazard of the Bernstein-polynomial baseline.

    Closed form on [0, horizon] via the degree-elevation identity; beyond
    the horizon it continues linearly with the frozen hazard value,
    H0(t) = H0(horizon) + h0(horizon) * (t - horizon).
    """
    coefs = _check_bp(coefs, degree, horizon)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("t must be nonnegative")
    u = t_arr / horizon
    out = horizon * (bernstein_cum_basis(np.minimum(u, 1.0), degree) @ coefs)
    over = u > 1.0
    if np.any(over):
        out = out + np.where(over, (t_arr - horizon) * coefs[-1], 0.0)
    return float(out[0]) if np.ndim(t) == 0 else out
