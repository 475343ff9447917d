"""MCMC convergence diagnostics: split R-hat and effective sample size."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _split_halves(chains: np.ndarray) -> np.ndarray:
    """Split each chain in two halves, dropping the middle draw if odd."""
    c, n = chains.shape
    half = n // 2
    return np.vstack([chains[:, :half], chains[:, n - half:]])


def _rhat_1d(chains: np.ndarray) -> float:
    """Gelman-Rubin statistic on an (m, n) array of split chains."""
    m, n = chains.shape
    if n < 2:
        return float("nan")
    means = chains.mean(axis=1)
    within = chains.var(axis=1, ddof=1).mean()
    between_over_n = means.var(ddof=1)
    var_hat = (n - 1) / n * within + between_over_n
    if within == 0.0:
        return float("nan") if var_hat == 0.0 else float("inf")
    return float(np.sqrt(var_hat / within))


def split_rhat(chains) -> np.ndarray:
    """Split R-hat per parameter from draws of shape (chains, draws[, dim])."""
    arr = np.asarray(chains, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return np.array([_rhat_1d(_split_halves(arr[:, :, d])) for d in range(arr.shape[2])])


def _chain_autocov(x: np.ndarray) -> np.ndarray:
    """Biased (1/n) autocovariance of one chain via FFT."""
    n = x.size
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conjugate(f), size)[:n].real
    return acov / n


def _ess_1d(chains: np.ndarray) -> float:
    """Effective sample size with Geyer initial-positive-sequence truncation."""
    m, n = chains.shape
    if n < 4:
        return float("nan")
    within = chains.var(axis=1, ddof=1).mean()
    if within == 0.0:
        return float("nan")
    between_over_n = chains.mean(axis=1).var(ddof=1) if m > 1 else 0.0
    var_plus = (n - 1) / n * within + between_over_n
    acov = np.mean([_chain_autocov(chains[c]) for c in range(m)], axis=0)
    rho = 1.0 - (within - acov) / var_plus

    # accumulate consecutive pairs (rho_2k + rho_2k+1) while positive
    tau = -1.0
    k = 0
    while 2 * k + 1 < n:
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        k += 1
    tau = max(tau, 1.0 / np.log10(n + 10))  # guard against noise-driven tiny tau
    return float(m * n / tau)


def effective_sample_size(chains) -> np.ndarray:
    """ESS per parameter from draws of shape (chains, draws[, dim])."""
    arr = np.asarray(chains, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return np.array([_ess_1d(arr[:, :, d]) for d in range(arr.shape[2])])


@dataclass(frozen=True)
class ChainDiagnostics:
    """Per-parameter convergence summary; `available` is False when there
    are too few draws/chains to estimate anything."""

    available: bool
    rhat: np.ndarray | None = None
    ess: np.ndarray | None = None
    reason: str = ""

    def max_rhat(self) -> float:
        if not self.available or self.rhat is None or self.rhat.size == 0:
            return float("nan")
        return float(np.max(self.rhat))

    def min_ess(self) -> float:
        if not self.available or self.ess is None or self.ess.size == 0:
            return float("nan")
        return float(np.min(self.ess))


def compute_diagnostics(chains) -> ChainDiagnostics:
    """Split R-hat and ESS for draws shaped (chains, draws, dim).

    Requires at least 2 chains or at least 100 draws in a single chain;
    otherwise the diagnostics are flagged unavailable rather than raising.
    """
    arr = np.asarray(chains, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    c, n, _ = arr.shape
    if (c < 2 and n < 100) or n < 4:
        return ChainDiagnostics(
            available=False,
            reason=f"too few draws for diagnostics ({c} chains x {n} draws)",
        )
    return ChainDiagnostics(
        available=True,
        rhat=split_rhat(arr),
        ess=effective_sample_size(arr),
    )
