"""Chain-quality diagnostics: acceptance rate, effective sample size,
split R-hat, and trace summaries.

ESS uses the initial-positive-sequence estimator: autocorrelations are
summed in adjacent pairs and accumulation stops at the first pair with a
nonpositive sum, which keeps the integrated autocorrelation time estimate
positive. Split R-hat halves each chain before comparing within- and
between-chain variance so that trends inside a single chain also register;
a single chain is therefore enough to compute it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .samplers import Chain

CONSTANT_VAR_TOL = 1e-24


def acceptance_rate(chain: Chain) -> float:
    if chain.n_proposed == 0:
        raise ConfigError("chain recorded no proposals")
    return chain.n_accepted / chain.n_proposed


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased (1/N) autocovariance of a 1-D series at lags 0..N-1 via FFT."""
    n = x.shape[0]
    centered = x - x.mean()
    size = 1
    while size < 2 * n:
        size *= 2
    spectrum = np.fft.rfft(centered, size)
    acov = np.fft.irfft(spectrum * np.conj(spectrum), size)[:n]
    return acov / n


def ess(values) -> tuple[float, bool]:
    """Effective sample size of one scalar chain; returns (ess, constant_flag).

    N / (1 + 2 sum rho_t), truncating the sum at the first adjacent lag
    pair whose autocorrelations add to <= 0. The estimate is clamped to
    [1, N]. A (numerically) constant series has no mixing information and
    reports ess = 1 with the flag set.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"values must be 1-D, got shape {x.shape}")
    n = x.shape[0]
    if n < 10:
        raise ValueError(f"need at least 10 values, got {n}")
    acov = _autocovariance(x)
    if acov[0] < CONSTANT_VAR_TOL:
        return 1.0, True
    rho = acov / acov[0]
    tau = 1.0
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        t += 2
    result = n / tau
    return float(min(max(result, 1.0), float(n))), False


def split_rhat(chains) -> tuple[np.ndarray, np.ndarray]:
    """Split R-hat per dimension over m >= 1 chains of equal length.

    Each chain is halved (odd lengths drop the middle draw), giving 2m
    sequences of length n'. Returns (rhat, degenerate_mask); dimensions
    with zero within-half variance get R-hat = inf and the mask set.
    """
    arrays = [np.asarray(c, dtype=np.float64) for c in chains]
    if not arrays:
        raise ValueError("need at least 1 chain")
    shape = arrays[0].shape
    if len(shape) != 2:
        raise ValueError(f"chains must be 2-D (draws, dims), got shape {shape}")
    if any(a.shape != shape for a in arrays):
        raise ValueError("all chains must share one (draws, dims) shape")
    n = shape[0]
    if n < 4:
        raise ValueError(f"need at least 4 draws per chain to split, got {n}")
    half = n // 2
    halves = []
    for a in arrays:
        halves.append(a[:half])
        halves.append(a[n - half :])
    stacked = np.stack(halves)  # (2m, half, dims)
    means = stacked.mean(axis=1)  # (2m, dims)
    variances = stacked.var(axis=1, ddof=1)  # (2m, dims)
    w = variances.mean(axis=0)
    b = half * means.var(axis=0, ddof=1)
    degenerate = w < CONSTANT_VAR_TOL
    rhat = np.full(shape[1], np.inf)
    ok = ~degenerate
    rhat[ok] = np.sqrt((half - 1) / half + b[ok] / (half * w[ok]))
    return rhat, degenerate


@dataclass(frozen=True)
class ChainDiagnostics:
    """Per-chain acceptance rates plus per-dimension ESS, split R-hat,
    and trace mean/sd over the pooled retained samples."""

    acceptance_rates: np.ndarray
    ess_per_dim: np.ndarray
    ess_constant_mask: np.ndarray
    rhat_per_dim: np.ndarray
    rhat_degenerate_mask: np.ndarray
    trace_mean: np.ndarray
    trace_sd: np.ndarray
    n_divergent: int

    def to_dict(self) -> dict:
        return {
            "acceptance_rates": [float(v) for v in self.acceptance_rates],
            "ess_per_dim": [float(v) for v in self.ess_per_dim],
            "ess_constant_mask": [bool(v) for v in self.ess_constant_mask],
            "rhat_per_dim": [float(v) for v in self.rhat_per_dim],
            "rhat_degenerate_mask": [bool(v) for v in self.rhat_degenerate_mask],
            "trace_mean": [float(v) for v in self.trace_mean],
            "trace_sd": [float(v) for v in self.trace_sd],
            "n_divergent": self.n_divergent,
        }


def chain_diagnostics(chains) -> ChainDiagnostics:
    """Summarize a list of chains; ESS is computed per dimension on each
    chain and summed over chains."""
    chains = list(chains)
    if not chains:
        raise ValueError("need at least one chain")
    dim = chains[0].dim
    n = chains[0].n_retained
    for c in chains:
        if c.samples.shape != (n, dim):
            raise ValueError("all chains must share one (draws, dims) shape")
    rates = np.array([acceptance_rate(c) for c in chains])
    ess_total = np.zeros(dim)
    constant = np.zeros(dim, dtype=bool)
    for c in chains:
        for d in range(dim):
            e, flag = ess(c.samples[:, d])
            ess_total[d] += e
            constant[d] |= flag
    rhat, degenerate = split_rhat([c.samples for c in chains])
    pooled = np.concatenate([c.samples for c in chains], axis=0)
    return ChainDiagnostics(
        acceptance_rates=rates,
        ess_per_dim=ess_total,
        ess_constant_mask=constant,
        rhat_per_dim=rhat,
        rhat_degenerate_mask=degenerate,
        trace_mean=pooled.mean(axis=0),
        trace_sd=pooled.std(axis=0),
        n_divergent=sum(c.n_divergent for c in chains),
    )
