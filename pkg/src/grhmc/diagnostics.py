"""MCMC output diagnostics: bulk effective sample size and efficiency.

ESS follows the rank-normalized split-chain estimator of Vehtari et al.
(2021): chains are split in half, pooled samples are rank-normalized to
z-scores, and the autocorrelation time is estimated with Geyer's initial
monotone positive-pair sequence. The efficiency metric normalizes ESS by
the number of right-hand-side evaluations spent producing the samples,
scaled to a 100000-evaluation budget.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len
from scipy.stats import norm, rankdata

__all__ = ["EssReport", "SummaryRow", "ess", "efficiency", "summarize"]

EFFICIENCY_SCALE = 100000.0


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased (1/N) autocovariance of a 1-D series via FFT."""
    n = x.size
    x = x - x.mean()
    m = next_fast_len(2 * n)
    spectrum = np.fft.rfft(x, m)
    acov = np.fft.irfft(spectrum * np.conjugate(spectrum), m)[:n].real
    return acov / n


def _split_chains(x: np.ndarray) -> np.ndarray:
    """Split each row (chain) in half, stacking the halves as new chains."""
    n = x.shape[1]
    half = n // 2
    return np.vstack((x[:, :half], x[:, n - half :]))


def _rank_normalize(x: np.ndarray) -> np.ndarray:
    """Pooled fractional ranks mapped through the normal quantile function."""
    ranks = rankdata(x, method="average").reshape(x.shape)
    return norm.ppf((ranks - 0.375) / (x.size + 0.25))


def _ess_geyer(chains: np.ndarray) -> float:
    """ESS of a (chains, draws) array via Geyer's initial monotone sequence."""
    n_chain, n_draw = chains.shape
    acov = np.array([_autocovariance(chains[i]) for i in range(n_chain)])
    chain_means = chains.mean(axis=1)
    mean_var = float(acov[:, 0].mean()) * n_draw / (n_draw - 1.0)
    var_plus = mean_var * (n_draw - 1.0) / n_draw
    if n_chain > 1:
        var_plus += float(np.var(chain_means, ddof=1))

    rho = np.zeros(n_draw)
    rho[0] = 1.0
    rho_even = 1.0
    rho_odd = 1.0 - (mean_var - float(acov[:, 1].mean())) / var_plus
    rho[1] = rho_odd
    # initial positive-pair sequence
    t = 1
    while t < n_draw - 2 and (rho_even + rho_odd) >= 0.0:
        rho_even = 1.0 - (mean_var - float(acov[:, t + 1].mean())) / var_plus
        rho_odd = 1.0 - (mean_var - float(acov[:, t + 2].mean())) / var_plus
        rho[t + 1] = rho_even
        if (rho_even + rho_odd) >= 0.0:
            rho[t + 2] = rho_odd
        t += 2
    max_t = t
    # enforce monotone decay of the pair sums
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0
            rho[t + 2] = rho[t + 1]
        t += 2
    tau = -1.0 + 2.0 * float(rho[:max_t].sum()) + float(rho[max_t + 1 : max_t + 2].sum())
    return n_chain * n_draw / tau


def ess(chains) -> np.ndarray:
    """Per-coordinate bulk ESS from two or more equally long chains.

    Args:
        chains: (n_chains, n_draws, dim) array or a list of (n_draws, dim)
            sample matrices. Needs at least 2 chains of at least 100 draws.

    Returns:
        Length-``dim`` array. Constant coordinates yield ESS 0.
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3:
        raise ValueError("expected (chains, draws, dim) samples")
    n_chain, n_draw, dim = x.shape
    if n_chain < 2:
        raise ValueError("ESS needs at least 2 chains")
    if n_draw < 100:
        raise ValueError("ESS needs chains of length >= 100")
    out = np.empty(dim)
    for j in range(dim):
        split = _split_chains(x[:, :, j])
        if np.ptp(split) == 0.0:
            out[j] = 0.0
            continue
        out[j] = _ess_geyer(_rank_normalize(split))
    return out


def efficiency(ess_value: float, n_ode_total: float) -> float:
    """ESS earned per ``EFFICIENCY_SCALE`` right-hand-side evaluations."""
    if n_ode_total <= 0:
        raise ValueError("n_ode_total must be positive")
    return ess_value * EFFICIENCY_SCALE / n_ode_total


@dataclass(frozen=True)
class SummaryRow:
    coordinate: str
    ess: float
    mean_s: float
    sd_s: float
    efficiency: float
    posterior_mean: float
    posterior_sd: float


@dataclass(frozen=True)
class EssReport:
    """Per-coordinate diagnostics plus the shared evaluation budget."""

    ess: np.ndarray
    posterior_mean: np.ndarray
    posterior_sd: np.ndarray
    mean_s: np.ndarray
    sd_s: np.ndarray
    n_ode_total: int
    constant_flags: np.ndarray

    @property
    def efficiency(self) -> np.ndarray:
        return self.ess * EFFICIENCY_SCALE / self.n_ode_total


def summarize(outputs, max_coordinates: int = 2) -> tuple[EssReport, list[SummaryRow]]:
    """Aggregate replica outputs into an ESS report and table rows.

    S statistics are the across-replica mean and standard deviation of the
    final scale entries; ESS pools the replicas as separate chains; the
    efficiency denominator is the summed evaluation count. For dimensions
    above ``max_coordinates`` only the max-ESS and min-ESS coordinates are
    emitted as rows.
    """
    if len(outputs) < 2:
        raise ValueError("summarize needs at least 2 replicas")
    samples = np.stack([o.samples for o in outputs])
    s_final = np.stack([o.S for o in outputs])
    n_ode_total = int(sum(o.n_ode for o in outputs))
    dim = samples.shape[2]

    ess_values = ess(samples)
    flat = samples.reshape(-1, dim)
    report = EssReport(
        ess=ess_values,
        posterior_mean=flat.mean(axis=0),
        posterior_sd=flat.std(axis=0, ddof=1),
        mean_s=s_final.mean(axis=0),
        sd_s=s_final.std(axis=0, ddof=1),
        n_ode_total=n_ode_total,
        constant_flags=ess_values == 0.0,
    )

    def row(j: int, label: str) -> SummaryRow:
        return SummaryRow(
            coordinate=label,
            ess=float(ess_values[j]),
            mean_s=float(report.mean_s[j]),
            sd_s=float(report.sd_s[j]),
            efficiency=float(report.efficiency[j]),
            posterior_mean=float(report.posterior_mean[j]),
            posterior_sd=float(report.posterior_sd[j]),
        )

    if dim <= max_coordinates:
        rows = [row(j, str(j + 1)) for j in range(dim)]
    else:
        j_max = int(np.argmax(ess_values))
        j_min = int(np.argmin(ess_values))
        rows = [row(j_max, "max ESS"), row(j_min, "min ESS")]
    return report, rows
