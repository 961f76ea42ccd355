"""Time-series statistics for post-burn-in windows of a run."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import UndefinedEstimator


def autocovariance(x: np.ndarray) -> np.ndarray:
    """Lag-t sums sum_i (x_i - xbar)(x_{i+t} - xbar) for t = 0..n-1, via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    d = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(d, size)
    return np.fft.irfft(f * np.conj(f), size)[:n]


def autocorrelation_time(series, max_lag: int | None = None, c: float = 5.0) -> float:
    """Integrated autocorrelation time tau = sum_{t>=1} rho(t).

    rho(t) is the empirical lag-t autocorrelation with mean-centred sums
    normalised by the lag-0 sum.  The tail is truncated with the automatic
    window of Sokal: the smallest lag M with M >= c (1/2 + sum_{t<=M} rho).
    Summing every lag up to n-1 always gives exactly -1/2 by the centring,
    so a truncation is required for a useful estimate.  ``max_lag`` fixes
    the truncation explicitly instead.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise UndefinedEstimator("autocorrelation time needs at least two samples")
    acov = autocovariance(x)
    if not acov[0] > 0.0 or not math.isfinite(acov[0]):
        raise UndefinedEstimator("autocorrelation time undefined for a zero-variance series")
    rho = acov / acov[0]
    if max_lag is not None:
        if not 0 <= max_lag <= x.size - 1:
            raise ValueError("max_lag must lie in [0, n-1]")
        return float(rho[1 : max_lag + 1].sum())
    partial = np.cumsum(rho[1:])
    lags = np.arange(1, x.size)
    ok = lags >= c * (0.5 + partial)
    M = int(lags[np.argmax(ok)]) if ok.any() else x.size - 1
    return float(partial[M - 1])


@dataclass(frozen=True)
class SummaryStats:
    avg_error: float | None
    std: float
    mse: float | None
    tau_auto: float
    avg_compression_error: float | None
    time_per_iter: float
    mean_energy: float
    i0: int
    w: int
    W: float

    def as_dict(self) -> dict:
        return asdict(self)


def summarize(record, E_true: float | None, i0: int, w: int, seconds_budget: float = 1e4) -> SummaryStats:
    """Window statistics over rows [i0, i0 + w) of ``record``.

    std is the window's sample standard deviation times
    sqrt((1 + 2 tau_auto) / W), with W = seconds_budget / time_per_iter the
    number of iterations affordable in the budget.  A window of constant
    energy has std = 0 and tau_auto = 0.  Rows whose energy is undefined are
    not allowed inside the window.
    """
    if w < 2:
        raise UndefinedEstimator("window must contain at least two iterations")
    if i0 < 0 or i0 + w > len(record):
        raise ValueError(f"window [{i0}, {i0 + w}) exceeds record of length {len(record)}")
    E = record.column("proj_energy")[i0 : i0 + w]
    if any(e is None for e in E):
        raise UndefinedEstimator("projected energy undefined inside the window")
    E = np.asarray(E, dtype=float)
    wall = np.asarray(record.column("wall_ms")[i0 : i0 + w], dtype=float)
    time_per_iter = float(wall.mean()) / 1e3
    W = seconds_budget / time_per_iter if time_per_iter > 0 else math.inf
    sample_std = float(E.std(ddof=1))
    # a deterministic plateau has no fluctuation to correlate
    tau = autocorrelation_time(E) if sample_std > 0 else 0.0
    std = sample_std * math.sqrt((1.0 + 2.0 * tau) / W) if W != math.inf else 0.0
    avg_error = mse = None
    if E_true is not None:
        avg_error = float(np.mean(np.abs(E - E_true)))
        mse = avg_error**2 + std**2
    errs = [e for e in record.column("rel_compress_err")[i0 : i0 + w] if e is not None]
    avg_comp = float(np.mean(errs)) if errs else None
    return SummaryStats(
        avg_error=avg_error,
        std=std,
        mse=mse,
        tau_auto=tau,
        avg_compression_error=avg_comp,
        time_per_iter=time_per_iter,
        mean_energy=float(E.mean()),
        i0=i0,
        w=w,
        W=W,
    )
