"""Long-time statistics and short-time forecast skill."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .closure import ensemble_simulate

__all__ = [
    "StatsError",
    "CurveResult",
    "WaveStatistics",
    "acf",
    "ccf",
    "pdf_estimate",
    "kde_estimate",
    "pdf_l1_distance",
    "wave_statistics",
    "rmse_ancr",
    "rank_counts",
    "rank_histogram",
    "rank_histogram_pvalue",
    "sup_error",
]


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class CurveResult:
    """A curve ``values(abscissa)`` with optional standard errors."""

    abscissa: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None
    name: str = "value"

    def __post_init__(self):
        a = np.asarray(self.abscissa, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if a.shape != v.shape or a.ndim != 1:
            raise StatsError("abscissa and values must be 1-d of equal length")
        if a.size > 1 and np.any(np.diff(a) <= 0):
            raise StatsError("abscissa must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise StatsError("curve values must be finite")
        object.__setattr__(self, "abscissa", a)
        object.__setattr__(self, "values", v)
        if self.stderr is not None:
            object.__setattr__(self, "stderr", np.asarray(self.stderr, dtype=float))

    def __len__(self):
        return self.abscissa.size

    def to_csv(self, path, abscissa_name="x"):
        cols = [self.abscissa, self.values]
        header = f"{abscissa_name},{self.name}"
        if self.stderr is not None:
            cols.append(self.stderr)
            header += ",stderr"
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=header,
                   comments="", fmt="%.17g")


def _columns(series):
    a = np.asarray(series, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise StatsError("series must be (T,) or (T, K)")
    return a


def _lagged_products(a, b, max_lag):
    """``(1/T) sum_t a_{t+l} b_t`` for ``l = 0..max_lag``, per column."""
    T = a.shape[0]
    n = 1 << int(np.ceil(np.log2(2 * T)))
    fa = np.fft.rfft(a, n, axis=0)
    fb = np.fft.rfft(b, n, axis=0)
    return np.fft.irfft(fa * np.conj(fb), n, axis=0)[:max_lag + 1] / T


def acf(series, max_lag, normalize=True, tau=1.0):
    """Temporal autocovariance (or autocorrelation) averaged over columns.

    Each column has its empirical mean removed; lag products are divided by
    the series length, which keeps the normalized curve within ``[-1, 1]``.
    With ``normalize`` each column is divided by its own lag-0 value before
    averaging over columns. ``stderr`` is the spread over columns when there
    is more than one.
    """
    a = _columns(series)
    if a.shape[0] <= max_lag:
        raise StatsError(f"series of length {a.shape[0]} too short for max_lag={max_lag}")
    a = a - a.mean(axis=0)
    c = _lagged_products(a, a, max_lag)
    if normalize:
        if np.any(c[0] <= 0):
            raise StatsError("cannot normalize a series with zero variance")
        c = c / c[0]
        c[0] = 1.0
    err = c.std(axis=1, ddof=1) / np.sqrt(c.shape[1]) if c.shape[1] > 1 else None
    return CurveResult(tau * np.arange(max_lag + 1), c.mean(axis=1), err, "acf" if normalize else "acv")


def ccf(a, b, max_lag, tau=1.0):
    """``<a_{t+l} b_t> / <a_t a_t>`` after mean removal, averaged over columns."""
    A = _columns(a)
    Bm = _columns(b)
    if A.shape != Bm.shape:
        raise StatsError("a and b must have the same shape")
    if A.shape[0] <= max_lag:
        raise StatsError("series too short for max_lag")
    A = A - A.mean(axis=0)
    Bm = Bm - Bm.mean(axis=0)
    var = np.mean(A * A, axis=0)
    if np.any(var <= 0):
        raise StatsError("cannot normalize a series with zero variance")
    c = _lagged_products(A, Bm, max_lag) / var
    err = c.std(axis=1, ddof=1) / np.sqrt(c.shape[1]) if c.shape[1] > 1 else None
    return CurveResult(tau * np.arange(max_lag + 1), c.mean(axis=1), err, "ccf")


def pdf_estimate(series, n_bins=50, range=None):
    """Histogram density of all entries of ``series`` at the bin centers."""
    x = np.asarray(series, dtype=float).ravel()
    if x.size == 0:
        raise StatsError("empty series")
    h, edges = np.histogram(x, bins=n_bins, range=range, density=True)
    return CurveResult(0.5 * (edges[1:] + edges[:-1]), h, None, "pdf")


def kde_estimate(series, grid=None, n_points=200, max_samples=20000, seed=0):
    """Gaussian-kernel density with Silverman's bandwidth.

    Long series are subsampled at random to ``max_samples`` points.
    """
    x = np.asarray(series, dtype=float).ravel()
    if x.size > max_samples:
        x = np.random.default_rng(seed).choice(x, max_samples, replace=False)
    if grid is None:
        grid = np.linspace(x.min(), x.max(), n_points)
    k = sps.gaussian_kde(x, bw_method="silverman")
    return CurveResult(grid, k(grid), None, "pdf")


def pdf_l1_distance(a, b, n_bins=50, range=None):
    """``int |p_a - p_b|`` between histograms on common bins."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if range is None:
        range = (min(a.min(), b.min()), max(a.max(), b.max()))
    ha, edges = np.histogram(a, n_bins, range, density=True)
    hb, _ = np.histogram(b, n_bins, range, density=True)
    return float(np.sum(np.abs(ha - hb) * np.diff(edges)))


@dataclass(frozen=True)
class WaveStatistics:
    wavenumber: np.ndarray
    mean_amplitude: np.ndarray
    variance: np.ndarray
    weights: np.ndarray

    def curves(self):
        m = self.wavenumber.astype(float)
        return (CurveResult(m, self.mean_amplitude, name="mean_amplitude"),
                CurveResult(m, self.variance, name="variance"))


def wave_statistics(X, k_axis=0):
    """Temporal statistics of the spatial Fourier modes ``u^m``, ``m = 0..K//2``.

    ``u^m = sum_k X^k exp(-2 pi i m k / K)`` (unnormalized forward DFT). With
    the one-sided ``weights`` (1 at ``m = 0`` and the Nyquist mode, 2
    otherwise), ``sum_m weights * variance / K`` equals the summed temporal
    variance of the ``X^k``.
    """
    X = np.moveaxis(np.asarray(X, dtype=float), k_axis, 0)
    if X.ndim == 1:
        X = X[:, None]
    K = X.shape[0]
    u = np.fft.rfft(X, axis=0)
    mean_u = u.mean(axis=1, keepdims=True)
    w = np.full(u.shape[0], 2.0)
    w[0] = 1.0
    if K % 2 == 0:
        w[-1] = 1.0
    return WaveStatistics(np.arange(u.shape[0]), np.abs(u).mean(axis=1),
                          np.mean(np.abs(u - mean_u) ** 2, axis=1), w)


def rmse_ancr(truth, forecast, clim_mean=None, tau=1.0):
    """Root-mean-square error and anomaly correlation over lead time.

    Parameters
    ----------
    truth : (n_cases, n_t, K) array
    forecast : (n_cases, n_ens, n_t, K) array
    clim_mean : (K,) array, optional
        Climatological mean removed to form anomalies; defaults to the mean
        of ``truth``.

    RMSE pools squared errors over cases, members and ``k``. ANCR is the
    correlation over ``k`` of truth and forecast anomalies, averaged over
    cases and members; with a single ``k`` the anomalies are pooled over
    cases and members instead. A zero denominator counts as correlation 0.
    """
    tr = np.asarray(truth, dtype=float)
    fc = np.asarray(forecast, dtype=float)
    if tr.ndim == 2:
        tr = tr[..., None]
    if fc.ndim == 3:
        fc = fc[..., None]
    if fc.shape[0] != tr.shape[0] or fc.shape[2:] != tr.shape[1:]:
        raise StatsError(f"shape mismatch: truth {tr.shape}, forecast {fc.shape}")
    err2 = (fc - tr[:, None]) ** 2
    rmse = np.sqrt(err2.mean(axis=(0, 1, 3)))
    mu = tr.reshape(-1, tr.shape[-1]).mean(axis=0) if clim_mean is None else np.asarray(clim_mean)
    at = np.broadcast_to((tr - mu)[:, None], fc.shape)
    af = fc - mu
    if tr.shape[-1] == 1:
        num = np.sum(at * af, axis=(0, 1, 3))
        den = np.sqrt(np.sum(at**2, axis=(0, 1, 3)) * np.sum(af**2, axis=(0, 1, 3)))
        ancr = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    else:
        num = np.sum(at * af, axis=-1)
        den = np.sqrt(np.sum(at**2, axis=-1) * np.sum(af**2, axis=-1))
        ancr = np.divide(num, den, out=np.zeros_like(num), where=den > 0).mean(axis=(0, 1))
    t = tau * np.arange(tr.shape[1])
    return CurveResult(t, rmse, name="rmse"), CurveResult(t, ancr, name="ancr")


def rank_counts(truth, ensemble, rng=None):
    """Histogram of the rank of truth within each ensemble.

    ``truth`` has shape ``S`` and ``ensemble`` ``(n_ens,) + S``; returns
    ``n_ens + 1`` counts. Ties are broken uniformly at random.
    """
    rng = np.random.default_rng(rng)
    t = np.asarray(truth, dtype=float)
    e = np.asarray(ensemble, dtype=float)
    if e.shape[1:] != t.shape:
        raise StatsError(f"ensemble shape {e.shape} does not match truth {t.shape}")
    below = np.sum(e < t, axis=0)
    ties = np.sum(e == t, axis=0)
    rank = below + rng.integers(0, ties + 1)
    return np.bincount(rank.ravel(), minlength=e.shape[0] + 1)


def rank_histogram(truth_series, model, n_ens, lead_T, perturbation_sd, n_cases, rng=0,
                   tally="all", start_indices=None):
    """Rank histogram of closure ensembles started from truth.

    Parameters
    ----------
    truth_series : TimeSeriesDataset
    model : ClosureModel
    n_ens : int
    lead_T : float
        Forecast length in time units.
    perturbation_sd : float
    n_cases : int
        Number of start times, evenly spaced over the usable record unless
        ``start_indices`` is given.
    rng : int
        Base seed for the members and the tie breaking.
    tally : {"all", "lead"}
        Tally every stored time ``1..lead`` or only the final lead time.
    """
    if tally not in ("all", "lead"):
        raise StatsError(f"unknown tally mode {tally!r}")
    steps = int(round(lead_T / model.tau))
    if steps < 1:
        raise StatsError("lead_T shorter than one macro step")
    lo = model.delay.lag
    hi = truth_series.N - 1 - steps
    if start_indices is None:
        if hi < lo:
            raise StatsError("truth series too short for the requested lead time")
        start_indices = np.linspace(lo, hi, n_cases).round().astype(int)
    idx = np.asarray(start_indices, dtype=int)
    ens = ensemble_simulate(model, truth_series, idx, n_ens, steps, perturbation_sd,
                            base_seed=rng)
    offsets = np.arange(1, steps + 1) if tally == "all" else np.array([steps])
    truth = truth_series.x[idx[:, None] + offsets]          # (cases, times, n_x)
    fc = ens[:, :, offsets]                                   # (cases, ens, times, n_x)
    tie_rng = np.random.default_rng(np.random.SeedSequence([int(rng), 2**31 - 1]))
    return rank_counts(truth, np.moveaxis(fc, 1, 0), tie_rng)


def rank_histogram_pvalue(counts):
    """Chi-square goodness of fit of the counts to a flat histogram."""
    return float(sps.chisquare(np.asarray(counts, dtype=float)).pvalue)


def sup_error(full_paths, closure_paths, tau=None, horizon=None):
    """``E_sup = mean_r sup_t |x_r(t) - xhat_r(t)|^2``.

    Paths have shape ``(n_t, R)`` or ``(n_t, R, n_x)``; the first axis is
    time. With ``tau`` and ``horizon`` only times ``t <= horizon`` count.
    """
    a = np.asarray(full_paths, dtype=float)
    b = np.asarray(closure_paths, dtype=float)
    if a.shape != b.shape:
        raise StatsError("path arrays must have the same shape")
    if horizon is not None:
        if tau is None:
            raise StatsError("tau is required with horizon")
        a = a[:int(np.floor(horizon / tau + 1e-9)) + 1]
        b = b[:a.shape[0]]
    e2 = (a - b) ** 2
    if e2.ndim == 3:
        e2 = e2.sum(axis=2)
    elif e2.ndim == 1:
        e2 = e2[:, None]
    return float(e2.max(axis=0).mean())
