"""Long-run diagnostics from simulated paths: ergodic time averages with
batch-means errors, the pooled stationary histogram of x, a two-start
total-variation mixing proxy, and autocorrelation decay fits.

The mixing coefficient itself is not estimable from finitely many paths;
``mixing_curve`` estimates the total variation distance between the time-t
laws started from two different states, on shared histograms of
(x, row sums of y), and fits an exponential decay over the range where the
estimate sits above its own resampling noise floor.  Both this and the
autocorrelation fit are standard proxies, not the coefficient itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diffusion import IntegratorConfig
from .engine import Path, simulate_ensemble
from .model import ModelSpec, State
from .rng import mix64

__all__ = [
    "make_observable",
    "ErgodicEstimate",
    "time_average",
    "regular_samples",
    "states_at",
    "DensityEstimate",
    "invariant_histogram",
    "tv_histogram",
    "MixingCurve",
    "mixing_curve",
    "AutocorrelationFit",
    "autocorr_decay",
]

_TOL = 1e-9


def make_observable(spec, model: ModelSpec | None = None):
    """Vectorised observable over skeleton samples.

    ``spec`` is one of the strings "one", "x", "x2", "rate" (the last needs
    the model to evaluate the rate functions), or a callable
    ``f(times, x, row_sums) -> values``.
    """
    if callable(spec):
        return spec
    if spec == "one":
        return lambda t, x, rs: np.ones_like(x)
    if spec == "x":
        return lambda t, x, rs: x
    if spec == "x2":
        return lambda t, x, rs: x * x

    if spec == "rate":
        if model is None:
            raise ValueError("observable 'rate' requires the model")
        rates = model.rates

        def total_rate(t, x, rs):
            out = np.zeros(len(rs))
            for j, f in enumerate(rates):
                out += f(rs[:, j])
            return out

        return total_rate
    raise ValueError(f"unknown observable {spec!r}")


@dataclass(frozen=True)
class ErgodicEstimate:
    """Post-burn-in time average with a non-overlapping batch-means error bar."""

    value: float
    batch_count: int
    standard_error: float
    burn_in: float

    def to_dict(self) -> dict:
        return {"value": self.value, "batch_count": self.batch_count,
                "standard_error": self.standard_error, "burn_in": self.burn_in}


def time_average(path: Path, observable, burn_in: float = 0.0,
                 batches: int = 20, model: ModelSpec | None = None) -> ErgodicEstimate:
    """Trapezoidal time average of the observable over the post-burn-in
    skeleton, with the standard error of non-overlapping batch means.

    Jump times carry two skeleton records (pre/post), so discontinuities
    integrate exactly as zero-width segments.  A constant observable is
    returned exactly, with zero standard error.
    """
    if burn_in >= path.horizon:
        raise ValueError("burn_in must be smaller than the path horizon")
    g = make_observable(observable, model)
    start = int(np.searchsorted(path.skeleton_times, burn_in, side="left"))
    ts = path.skeleton_times[start:]
    if len(ts) < 2 or ts[-1] - ts[0] <= 0:
        raise ValueError("too few skeleton samples after burn-in")
    vals = np.asarray(g(ts, path.skeleton_x[start:],
                        path.skeleton_row_sums[start:]), dtype=float)
    if np.all(vals == vals[0]):
        return ErgodicEstimate(float(vals[0]), batches, 0.0, burn_in)
    dt = np.diff(ts)
    seg = 0.5 * (vals[:-1] + vals[1:]) * dt
    total_time = float(ts[-1] - ts[0])
    value = float(seg.sum()) / total_time

    edge_times = ts[0] + np.arange(batches + 1) / batches * total_time
    idx = np.searchsorted(ts, edge_times)
    idx[0], idx[-1] = 0, len(ts) - 1
    idx = np.unique(idx)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    durations = ts[idx[1:]] - ts[idx[:-1]]
    keep = durations > 0
    means = (cum[idx[1:]] - cum[idx[:-1]])[keep] / durations[keep]
    n_batches = int(keep.sum())
    if n_batches < 2:
        raise ValueError("not enough batches for a standard error")
    se = float(means.std(ddof=1)) / math.sqrt(n_batches)
    return ErgodicEstimate(value, n_batches, se, burn_in)


def regular_samples(path: Path, grid_dt: float, burn_in: float = 0.0):
    """(times, x, row_sums) at the regular grid multiples of grid_dt past
    burn_in, taking the post-jump record when a grid time coincides with an
    event."""
    eps = 1e-9 * max(1.0, path.horizon)
    k_lo = max(0, int(math.ceil((burn_in - eps) / grid_dt)))
    k_hi = int(path.horizon / grid_dt + eps)
    times = np.arange(k_lo, k_hi + 1) * grid_dt
    idx = np.searchsorted(path.skeleton_times, times + eps, side="right") - 1
    if np.any(idx < 0) or np.any(np.abs(path.skeleton_times[idx] - times) > eps):
        raise ValueError("skeleton does not contain the requested grid times")
    return times, path.skeleton_x[idx], path.skeleton_row_sums[idx]


def states_at(path: Path, times) -> tuple[np.ndarray, np.ndarray]:
    """(x, row_sums) at the given times, which must be recorded in the
    skeleton (use simulate_path(..., sample_at=times)); post-jump values."""
    times = np.asarray(times, dtype=float)
    eps = 1e-9 * max(1.0, path.horizon)
    idx = np.searchsorted(path.skeleton_times, times + eps, side="right") - 1
    if np.any(idx < 0) or np.any(np.abs(path.skeleton_times[idx] - times) > eps):
        raise ValueError("requested times are not recorded in the skeleton")
    return path.skeleton_x[idx], path.skeleton_row_sums[idx]


@dataclass(frozen=True)
class DensityEstimate:
    """Pooled histogram of the x marginal with a positivity summary on a compact."""

    bin_edges: np.ndarray
    bin_masses: np.ndarray
    positivity_compact: tuple[float, float]
    min_mass_on_compact: float

    def to_dict(self) -> dict:
        return {"bin_edges": self.bin_edges.tolist(),
                "bin_masses": self.bin_masses.tolist(),
                "positivity_compact": list(self.positivity_compact),
                "min_mass_on_compact": self.min_mass_on_compact}


def invariant_histogram(paths: list[Path], bins: int, compact: tuple[float, float],
                        grid_dt: float, burn_in: float = 0.0) -> DensityEstimate:
    """Pool post-burn-in regular x samples from an ensemble into a normalised
    histogram and report the smallest mass among bins meeting the compact."""
    if not paths:
        raise ValueError("empty ensemble")
    xs = np.concatenate([regular_samples(p, grid_dt, burn_in)[1] for p in paths])
    if xs.size == 0:
        raise ValueError("no samples after burn-in")
    counts, edges = np.histogram(xs, bins=bins)
    masses = counts / counts.sum()
    a, b = compact
    meets = (edges[1:] > a) & (edges[:-1] < b)
    if not meets.any():
        raise ValueError("no histogram bin intersects the compact")
    return DensityEstimate(edges, masses, (a, b), float(masses[meets].min()))


def tv_histogram(a: np.ndarray, b: np.ndarray, bins: int) -> float:
    """Total variation distance between two samples of equal dimension via
    shared-binning histograms (half l1 distance of bin masses)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, np.newaxis]
    if b.ndim == 1:
        b = b[:, np.newaxis]
    pooled = np.vstack([a, b])
    edges = []
    for d in range(pooled.shape[1]):
        lo, hi = float(pooled[:, d].min()), float(pooled[:, d].max())
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        edges.append(np.linspace(lo, hi, bins + 1))
    ha = np.histogramdd(a, bins=edges)[0] / len(a)
    hb = np.histogramdd(b, bins=edges)[0] / len(b)
    return 0.5 * float(np.abs(ha - hb).sum())


@dataclass(frozen=True)
class MixingCurve:
    """Two-start TV estimates against time with an exponential-decay fit."""

    times: np.ndarray
    tv_estimates: np.ndarray
    noise_floor: np.ndarray
    fitted_rate: float
    fit_log_intercept: float
    fit_r2: float
    fit_mask: np.ndarray

    def fitted_values(self) -> np.ndarray:
        return np.exp(self.fit_log_intercept - self.fitted_rate * self.times)

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(),
                "tv_estimates": self.tv_estimates.tolist(),
                "noise_floor": self.noise_floor.tolist(),
                "fitted_rate": self.fitted_rate,
                "fit_r2": self.fit_r2,
                "fit_mask": self.fit_mask.astype(bool).tolist()}


def mixing_curve(model: ModelSpec, start_a: State, start_b: State, times,
                 n_paths: int, bins: int, cfg: IntegratorConfig,
                 master_seed: int = 0, floor_factor: float = 2.0,
                 workers: int = 1) -> MixingCurve:
    """Estimate TV(law_a(t), law_b(t)) over the given times from two path
    ensembles (one per start), on shared joint histograms of
    (x, row sums of y).

    One ensemble per start is simulated to the largest requested time and
    read at every time, so estimates share paths across times.  The fit
    log TV ~ intercept - rate * t uses only times where the TV estimate
    exceeds ``floor_factor`` times its own split-half noise floor.
    """
    times = np.sort(np.asarray(times, dtype=float))
    if len(times) < 2 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing with at least 2 entries")
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    horizon = float(times[-1]) if times[-1] > 0 else 1e-6
    sample_times = times[times > 0]

    ensembles = []
    for tag, start in ((1, start_a), (2, start_b)):
        variant = ModelSpec(model.rates, model.kernel, model.coefficients, start)
        paths = simulate_ensemble(variant, horizon, cfg, mix64(master_seed + tag),
                                  n_paths, workers=workers, sample_at=sample_times)
        # stacked (n_paths, n_times, 1 + M) state summaries
        block = np.empty((n_paths, len(times), 1 + model.n_components))
        for i, p in enumerate(paths):
            x, rs = states_at(p, times)
            block[i, :, 0] = x
            block[i, :, 1:] = rs
        ensembles.append(block)
    block_a, block_b = ensembles

    tv = np.empty(len(times))
    floor = np.empty(len(times))
    half = n_paths // 2
    for k in range(len(times)):
        a, b = block_a[:, k, :], block_b[:, k, :]
        tv[k] = tv_histogram(a, b, bins)
        floor[k] = 0.5 * (tv_histogram(a[:half], a[half:], bins)
                          + tv_histogram(b[:half], b[half:], bins))

    mask = tv > floor_factor * floor
    if mask.sum() < 2:
        raise ValueError("TV estimates sit below the noise floor at all but "
                         "one time; shorten the times or add paths")
    slope, intercept = np.polyfit(times[mask], np.log(tv[mask]), 1)
    fitted = intercept + slope * times[mask]
    resid = np.log(tv[mask]) - fitted
    ss_tot = float(((np.log(tv[mask]) - np.log(tv[mask]).mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 0.0
    return MixingCurve(times, tv, floor, float(-slope), float(intercept), r2, mask)


@dataclass(frozen=True)
class AutocorrelationFit:
    """Sample autocorrelations at time lags with an exponential decay fit."""

    lags: np.ndarray
    correlations: np.ndarray
    rate: float
    r_squared: float

    def to_dict(self) -> dict:
        return {"lags": self.lags.tolist(),
                "correlations": self.correlations.tolist(),
                "rate": self.rate, "r_squared": self.r_squared}


def autocorr_decay(path: Path, observable, lags, grid_dt: float,
                   burn_in: float = 0.0, model: ModelSpec | None = None,
                   min_corr: float = 0.05) -> AutocorrelationFit:
    """Sample autocorrelation of the observable over the regular grid at the
    given time lags, with a least-squares exponential fit over the lags
    whose correlation exceeds ``min_corr``."""
    times, x, rs = regular_samples(path, grid_dt, burn_in)
    g = make_observable(observable, model)
    series = np.asarray(g(times, x, rs), dtype=float)
    lags = np.asarray(lags, dtype=float)
    steps = np.unique(np.maximum(1, np.round(lags / grid_dt).astype(int)))
    if steps[-1] >= len(series) // 2:
        raise ValueError("series too short for the requested lags")
    centred = series - series.mean()
    denom = float((centred ** 2).sum())
    corr = np.array([float((centred[:-k] * centred[k:]).sum()) / denom for k in steps])
    lag_times = steps * grid_dt
    use = corr > min_corr
    if use.sum() < 2:
        # nothing decays above the floor: an (effectively) uncorrelated series
        return AutocorrelationFit(lag_times, corr, math.nan, 0.0)
    slope, intercept = np.polyfit(lag_times[use], np.log(corr[use]), 1)
    fitted = intercept + slope * lag_times[use]
    resid = np.log(corr[use]) - fitted
    ss_tot = float(((np.log(corr[use]) - np.log(corr[use]).mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 0.0
    return AutocorrelationFit(lag_times, corr, float(-slope), r2)
