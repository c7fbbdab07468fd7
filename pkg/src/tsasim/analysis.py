"""Statistics and signal processing for recorded runs.

Covers the per-bin box-whisker statistics of fingertip angle against motor
angle, the quantile spread measure delta_q, Savitzky-Golay smoothing, the
velocity Jacobian, the through-origin stiffness fit and the lonely-stroke
comparison between the first and later cycles.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .actuation import SAMPLE_PERIOD

BIN_WIDTH = 0.1  # rot
STAT_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
DELTA_QUANTILES = (0.0, 0.25, 0.75, 1.0)


@dataclass(frozen=True)
class BinnedSeries:
    bin_width: float
    bins: dict  # bin index -> np.ndarray of alpha values, ascending index order

    def __len__(self):
        return len(self.bins)

    @property
    def count(self) -> int:
        return sum(len(v) for v in self.bins.values())


@dataclass(frozen=True)
class SummaryStats:
    """Per-bin order statistics (deg), one entry per non-empty bin."""

    bin_index: np.ndarray
    theta: np.ndarray  # lower bin edge, rot
    count: np.ndarray
    minimum: np.ndarray
    q05: np.ndarray
    q25: np.ndarray
    median: np.ndarray
    q75: np.ndarray
    q95: np.ndarray
    maximum: np.ndarray


def bin_index(theta, bin_width: float = BIN_WIDTH) -> np.ndarray:
    """Half-open bins [k*w, (k+1)*w).

    The 1e-9 guard keeps values that are exact multiples in decimal (0.3
    rot is 108 encoder counts) from landing one bin low through binary
    round-off.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be > 0")
    return np.floor(np.asarray(theta, dtype=float) / bin_width + 1e-9).astype(np.int64)


def bin_samples(theta, alpha, bin_width: float = BIN_WIDTH) -> BinnedSeries:
    theta = np.asarray(theta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if theta.shape != alpha.shape:
        raise ValueError("theta and alpha must have the same length")
    if theta.size == 0:
        raise ValueError("cannot bin an empty series")
    idx = bin_index(theta, bin_width)
    order = np.argsort(idx, kind="stable")
    idx_sorted = idx[order]
    keys, starts = np.unique(idx_sorted, return_index=True)
    groups = np.split(alpha[order], starts[1:])
    return BinnedSeries(bin_width, {int(k): g for k, g in zip(keys, groups)})


def bin_by_motor_angle(run, bin_width: float = BIN_WIDTH, measured: bool = True) -> BinnedSeries:
    """Group a run's fingertip angles by encoder motor angle."""
    alpha = run.alpha_meas if measured else run.alpha_true
    return bin_samples(run.theta_meas, alpha, bin_width)


def pool(series: Iterable[BinnedSeries]) -> BinnedSeries:
    """Merge several binned series (e.g. four orientations) bin by bin."""
    series = list(series)
    if not series:
        raise ValueError("nothing to pool")
    width = series[0].bin_width
    if any(s.bin_width != width for s in series):
        raise ValueError("cannot pool series with different bin widths")
    merged: dict[int, list] = {}
    for s in series:
        for k, v in s.bins.items():
            merged.setdefault(k, []).append(v)
    return BinnedSeries(width, {k: np.concatenate(merged[k]) for k in sorted(merged)})


def quantile(values, q: float) -> float:
    """Linear interpolation between order statistics (numpy's default rule)."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile {q} outside [0, 1]")
    return float(np.quantile(np.asarray(values, dtype=float), q))


def summary_stats(binned: BinnedSeries) -> SummaryStats:
    keys = np.array(sorted(binned.bins), dtype=np.int64)
    rows = []
    for k in keys:
        v = binned.bins[int(k)]
        qs = np.quantile(v, STAT_QUANTILES)
        rows.append((len(v), v.min(), *qs, v.max()))
    cols = np.array(rows, dtype=float).T if rows else np.zeros((8, 0))
    return SummaryStats(keys, keys * binned.bin_width, cols[0].astype(np.int64), *cols[1:])


def delta_q(binned: BinnedSeries, q: float) -> float:
    """Mean over bins of |q-quantile - median| (deg)."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile {q} outside [0, 1]")
    if not binned.bins:
        raise ValueError("empty binned series")
    gaps = [abs(float(np.quantile(v, q)) - float(np.quantile(v, 0.5))) for v in binned.bins.values()]
    # correctly rounded mean, independent of summation order
    return math.fsum(gaps) / len(gaps)


def delta_table(binned: BinnedSeries, quantiles: Sequence[float] = DELTA_QUANTILES) -> dict:
    return {q: delta_q(binned, q) for q in quantiles}


# --- Savitzky-Golay -------------------------------------------------------

def savgol_coefficients(window: int, order: int, deriv: int = 0, pos: int | None = None) -> np.ndarray:
    """Weights that evaluate the local least-squares polynomial at ``pos``."""
    if window % 2 != 1 or window < 1:
        raise ValueError("window must be a positive odd integer")
    if not 0 <= order < window:
        raise ValueError("order must satisfy 0 <= order < window")
    half = window // 2
    pos = half if pos is None else pos
    x = np.arange(window) - pos
    vander = np.vander(x, order + 1, increasing=True)
    # row `deriv` of the pseudo-inverse maps samples to the polynomial's
    # deriv-th coefficient
    pinv = np.linalg.pinv(vander)
    return pinv[deriv] * math.factorial(deriv)


def savgol(series, window: int = 11, order: int = 3) -> np.ndarray:
    """Savitzky-Golay smoothing.

    Interior points use the centred least-squares weights; the first and
    last ``window // 2`` points take the value of the polynomial fitted to
    the first or last full window.
    """
    y = np.asarray(series, dtype=float)
    if window % 2 != 1 or window < 1:
        raise ValueError("window must be a positive odd integer")
    if not 0 <= order < window:
        raise ValueError("order must satisfy 0 <= order < window")
    if y.size < window:
        raise ValueError(f"series of length {y.size} is shorter than the window {window}")
    half = window // 2
    out = np.empty_like(y)
    coeffs = savgol_coefficients(window, order)
    out[half:y.size - half] = np.correlate(y, coeffs, mode="valid")
    x = np.arange(window)
    head = np.polyval(np.polyfit(x, y[:window], order), x[:half])
    tail = np.polyval(np.polyfit(x, y[-window:], order), x[window - half:])
    out[:half] = head
    out[y.size - half:] = tail
    return out


# --- velocity and Jacobian ------------------------------------------------

@dataclass(frozen=True)
class JacobianSeries:
    theta: np.ndarray  # rot, retained samples
    jacobian: np.ndarray  # deg/rot
    theta_speed: np.ndarray  # rev/s, every sample
    alpha_speed: np.ndarray  # deg/s, every sample
    retained: np.ndarray  # bool mask into the full series


def velocities(t, theta, alpha, window: int = 11, order: int = 3):
    """Smoothed central-difference speeds of motor and fingertip angle."""
    t = np.asarray(t, dtype=float)
    th = savgol(theta, window, order)
    al = savgol(alpha, window, order)
    return np.gradient(th, t), np.gradient(al, t)


def jacobian_series(run=None, window: int = 11, order: int = 3, speed_floor: float = 0.5, *,
                    t=None, theta=None, alpha=None) -> JacobianSeries:
    """Fingertip angular speed over motor speed, dropping slow motor samples."""
    if run is not None:
        t, theta, alpha = run.t, run.theta_meas, run.alpha_meas
    t = np.asarray(t, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if t.size < window:
        raise ValueError(f"need at least {window} samples, got {t.size}")
    dth, dal = velocities(t, theta, alpha, window, order)
    keep = np.abs(dth) >= speed_floor
    if not keep.any():
        warnings.warn("every sample fell below the speed floor; Jacobian series is empty",
                      RuntimeWarning, stacklevel=2)
    jac = np.divide(dal, dth, out=np.zeros_like(dal), where=keep)
    return JacobianSeries(theta[keep], jac[keep], dth, dal, keep)


def spearman(x, y) -> float:
    """Spearman rank correlation with average ranks for ties."""
    from scipy.stats import rankdata

    rx, ry = rankdata(x), rankdata(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0:
        return 0.0
    return float(rx @ ry) / denom


# --- stiffness ------------------------------------------------------------

def fit_stiffness(loads, deflections) -> float:
    """Least-squares slope through the origin, K = sum(F*d) / sum(d^2)."""
    f = np.asarray(loads, dtype=float)
    d = np.asarray(deflections, dtype=float)
    if f.shape != d.shape:
        raise ValueError("loads and deflections must have equal length")
    if f.size < 2:
        raise ValueError("need at least two points")
    denom = float(d @ d)
    if denom == 0.0:
        raise ValueError("all deflections are zero; stiffness is undefined")
    return float(f @ d) / denom


def r_squared(loads, deflections) -> float:
    """Coefficient of determination of the through-origin stiffness fit."""
    f = np.asarray(loads, dtype=float)
    d = np.asarray(deflections, dtype=float)
    k = fit_stiffness(f, d)
    ss_res = float(np.sum((f - k * d) ** 2))
    ss_tot = float(np.sum((f - f.mean()) ** 2))
    scale = float(f @ f)
    if ss_tot <= 1e-15 * scale:
        # all loads equal: perfect only if the fit reproduces them
        return 1.0 if ss_res <= 1e-15 * scale else 0.0
    return 1.0 - ss_res / ss_tot


# --- lonely stroke --------------------------------------------------------

def ascending_segments(theta_cmd) -> list[np.ndarray]:
    """Sample indices of each cycle's ascending half.

    A cycle starts where the command leaves zero; its ascending half runs
    until the command first decreases.
    """
    cmd = np.asarray(theta_cmd, dtype=float)
    segments = []
    i, n = 0, cmd.size
    while i < n:
        while i < n and cmd[i] <= 0.0:
            i += 1
        if i >= n:
            break
        start = i
        while i + 1 < n and cmd[i + 1] >= cmd[i]:
            i += 1
        segments.append(np.arange(start, i + 1))
        while i < n and cmd[i] > 0.0:
            i += 1
    return segments


def _cycle_bin_means(run, measured=True):
    alpha = run.alpha_meas if measured else run.alpha_true
    out = []
    for seg in ascending_segments(run.theta_cmd):
        b = bin_samples(run.theta_meas[seg], alpha[seg])
        out.append({k: float(np.mean(v)) for k, v in b.bins.items()})
    return out


def _common_bins(cycles):
    common = set(cycles[0])
    for c in cycles[1:]:
        common &= set(c)
    return sorted(common)


def lonely_stroke_metric(run, measured: bool = True) -> float:
    """Mean per-bin |first-cycle alpha - mean later-cycle alpha| on the way up (deg)."""
    cycles = _cycle_bin_means(run, measured)
    if len(cycles) < 2:
        raise ValueError("lonely-stroke metric needs at least two cycles")
    keys = _common_bins(cycles)
    if not keys:
        raise ValueError("cycles share no motor-angle bins")
    later = cycles[1:]
    gaps = [abs(cycles[0][k] - np.mean([c[k] for c in later])) for k in keys]
    return float(np.mean(gaps))


def later_cycle_spread(run, measured: bool = True) -> float:
    """Largest per-bin disagreement among cycles 2 onward (deg)."""
    cycles = _cycle_bin_means(run, measured)[1:]
    if len(cycles) < 2:
        return 0.0
    keys = _common_bins(cycles)
    return float(max((max(c[k] for c in cycles) - min(c[k] for c in cycles) for k in keys),
                     default=0.0))


def peak_motor_speed(run, window: int = 11, order: int = 3) -> float:
    th = savgol(run.theta_meas, window, order)
    return float(np.max(np.abs(np.gradient(th, run.t))))


def nominal_period_ok(t) -> bool:
    dt = np.diff(np.asarray(t, dtype=float))
    return bool(np.all(dt > 0) and np.allclose(dt, SAMPLE_PERIOD, rtol=1e-6, atol=1e-9))
