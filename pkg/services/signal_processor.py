"""
Signal processing for accelerometer references and temporal alignment.

Unit conversion, motion-onset detection, Hampel despiking, zero-phase Butterworth
band-pass, double trapezoidal integration, linear resampling and normalized
cross-correlation synchronization. All functions are pure over immutable series.
"""
import logging
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.integrate import cumulative_trapezoid
from scipy.signal import butter, detrend, sosfiltfilt

from config import Config
from errors import ContractError, DomainError, NoMotionError
from models import AccelRecord, DisplacementSeries, ScalarSeries

logger = logging.getLogger(__name__)

STANDARD_GRAVITY = 9.80665
MAD_TO_SIGMA = 1.4826
UNIFORMITY_TOL = 0.01
PAD_CORNER_PERIODS = 3.0


def sample_rate(t: np.ndarray) -> float:
    """
    Sampling rate of a uniformly sampled time axis.

    Raises:
        ContractError: if steps deviate from their median by 1% or more
    """
    t = np.asarray(t, dtype=np.float64)
    if t.size < 2:
        raise DomainError("At least 2 samples are needed to infer a sampling rate", field="t")
    dt = np.diff(t)
    period = float(np.median(dt))
    if period <= 0 or np.max(np.abs(dt - period)) >= UNIFORMITY_TOL * period:
        raise ContractError("Series is not uniformly sampled", field="t")
    return 1.0 / period


def g_to_ms2(series: ScalarSeries) -> ScalarSeries:
    """Convert acceleration from g to m/s^2."""
    if series.unit != "g":
        raise ContractError(f"Expected a series in g, got '{series.unit}'", field="unit")
    return series.with_values(series.values * STANDARD_GRAVITY, "m/s^2")


def detect_onset(
    t: np.ndarray,
    ax: np.ndarray,
    ay: np.ndarray,
    az: np.ndarray,
    window_s: float = Config.ONSET_WINDOW_S,
    threshold_factor: float = Config.ONSET_THRESHOLD_FACTOR,
) -> float:
    """
    First time the rolling std of the combined acceleration exceeds its quiescent level.

    Args:
        t: Sample times (s)
        ax, ay, az: Acceleration channels (any consistent unit)
        window_s: Rolling window length (s)
        threshold_factor: Multiple of the quiescent median rolling std

    Returns:
        Left edge time of the first exceeding window

    Raises:
        DomainError: if the record is shorter than two windows
        NoMotionError: if no window exceeds the threshold
    """
    rate = sample_rate(t)
    n = max(int(round(window_s * rate)), 2)
    magnitude = np.sqrt(np.asarray(ax) ** 2 + np.asarray(ay) ** 2 + np.asarray(az) ** 2)
    if magnitude.size < 2 * n:
        raise DomainError(
            f"Onset detection needs at least {2 * n} samples (two windows), got {magnitude.size}", field="time_s"
        )

    rolling_std = sliding_window_view(magnitude, n).std(axis=1)
    quiescent = float(np.median(rolling_std[: n + 1]))
    threshold = threshold_factor * quiescent
    exceeding = np.flatnonzero(rolling_std > threshold)
    if exceeding.size == 0:
        raise NoMotionError(
            f"No motion onset: rolling std never exceeds {threshold:.4g} "
            f"({threshold_factor} x quiescent {quiescent:.4g})"
        )
    onset = float(np.asarray(t)[exceeding[0]])
    logger.debug(f"Onset detected at {onset:.3f} s (threshold {threshold:.4g})")
    return onset


def hampel(
    series: ScalarSeries,
    window_s: float = Config.HAMPEL_WINDOW_S,
    threshold: float = Config.HAMPEL_THRESHOLD,
) -> ScalarSeries:
    """
    Replace samples far from the rolling median by that median.

    A sample is replaced when |x - median| > threshold * 1.4826 * MAD. With MAD = 0 only
    samples that differ from the median are replaced. Windows are centered and shrink
    at the edges.

    Raises:
        DomainError: if the window spans fewer than 3 samples
    """
    rate = sample_rate(series.t)
    k = int(round(window_s * rate))
    if k % 2 == 0:
        k += 1
    if k < 3:
        raise DomainError(f"Hampel window must span at least 3 samples, got {k}", field="hampel_window_s")

    x = series.values
    half = k // 2
    padded = np.concatenate([np.full(half, np.nan), x, np.full(half, np.nan)])
    windows = sliding_window_view(padded, k)
    median = np.nanmedian(windows, axis=1)
    mad = np.nanmedian(np.abs(windows - median[:, None]), axis=1)
    outliers = np.abs(x - median) > threshold * MAD_TO_SIGMA * mad
    if np.any(outliers):
        logger.debug(f"Hampel replaced {int(outliers.sum())} of {x.size} samples")
    return series.with_values(np.where(outliers, median, x))


def bandpass(
    series: ScalarSeries,
    order: int = Config.BANDPASS_ORDER,
    band: Tuple[float, float] = (Config.BANDPASS_LOW_HZ, Config.BANDPASS_HIGH_HZ),
) -> ScalarSeries:
    """
    Zero-phase Butterworth band-pass after mean removal.

    Raises:
        DomainError: if band edges fall outside (0, Nyquist)
    """
    rate = sample_rate(series.t)
    low, high = float(band[0]), float(band[1])
    nyquist = rate / 2.0
    if not 0.0 < low < high < nyquist:
        raise DomainError(
            f"Band edges must satisfy 0 < low < high < Nyquist ({nyquist:g} Hz), got [{low}, {high}]",
            field="band_hz",
        )
    sos = butter(order, [low, high], btype="bandpass", fs=rate, output="sos")
    centered = series.values - series.values.mean()
    return series.with_values(sosfiltfilt(sos, centered, padlen=_padlen(centered.size, sos, rate, low)))


def _padlen(n: int, sos: np.ndarray, rate: float, low: float) -> int:
    """Edge extension of a few low-corner periods, capped by the record length."""
    minimum = 3 * (2 * len(sos) + 1)
    corner = int(np.ceil(PAD_CORNER_PERIODS * rate / low))
    return max(0, min(n - 1, max(minimum, corner)))


def integrate_to_displacement(
    accel: ScalarSeries,
    onset: float,
    axis: str,
    detrend_velocity: bool = True,
) -> DisplacementSeries:
    """
    Double trapezoidal integration from onset, zero initial velocity and displacement.

    Args:
        accel: Acceleration in m/s^2
        onset: Integration start time (s)
        axis: Structure axis label of the result
        detrend_velocity: Remove a linear trend from velocity before the second integration

    Returns:
        DisplacementSeries in mm starting at the first sample at or after onset

    Raises:
        DomainError: if fewer than 2 samples remain after onset
    """
    if accel.unit != "m/s^2":
        raise ContractError(f"Expected acceleration in m/s^2, got '{accel.unit}'", field="unit")
    mask = accel.t >= onset
    if int(mask.sum()) < 2:
        raise DomainError(f"Fewer than 2 samples after onset {onset:.3f} s", field="time_s")
    t = accel.t[mask]
    velocity = cumulative_trapezoid(accel.values[mask], t, initial=0.0)
    if detrend_velocity:
        velocity = detrend(velocity, type="linear")
    displacement = cumulative_trapezoid(velocity, t, initial=0.0)
    return DisplacementSeries(t=t, d=displacement * 1000.0, axis=axis, onset=float(t[0]))


def resample(series: ScalarSeries, target_rate: float = Config.TARGET_RATE_HZ) -> ScalarSeries:
    """Linear interpolation onto the grid t0 + k / target_rate spanning the source."""
    if len(series) == 0:
        raise DomainError("Cannot resample an empty series", field="t")
    if target_rate <= 0:
        raise DomainError(f"target_rate must be positive, got {target_rate}", field="target_rate_hz")
    t0, t_end = float(series.t[0]), float(series.t[-1])
    count = int(np.floor((t_end - t0) * target_rate + 1e-9)) + 1
    grid = t0 + np.arange(count) / target_rate
    return ScalarSeries(grid, np.interp(grid, series.t, series.values), series.unit)


def synchronize(a: ScalarSeries, b: ScalarSeries, max_lag_s: float = Config.SYNC_MAX_LAG_S) -> float:
    """
    Lag of b relative to a from normalized cross-correlation.

    Positive lag means b is delayed: b[n] = a[n - k] gives lag k / rate. The peak of the
    signed correlation is refined by a parabola through its neighbours.

    Raises:
        DomainError: for flat series, mismatched rates, too little overlap or anti-correlated inputs
    """
    rate_a = sample_rate(a.t)
    rate_b = sample_rate(b.t)
    if abs(rate_a - rate_b) > 1e-6 * rate_a:
        raise DomainError(f"Series rates differ: {rate_a:g} Hz vs {rate_b:g} Hz", field="t")
    x = a.values - a.values.mean()
    y = b.values - b.values.mean()
    if not (np.any(x) and np.any(y)):
        raise DomainError("Cannot synchronize a flat (zero-variance) series", field="values")

    K = int(round(max_lag_s * rate_a))
    n = min(x.size, y.size)
    if n < 2 * K + 2:
        raise DomainError(
            f"Overlap of {n} samples is too short for a max lag of {K} samples", field="max_lag_s"
        )

    lags = np.arange(-K, K + 1)
    ncc = np.empty(lags.size)
    for i, k in enumerate(lags):
        if k >= 0:
            xs, ys = x[: n - k], y[k:n]
        else:
            xs, ys = x[-k:n], y[: n + k]
        denom = np.sqrt(np.dot(xs, xs) * np.dot(ys, ys))
        ncc[i] = np.dot(xs, ys) / denom if denom > 0 else 0.0

    peak = int(np.argmax(ncc))
    if ncc[peak] <= 0 or abs(ncc.min()) > ncc[peak]:
        raise DomainError(
            f"Series are anti-correlated (max {ncc[peak]:.3f}, min {ncc.min():.3f}); refusing to align",
            field="values",
        )

    offset = 0.0
    if 0 < peak < lags.size - 1:
        left, centre, right = ncc[peak - 1], ncc[peak], ncc[peak + 1]
        curvature = left - 2.0 * centre + right
        if curvature < 0:
            offset = 0.5 * (left - right) / curvature
    lag = (lags[peak] + offset) / rate_a
    logger.info(f"Synchronization lag {lag:+.4f} s (ncc {ncc[peak]:.4f})")
    return float(lag)


def shift_series(series: ScalarSeries, lag_s: float) -> ScalarSeries:
    """Move a series earlier by lag_s (undo a delay found by synchronize)."""
    return ScalarSeries(series.t - lag_s, series.values, series.unit)


def align_pair(
    pred: ScalarSeries,
    ref: ScalarSeries,
    lag_s: float = 0.0,
) -> Tuple[ScalarSeries, ScalarSeries]:
    """
    Undo the reference delay and sample it on the prediction grid over the common support.

    Returns:
        (prediction cropped to the overlap, reference interpolated on the same times)

    Raises:
        DomainError: if fewer than 2 prediction samples fall in the overlap
    """
    shifted = shift_series(ref, lag_s)
    start = max(pred.t[0], shifted.t[0])
    end = min(pred.t[-1], shifted.t[-1])
    tol = 1e-9
    mask = (pred.t >= start - tol) & (pred.t <= end + tol)
    if int(mask.sum()) < 2:
        raise DomainError("Prediction and reference do not overlap after alignment", field="time_s")
    t = pred.t[mask]
    ref_values = np.interp(t, shifted.t, shifted.values)
    return ScalarSeries(t, pred.values[mask], pred.unit), ScalarSeries(t, ref_values, shifted.unit)


def derive_reference(
    record: AccelRecord,
    axis: str,
    window_s: float = Config.ONSET_WINDOW_S,
    threshold_factor: float = Config.ONSET_THRESHOLD_FACTOR,
    hampel_window_s: float = Config.HAMPEL_WINDOW_S,
    hampel_threshold: float = Config.HAMPEL_THRESHOLD,
    band: Tuple[float, float] = (Config.BANDPASS_LOW_HZ, Config.BANDPASS_HIGH_HZ),
    order: int = Config.BANDPASS_ORDER,
    target_rate: float = Config.TARGET_RATE_HZ,
    onset: Optional[float] = None,
) -> DisplacementSeries:
    """
    Accelerometer -> displacement reference for one structure axis.

    g -> m/s^2, onset, Hampel, crop at onset, mean removal, band-pass, double
    integration, band-pass of the displacement, resampling. Samples before onset
    are dropped.
    """
    accel = g_to_ms2(record.channel(axis))
    if onset is None:
        onset = detect_onset(record.t, record.ax, record.ay, record.az, window_s, threshold_factor)
    cleaned = hampel(accel, hampel_window_s, hampel_threshold)

    mask = cleaned.t >= onset
    if int(mask.sum()) < 2:
        raise DomainError(f"Fewer than 2 samples after onset {onset:.3f} s", field="time_s")
    cropped = ScalarSeries(cleaned.t[mask], cleaned.values[mask], cleaned.unit)
    filtered = bandpass(cropped, order, band)

    displacement = integrate_to_displacement(filtered, onset, axis)
    # integration drift sits below the low corner
    steady = bandpass(displacement.as_scalar(), order, band)
    resampled = resample(steady, target_rate)
    return DisplacementSeries(t=resampled.t, d=resampled.values, axis=axis, onset=displacement.onset)
