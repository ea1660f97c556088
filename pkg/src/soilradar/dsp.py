"""Range-Doppler processing and tag isolation.

The range-Doppler image is the inverse DFT of every range bin across
frames, zero-based and scaled by ``1/P``::

    R[n, s] = (1/P) * sum_m r_m[n] * exp(+2j*pi*m*s/P)

so a reflector toggling at ``f`` Hz lands in Doppler bin ``f*P/frame_rate``
and static clutter lands only in bin 0.
"""

from dataclasses import dataclass
import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_complex_matrix, check_finite, check_positive
from .radar import FrameCapture


@dataclass
class RangeDopplerImage:
    """``N x S`` complex image; column ``s`` is the Doppler bin ``s * bin_res`` Hz."""

    data: np.ndarray
    frame_rate: float

    @property
    def n_bins(self):
        return self.data.shape[0]

    @property
    def n_frames(self):
        return self.data.shape[1]

    @property
    def bin_res(self):
        return self.frame_rate / self.n_frames

    def doppler_freqs(self):
        return np.arange(self.n_frames) * self.bin_res


def _window(name, n_frames):
    if name in (None, "none", "rect"):
        return None
    if name == "hann":
        return np.hanning(n_frames)
    raise ValueError(f"unknown window {name!r}")


def range_doppler(capture, window=None):
    """Per-range-bin inverse DFT across the frames of ``capture``."""
    samples = check_complex_matrix(capture.samples)
    if samples.shape[0] < 2:
        raise ValueError("range-Doppler processing needs at least 2 frames")
    w = _window(window, samples.shape[0])
    if w is not None:
        samples = samples * w[:, None]
    return RangeDopplerImage(np.fft.ifft(samples, axis=0).T, float(capture.config.frame_rate))


class RangeDopplerTransform(TransformerMixin, BaseEstimator):
    """Transformer wrapper around :func:`range_doppler`.

    ``transform`` accepts a :class:`FrameCapture` (returns a
    :class:`RangeDopplerImage`) or a bare ``P x N`` array (returns the
    ``N x P`` complex image data).
    """

    def __init__(self, window=None, frame_rate=None):
        self.window = window
        self.frame_rate = frame_rate

    def fit(self, X=None, y=None):
        _window(self.window, 2)
        return self

    def transform(self, X):
        if isinstance(X, FrameCapture):
            return range_doppler(X, window=self.window)
        samples = check_complex_matrix(X, "X")
        if samples.shape[0] < 2:
            raise ValueError("range-Doppler processing needs at least 2 frames")
        w = _window(self.window, samples.shape[0])
        if w is not None:
            samples = samples * w[:, None]
        return np.fft.ifft(samples, axis=0).T


def doppler_bin_for_freq(f, frame_rate, n_frames):
    """Doppler bin nearest ``f`` Hz: ``round(f * P / frame_rate) mod P``."""
    f = check_finite(f, "f")
    frame_rate = check_positive(frame_rate, "frame_rate")
    if not 0 <= f < frame_rate:
        raise ValueError(f"f={f} Hz must lie in [0, frame_rate={frame_rate})")
    x = round(f * n_frames / frame_rate, 9)
    return int(math.floor(x + 0.5)) % int(n_frames)


def _tag_bins(image, f_tag):
    f_tag = check_finite(f_tag, "f_tag")
    if not 0 <= f_tag < image.frame_rate / 2:
        raise ValueError(
            f"tag frequency {f_tag} Hz is not below Nyquist ({image.frame_rate / 2} Hz)"
        )
    s = doppler_bin_for_freq(f_tag, image.frame_rate, image.n_frames)
    mirror = (-s) % image.n_frames
    return s, mirror


def extract_tag_vector(image, f_tag, combine_mirror=True):
    """Magnitude across range bins at the tag's Doppler bin.

    With ``combine_mirror`` the powers of bin ``s`` and its mirror ``P - s``
    are summed: a real on/off pattern puts equal energy in both, while the
    noise in the two bins is independent.
    """
    s, mirror = _tag_bins(image, f_tag)
    power = np.abs(image.data[:, s]) ** 2
    if combine_mirror and mirror != s:
        power = power + np.abs(image.data[:, mirror]) ** 2
    return np.sqrt(power)


@dataclass
class DetectionResult:
    range_bin: int
    refined_bin: float
    doppler_bin: int
    snr_db: float
    detected: bool
    noise_floor: float
    peak_power: float
    threshold_db: float


_ROUNDOFF = 1e-12


def parabolic_peak(log_values, k):
    """Vertex offset and height of the parabola through ``log_values[k-1:k+2]``.

    Returns ``(0.0, log_values[k])`` at the array edges or when a
    neighbour is not finite. The offset is clipped to ``[-0.5, 0.5]``.
    """
    if k <= 0 or k >= len(log_values) - 1:
        return 0.0, float(log_values[k])
    left, mid, right = log_values[k - 1], log_values[k], log_values[k + 1]
    if not (np.isfinite(left) and np.isfinite(right)):
        return 0.0, float(mid)
    curvature = left - 2 * mid + right
    if curvature >= 0:
        return 0.0, float(mid)
    offset = float(np.clip(0.5 * (left - right) / curvature, -0.5, 0.5))
    return offset, float(mid - 0.25 * (left - right) * offset)


def detect_tag(image, f_tag, window=None, threshold_db=10.0, guard_bins=3, combine_mirror=True):
    """Find the tag's range bin and its SNR in the tag-frequency vector.

    ``window`` restricts the peak search to range bins ``[lo, hi)``. The
    noise floor is the median power of the vector outside
    ``peak +/- guard_bins``; peak power and position come from a parabola
    fitted to the log-magnitude around the peak.
    """
    vec = extract_tag_vector(image, f_tag, combine_mirror=combine_mirror)
    # anything this far below the strongest cell is transform round-off
    if not np.any(vec > _ROUNDOFF * np.abs(image.data).max()):
        raise ValueError("tag-frequency vector is all zero")
    lo, hi = (0, len(vec)) if window is None else window
    lo, hi = max(0, int(lo)), min(len(vec), int(hi))
    if hi <= lo:
        raise ValueError(f"empty search window [{lo}, {hi})")
    peak = lo + int(np.argmax(vec[lo:hi]))

    with np.errstate(divide="ignore"):
        log_mag = np.log(vec)
    offset, log_peak = parabolic_peak(log_mag, peak)
    peak_power = math.exp(2 * log_peak)

    keep = np.ones(len(vec), dtype=bool)
    keep[max(0, peak - guard_bins):peak + guard_bins + 1] = False
    noise_floor = float(np.median(vec[keep] ** 2)) if keep.any() else 0.0
    if noise_floor > 0:
        snr_db = 10 * math.log10(peak_power / noise_floor)
    else:
        snr_db = math.inf

    s, _ = _tag_bins(image, f_tag)
    return DetectionResult(
        range_bin=peak,
        refined_bin=peak + offset,
        doppler_bin=s,
        snr_db=snr_db,
        detected=snr_db >= threshold_db,
        noise_floor=noise_floor,
        peak_power=peak_power,
        threshold_db=float(threshold_db),
    )
